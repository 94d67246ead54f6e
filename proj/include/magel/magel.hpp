#pragma once

#include "magel/errors.hpp"
#include "magel/grid.hpp"
#include "magel/field.hpp"
#include "magel/spectral.hpp"
#include "magel/fields.hpp"
#include "magel/dynamics.hpp"
#include "magel/energetics.hpp"
#include "magel/timestepper.hpp"
#include "magel/stokes.hpp"
#include "magel/schemes.hpp"
