#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace magel;

TEST(Grid, RejectsUnsupportedShapes) {
  EXPECT_THROW(TorusGrid::create(4, 16), PreconditionError);
  EXPECT_THROW(TorusGrid::create(1, 16), PreconditionError);
  EXPECT_THROW(TorusGrid::create(2, 15), PreconditionError);
  EXPECT_THROW(TorusGrid::create(2, 6), PreconditionError);
  EXPECT_NO_THROW(TorusGrid::create(3, 8));
}

TEST(Grid, SpacingIsExact) {
  const auto g = TorusGrid::create(2, 64);
  EXPECT_EQ(g->spacing(), 2.0 * std::numbers::pi / 64.0);
  EXPECT_EQ(g->points(), 64u * 64u);
  EXPECT_EQ(g->modes(), 64u * 33u);
}

TEST(Grid, ModeWeightsCountTheFullLattice) {
  for (int d : {2, 3}) {
    const auto g = TorusGrid::create(d, 8);
    double total = 0.0;
    for (std::size_t k = 0; k < g->modes(); ++k) total += g->mode_weight(k);
    EXPECT_DOUBLE_EQ(total, static_cast<double>(g->points()));
  }
}

TEST(Grid, NyquistEntriesHaveZeroDerivativeWavenumber) {
  const auto g = TorusGrid::create(2, 8);
  int seen = 0;
  for (std::size_t k = 0; k < g->modes(); ++k) {
    for (int a = 0; a < 2; ++a) {
      if (std::abs(g->wavenumber(k, a)) == 4) {
        EXPECT_TRUE(g->nyquist(k, a));
        EXPECT_EQ(g->derivative_wavenumber(k, a), 0.0);
        ++seen;
      }
    }
  }
  EXPECT_GT(seen, 0);
}

TEST(Grid, ForwardMatchesDirectDft) {
  const auto g = TorusGrid::create(2, 16);
  std::mt19937_64 rng(5);
  const auto f = oracle::random_smooth(g, rng, 7, 1.0, false);
  const auto s = to_spectral(f);
  for (std::size_t k = 0; k < g->modes(); k += 7) {
    const int m[2] = {g->wavenumber(k, 0), g->wavenumber(k, 1)};
    const auto ref = oracle::dft_coefficient(f, m);
    EXPECT_NEAR(std::abs(s.coeffs[k] - ref), 0.0, 1e-13) << "entry " << k;
  }
}

TEST(Grid, RoundTripIsIdentity) {
  for (int d : {2, 3}) {
    const auto g = TorusGrid::create(d, d == 2 ? 64 : 16);
    std::mt19937_64 rng(11);
    ScalarField f(g);
    std::normal_distribution<double> nd;
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = nd(rng);
    const auto back = to_physical(to_spectral(f));
    EXPECT_LE(max_abs(back - f) / max_abs(f), 1e-13);
  }
}

TEST(Grid, ParsevalHolds) {
  for (int d : {2, 3}) {
    const auto g = TorusGrid::create(d, d == 2 ? 32 : 16);
    std::mt19937_64 rng(3);
    ScalarField f(g);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = u(rng);
    double grid_sum = 0.0;
    for (double x : f.values()) grid_sum += x * x;
    grid_sum *= g->cell_volume();
    const auto s = to_spectral(f);
    double mode_sum = 0.0;
    for (std::size_t k = 0; k < g->modes(); ++k) mode_sum += g->mode_weight(k) * std::norm(s.coeffs[k]);
    mode_sum *= g->volume();
    EXPECT_NEAR(grid_sum / mode_sum, 1.0, 1e-12);
    EXPECT_NEAR(l2_norm_sq(f) / grid_sum, 1.0, 1e-12);
  }
}

TEST(Grid, FieldArithmeticChecksGrids) {
  const auto a = TorusGrid::create(2, 8);
  const auto b = TorusGrid::create(2, 16);
  EXPECT_THROW(ScalarField(a) + ScalarField(b), PreconditionError);
  EXPECT_THROW(ScalarField(a, std::vector<double>(3)), PreconditionError);
}
