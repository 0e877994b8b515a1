#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "latticecorr/correlations.hpp"
#include "latticecorr/lattice_model.hpp"

using namespace latticecorr;

namespace {

constexpr double pi = std::numbers::pi;

FieldState state_of(std::size_t n, std::vector<std::size_t> modes, Statistics s = Statistics::Boson) {
  return FieldState{std::move(modes), n, s};
}

// Direct double sums over atoms, written from the definitions.
cplx g1_direct(const std::vector<std::size_t>& modes, double dk, double d) {
  cplx s = 0.0;
  for (auto j : modes) s += std::exp(cplx(0.0, dk * static_cast<double>(j) * d));
  return s / static_cast<double>(modes.size());
}

double g2_direct(const std::vector<std::size_t>& modes, double dk, double d, double sign) {
  double s = 0.0;
  for (auto a : modes)
    for (auto b : modes)
      if (a != b) s += 1.0 + sign * std::cos(dk * (static_cast<double>(a) - static_cast<double>(b)) * d);
  const double r = static_cast<double>(modes.size());
  return s / (r * r);
}

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng, bool zero_first) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> p(n);
  for (auto& x : p) x = g(rng);
  if (zero_first) p[0] = 0.0;
  return normalized(p);
}

}  // namespace

TEST(ModeBasis, GridQuantization) {
  const ModeBasis b(256, 0.5e-6, 3.0024e-9);
  EXPECT_GT(b.delta_k(), 0.0);
  EXPECT_NEAR(b.delta_k() * b.slit_quantum(), 2.0 * pi / 256.0, 1e-15);
  EXPECT_NEAR(b.delta_k() * b.coincidence_quantum(), pi / 256.0, 1e-15);
  EXPECT_EQ(b.coincidence_ell(0), -256);
  EXPECT_EQ(b.coincidence_ell(256), 0);
  EXPECT_THROW(ModeBasis(1, 1.0, 1.0), Error);
}

TEST(G1OfState, SingleAtomIsPurePhasor) {
  const ModeBasis b(16, 0.5e-6, 3e-9);
  for (std::size_t j : {0u, 3u, 15u}) {
    const auto st = state_of(16, {j});
    for (std::size_t l = 0; l < 16; ++l) {
      const double d = static_cast<double>(l) * b.slit_quantum();
      const cplx g = g1_of_state(st, b, d);
      EXPECT_NEAR(std::abs(g), 1.0, 1e-14);
      EXPECT_NEAR(std::abs(g - std::polar(1.0, 2.0 * pi * static_cast<double>(j * l) / 16.0)), 0.0, 1e-12);
    }
  }
}

TEST(G1OfState, ZeroSeparationIsOne) {
  const ModeBasis b(32, 0.5e-6, 3e-9);
  const auto st = state_of(32, {1, 4, 9, 30});
  EXPECT_EQ(g1_of_state(st, b, 0.0), cplx(1.0, 0.0));
  EXPECT_EQ(g1_profile(st, b)[0], cplx(1.0, 0.0));
}

TEST(G1OfState, TwoAdjacentModes) {
  const ModeBasis b(8, 1.0, 8.0);
  const auto st = state_of(8, {0, 1});
  for (std::size_t l = 0; l < 8; ++l) {
    const double d = static_cast<double>(l) * b.slit_quantum();
    const double phase = b.delta_k() * d;
    const cplx expected = (1.0 + std::polar(1.0, phase)) / 2.0;
    EXPECT_NEAR(std::abs(g1_of_state(st, b, d) - expected), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(g1_of_state(st, b, d)), std::abs(std::cos(phase / 2.0)), 1e-14);
  }
}

TEST(G1OfState, EmptyFieldThrows) {
  const ModeBasis b(8, 1.0, 8.0);
  EXPECT_THROW(g1_of_state(state_of(8, {}), b, 0.0), Error);
}

TEST(G1OfState, ProfileMatchesDirectSumAndVisibilityBounded) {
  std::mt19937_64 rng(7);
  const ModeBasis b(64, 0.5e-6, 3e-9);
  for (int t = 0; t < 20; ++t) {
    Occupancy occ = detail::sample_random(64, 1 + t % 20, rng);
    const auto st = FieldState::from(occ, Statistics::Boson);
    const auto prof = correlation_profile(st, b);
    for (std::size_t l = 0; l < 64; ++l) {
      const double d = static_cast<double>(l) * b.slit_quantum();
      EXPECT_NEAR(std::abs(prof.g1[l] - g1_direct(st.modes, b.delta_k(), d)), 0.0, 1e-12);
      EXPECT_GE(prof.visibility[l], 0.0);
      EXPECT_LE(prof.visibility[l], 1.0 + 1e-15);
    }
  }
}

TEST(G2OfState, TwoAdjacentBosonsAndFermions) {
  const ModeBasis b(16, 0.5e-6, 3e-9);
  const auto bos = state_of(16, {7, 8}, Statistics::Boson);
  const auto fer = state_of(16, {7, 8}, Statistics::Fermion);
  for (std::size_t i = 0; i < b.coincidence_points(); ++i) {
    const double d = static_cast<double>(b.coincidence_ell(i)) * b.coincidence_quantum();
    const double c = std::cos(b.delta_k() * d);
    EXPECT_NEAR(2.0 * g2_of_state(bos, b, d) - 1.0, c, 1e-14);
    EXPECT_NEAR(2.0 * g2_of_state(fer, b, d) - 1.0, -c, 1e-14);
  }
  EXPECT_DOUBLE_EQ(g2_of_state(bos, b, 0.0), 1.0);
}

TEST(G2OfState, NeedsTwoAtoms) {
  const ModeBasis b(8, 1.0, 8.0);
  try {
    g2_of_state(state_of(8, {3}), b, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("need two atoms for coincidences"), std::string::npos);
  }
}

TEST(G2OfState, ZeroSeparationLevelApproachesTwo) {
  const ModeBasis b(128, 0.5e-6, 3e-9);
  double prev = 0.0;
  for (std::size_t r = 2; r <= 100; ++r) {
    std::vector<std::size_t> modes(r);
    for (std::size_t i = 0; i < r; ++i) modes[i] = i;
    const double g = g2_of_state(state_of(128, modes), b, 0.0);
    EXPECT_NEAR(g, 2.0 * (static_cast<double>(r) - 1.0) / static_cast<double>(r), 1e-12);
    EXPECT_GT(g, prev);
    EXPECT_LT(g, 2.0);
    prev = g;
  }
}

// Property: profiles agree with direct double sums, are symmetric in l and
// obey the exchange-sign relation on the normalized coincidence rate.
TEST(G2OfState, ProfileProperties) {
  std::mt19937_64 rng(11);
  const ModeBasis b(48, 0.5e-6, 3e-9);
  for (int t = 0; t < 30; ++t) {
    const std::size_t r = 2 + static_cast<std::size_t>(t) % 20;
    const Occupancy occ = detail::sample_random(48, r, rng);
    const auto bos = FieldState::from(occ, Statistics::Boson);
    const auto fer = FieldState::from(occ, Statistics::Fermion);
    const auto gb = g2_profile(bos, b);
    const auto gf = g2_profile(fer, b);
    for (std::size_t i = 0; i < gb.size(); ++i) {
      const double d = static_cast<double>(b.coincidence_ell(i)) * b.coincidence_quantum();
      EXPECT_NEAR(gb[i], g2_direct(bos.modes, b.delta_k(), d, 1.0), 1e-12);
      EXPECT_NEAR(gf[i], g2_direct(fer.modes, b.delta_k(), d, -1.0), 1e-12);
      EXPECT_NEAR(normalized_coincidence(gf[i], r), -normalized_coincidence(gb[i], r), 1e-12);
    }
    for (std::size_t l = 1; l < 48; ++l) EXPECT_NEAR(gb[48 + l], gb[48 - l], 1e-13);
    if (r == 2) {
      for (std::size_t i = 0; i < gb.size(); ++i) EXPECT_NEAR(2.0 * gf[i] - 1.0, -(2.0 * gb[i] - 1.0), 1e-12);
    }
  }
}

TEST(Transforms, G1FromP1Examples) {
  const ModeBasis b(32, 0.5e-6, 3e-9);
  std::vector<double> delta(32, 0.0);
  delta[5] = 1.0;
  const auto g = g1_from_p1(delta, b);
  for (std::size_t l = 0; l < 32; ++l)
    EXPECT_NEAR(std::abs(g[l] - std::polar(1.0, 2.0 * pi * 5.0 * static_cast<double>(l) / 32.0)), 0.0, 1e-13);
  const std::vector<double> flat(32, 1.0 / 32.0);
  const auto gu = g1_from_p1(flat, b);
  EXPECT_NEAR(std::abs(gu[0] - 1.0), 0.0, 1e-15);
  for (std::size_t l = 1; l < 32; ++l) EXPECT_LT(std::abs(gu[l]), 1e-15);
  std::vector<double> bad(32, 1.0);
  EXPECT_THROW(g1_from_p1(bad, b), Error);
}

TEST(Transforms, P1FromG1Examples) {
  const std::vector<cplx> ones(16, 1.0);
  const auto p = p1_from_g1(ones).values;
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  for (std::size_t j = 1; j < 16; ++j) EXPECT_NEAR(p[j], 0.0, 1e-15);
  std::vector<cplx> phasor(16);
  for (std::size_t l = 0; l < 16; ++l) phasor[l] = std::polar(1.0, 2.0 * pi * 5.0 * static_cast<double>(l) / 16.0);
  const auto p5 = p1_from_g1(phasor).values;
  for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(p5[j], j == 5 ? 1.0 : 0.0, 1e-15);
  std::vector<cplx> bad(16, 0.0);
  bad[1] = cplx(0.0, 1.0);  // not the transform of a real distribution
  try {
    p1_from_g1(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("inconsistent g1 samples"), std::string::npos);
  }
}

TEST(Transforms, RoundTripsAreExact) {
  std::mt19937_64 rng(3);
  const ModeBasis b(256, 0.5e-6, 3.0024e-9);
  for (int t = 0; t < 20; ++t) {
    const auto p1 = random_distribution(256, rng, false);
    const auto back = p1_from_g1(g1_from_p1(p1, b)).values;
    for (std::size_t j = 0; j < 256; ++j) EXPECT_NEAR(back[j], p1[j], 1e-12);
    const auto p2 = random_distribution(256, rng, true);
    for (Statistics s : {Statistics::Boson, Statistics::Fermion}) {
      const auto rec = p2_from_g2(g2_from_p2(p2, 25, b, s), 25, s);
      for (std::size_t j = 0; j < 256; ++j) EXPECT_NEAR(rec.values[j], p2[j], 1e-12);
      EXPECT_LT(rec.edge_residual, 1e-12);
      EXPECT_FALSE(rec.unphysical_zero_separation);
    }
  }
}

TEST(Transforms, G2FromP2Examples) {
  const ModeBasis b(16, 0.5e-6, 3e-9);
  std::vector<double> p2(16, 0.0);
  p2[1] = 1.0;
  const auto g2 = g2_from_p2(p2, 2, b);
  for (std::size_t i = 0; i < g2.size(); ++i) {
    const double d = static_cast<double>(b.coincidence_ell(i)) * b.coincidence_quantum();
    EXPECT_NEAR(2.0 * g2[i] - 1.0, std::cos(b.delta_k() * d), 1e-14);
  }
  std::mt19937_64 rng(5);
  for (std::size_t r : {2u, 3u, 25u, 100u}) {
    const auto p = random_distribution(16, rng, true);
    EXPECT_NEAR(g2_from_p2(p, r, b)[16], 2.0 * (static_cast<double>(r) - 1.0) / static_cast<double>(r), 1e-14);
  }
  std::vector<double> with_zero(16, 1.0 / 16.0);
  EXPECT_THROW(g2_from_p2(with_zero, 2, b), Error);
}

TEST(Transforms, G2FromP2MatchesStateProfile) {
  std::mt19937_64 rng(9);
  const ModeBasis b(40, 0.5e-6, 3e-9);
  for (int t = 0; t < 10; ++t) {
    const Occupancy occ = detail::sample_random(40, 7, rng);
    const auto counts = pair_separation_counts(occ);
    std::vector<double> p2(40);
    for (std::size_t j = 0; j < 40; ++j) p2[j] = static_cast<double>(counts[j]) / 21.0;
    for (Statistics s : {Statistics::Boson, Statistics::Fermion}) {
      const auto from_p2 = g2_from_p2(p2, 7, b, s);
      const auto direct = g2_profile(FieldState::from(occ, s), b);
      for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(from_p2[i], direct[i], 1e-13);
    }
  }
}

TEST(Transforms, P2FromG2Examples) {
  const std::vector<double> flat(32, 1.0);
  const auto rec = p2_from_g2(flat, 2);
  EXPECT_NEAR(rec.values[0], 1.0, 1e-14);
  EXPECT_TRUE(rec.unphysical_zero_separation);
  for (std::size_t j = 1; j < 16; ++j) EXPECT_NEAR(rec.values[j], 0.0, 1e-14);

  const ModeBasis b(16, 0.5e-6, 3e-9);
  std::vector<double> two_atom(32);
  for (std::size_t i = 0; i < 32; ++i) {
    const double d = static_cast<double>(b.coincidence_ell(i)) * b.coincidence_quantum();
    two_atom[i] = 0.5 * (1.0 + std::cos(b.delta_k() * d));
  }
  const auto p = p2_from_g2(two_atom, 2).values;
  for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(p[j], j == 1 ? 1.0 : 0.0, 1e-14);

  auto asym = two_atom;
  asym[16 + 3] += 1e-6;
  EXPECT_THROW(p2_from_g2(asym, 2), Error);
}

TEST(FermionTransform, Examples) {
  const std::vector<double> in{1.5, 1.0, 0.25};
  const auto out = fermion_transform(in);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 1.0);
  EXPECT_DOUBLE_EQ(out[2], 1.75);
  // The finite-R form reduces to it for R = infinity and is an involution.
  const auto twice = fermion_transform(fermion_transform(in, 5), 5);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_NEAR(twice[i], in[i], 1e-15);
  EXPECT_NEAR(fermion_transform(in, 1000000)[0], 0.5, 1e-5);
}

TEST(Siegert, Examples) {
  const std::vector<cplx> unit(4, cplx(1.0, 0.0));
  const std::vector<double> two(4, 2.0);
  EXPECT_LT(siegert_check(unit, two).max_abs, 1e-15);
  const std::vector<cplx> zero(4, 0.0);
  const std::vector<double> one(4, 1.0);
  EXPECT_LT(siegert_check(zero, one).max_abs, 1e-15);
  const std::vector<double> wrong(5, 1.0);
  EXPECT_THROW(siegert_check(zero, wrong), Error);
}

// Exact ensemble average for uniformly filled lattices: all R-subsets equally
// likely. Average g1 and g2 by enumerating every pair and every site.
TEST(Siegert, SingleOccupancyFormIsExactForUniformFilling) {
  const std::size_t n = 12, r = 4;
  const ModeBasis b(n, 1.0, 12.0);
  std::vector<cplx> g1(2 * n);
  std::vector<double> g2(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const double d = static_cast<double>(b.coincidence_ell(i)) * b.coincidence_quantum();
    cplx s = 0.0;
    for (std::size_t a = 0; a < n; ++a) s += std::exp(cplx(0.0, b.delta_k() * static_cast<double>(a) * d));
    g1[i] = s / static_cast<double>(n);
    double pair = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t c = 0; c < n; ++c)
        if (a != c) pair += std::cos(b.delta_k() * (static_cast<double>(a) - static_cast<double>(c)) * d);
    pair /= static_cast<double>(n * (n - 1));
    const double rr = static_cast<double>(r);
    g2[i] = (rr - 1.0) / rr * (1.0 + pair);
  }
  EXPECT_LT(siegert_check_single_occupancy(g1, g2, r, 1.0 / static_cast<double>(n)).max_abs, 1e-13);
  // The textbook relation misses the finite-R level by 1/R at large separation.
  EXPECT_GT(siegert_check(g1, g2).max_abs, 0.2);
}

TEST(ProfileCsv, ColumnsAndRows) {
  const ModeBasis b(4, 1.0, 4.0);
  const auto p = correlation_profile(state_of(4, {0, 2}), b);
  std::ostringstream os;
  const std::vector<std::string> header{"seed = 1"};
  write_profile_csv(os, p, b, header);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("# seed = 1\ngrid,l,separation_m,re_g1,im_g1,V,g2\n", 0), 0u);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2 + 4 + 8);
}
