#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "latticecorr/ensemble.hpp"

using namespace latticecorr;

namespace {

ExperimentConfig small_config(DistributionModel model, std::size_t n = 64, std::size_t runs = 200,
                              std::uint64_t seed = 11) {
  ExperimentConfig c;
  c.lattice.n_sites = n;
  c.lattice.fill_factor = model.target_fill;
  c.model = std::move(model);
  c.runs = runs;
  c.master_seed = seed;
  return c;
}

bool same_bits(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.shots.size() != b.shots.size()) return false;
  for (std::size_t i = 0; i < a.shots.size(); ++i)
    if (a.shots[i].positions() != b.shots[i].positions()) return false;
  return a.mean_g1 == b.mean_g1 && a.se_g1_re == b.se_g1_re && a.mean_g1_coincidence == b.mean_g1_coincidence &&
         a.mean_g2 == b.mean_g2 && a.se_g2 == b.se_g2 && a.p1_recon == b.p1_recon && a.p1_se == b.p1_se &&
         a.p2_recon == b.p2_recon && a.p2_se == b.p2_se && a.p1_truth == b.p1_truth && a.p2_truth == b.p2_truth;
}

}  // namespace

TEST(Ensemble, WorkerCountDoesNotChangeResults) {
  for (const DistributionModel& m : {DistributionModel{RandomFill{}, 0.1},
                                     DistributionModel{Bunched{8 * 0.5e-6, RandomSeed{}}, 0.1}}) {
    auto cfg = small_config(m, 64, 150);
    cfg.workers = 1;
    const auto a = run_experiment(cfg);
    for (std::size_t w : {3u, 8u, 0u}) {
      cfg.workers = w;
      EXPECT_TRUE(same_bits(a, run_experiment(cfg))) << "workers = " << w;
    }
  }
}

TEST(Ensemble, SeedSelectsTheShots) {
  auto cfg = small_config({RandomFill{}, 0.1});
  const auto a = run_experiment(cfg);
  cfg.master_seed = 12;
  const auto b = run_experiment(cfg);
  EXPECT_FALSE(same_bits(a, b));
  // Every run draws from its own stream.
  for (std::size_t run : {0u, 57u, 199u}) {
    Engine rng = make_stream(11, run);
    EXPECT_EQ(a.shots[run].positions(), sample_occupancy(cfg.model, cfg.lattice, rng).positions());
  }
}

TEST(Ensemble, ZeroSeparationCoincidence) {
  for (double fill : {0.05, 0.1, 0.3}) {
    const auto res = run_experiment(small_config({RandomFill{}, fill}, 64, 40));
    const double r = static_cast<double>(res.atom_count);
    EXPECT_NEAR(res.mean_g2[64], 2.0 * (r - 1.0) / r, 1e-10);
    // One-pass variance: the spread of a constant is the square root of roundoff.
    EXPECT_NEAR(res.se_g2[64], 0.0, 1e-7);
  }
  auto cfg = small_config({RandomFill{}, 0.1}, 64, 40);
  cfg.lattice.statistics = Statistics::Fermion;
  const auto res = run_experiment(cfg);
  EXPECT_NEAR(res.mean_g2[64], 0.0, 1e-10);
}

TEST(Ensemble, SingleRunSingleAtom) {
  auto cfg = small_config({RandomFill{}, 0.1}, 10, 1, 3);
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.atom_count, 1u);
  const auto site = res.shots[0].positions().at(0);
  for (std::size_t j = 0; j < 10; ++j) {
    EXPECT_NEAR(res.p1_recon[j], j == site ? 1.0 : 0.0, 1e-12);
    EXPECT_EQ(res.p1_se[j], 0.0);
  }
  EXPECT_TRUE(res.mean_g2.empty());
  EXPECT_TRUE(res.p2_recon.empty());
  for (const auto& g : res.mean_g1) EXPECT_NEAR(std::abs(g), 1.0, 1e-12);
}

TEST(Ensemble, ReconstructionsMatchTruth) {
  const auto models = default_figure6_models(LatticeConfig{}, 0.1);
  for (const auto* m : {&models.random, &models.bunched, &models.antibunched, &models.superlattice}) {
    auto cfg = small_config(*m, 256, 64);
    cfg.model.target_fill = 0.1;
    cfg.lattice.fill_factor = 0.1;
    const auto res = run_experiment(cfg);
    for (std::size_t j = 0; j < 256; ++j) {
      EXPECT_NEAR(res.p1_recon[j], res.p1_truth[j], 1e-12);
      EXPECT_NEAR(res.p2_recon[j], res.p2_truth[j], 1e-12);
    }
    EXPECT_LT(res.diagnostics.p2_clip_mass, 1e-12);
    EXPECT_GE(res.diagnostics.p2_clip_mass, 0.0);
    EXPECT_LT(res.diagnostics.p2_imaginary_residue, 1e-12);
    EXPECT_LT(std::abs(res.diagnostics.p2_zero_separation_weight), 1e-12);
  }
}

// Standard errors against a direct per-shot computation.
TEST(Ensemble, StandardErrorsFromShots) {
  const auto res = run_experiment(small_config({Bunched{4e-6, RandomSeed{}}, 0.125}, 32, 90));
  const double r = static_cast<double>(res.atom_count);
  const double m = static_cast<double>(res.runs);
  for (std::size_t j = 0; j < 32; ++j) {
    std::vector<double> x1, x2;
    for (const auto& s : res.shots) {
      x1.push_back(s.occupied(j) ? 1.0 / r : 0.0);
      x2.push_back(static_cast<double>(pair_separation_counts(s)[j]) / (r * (r - 1) / 2));
    }
    auto se = [&](const std::vector<double>& x) {
      double mu = 0.0;
      for (double v : x) mu += v / m;
      double ss = 0.0;
      for (double v : x) ss += (v - mu) * (v - mu);
      return std::sqrt(ss / (m - 1.0) / m);
    };
    EXPECT_NEAR(res.p1_se[j], se(x1), 1e-12);
    EXPECT_NEAR(res.p2_se[j], se(x2), 1e-12);
  }
}

TEST(Ensemble, InvalidConfigurations) {
  auto cfg = small_config({AntiBunched{8}, 0.5});
  EXPECT_THROW(run_experiment(cfg), InfeasibleModel);
  cfg = small_config({RandomFill{}, 0.001});
  EXPECT_THROW(run_experiment(cfg), Error);
  cfg = small_config({RandomFill{}, 0.1});
  cfg.runs = 0;
  EXPECT_THROW(run_experiment(cfg), Error);
}

TEST(CompareDistributions, Examples) {
  const std::vector<double> a{0.0, 0.5, 0.5, 0.0}, b{0.0, 0.0, 0.0, 1.0}, c{0.0, 1.0, 1.0, 0.0};
  auto same = compare_distributions(a, c);
  EXPECT_NEAR(same.l1, 0.0, 1e-15);
  EXPECT_NEAR(same.cosine_similarity, 1.0, 1e-15);
  auto disjoint = compare_distributions(a, b);
  EXPECT_NEAR(disjoint.l1, 2.0, 1e-15);
  EXPECT_NEAR(disjoint.cosine_similarity, 0.0, 1e-15);
  EXPECT_NEAR(disjoint.max_abs, 1.0, 1e-15);
  const std::vector<double> d{0.0, 0.5, 0.25, 0.25};
  const auto part = compare_distributions(a, d);
  EXPECT_NEAR(part.l1, 0.5, 1e-15);
  EXPECT_NEAR(part.cosine_similarity, 0.375 / std::sqrt(0.5 * 0.375), 1e-15);
  EXPECT_THROW(compare_distributions(a, std::vector<double>{1.0}), Error);
}

// Under the null the p-values are uniform; check the rejection rate.
TEST(UniformityTest, CalibratedUnderNull) {
  const LatticeConfig lat{64, 0.5e-6, 0.1};
  const DistributionModel m{RandomFill{}, 0.1};
  int rejected = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<Occupancy> shots;
    for (int s = 0; s < 120; ++s) {
      Engine rng = make_stream(derive_seed(99, t), s);
      shots.push_back(sample_occupancy(m, lat, rng));
    }
    const auto u = uniformity_test(shots);
    EXPECT_EQ(u.dof, 15u);
    if (u.p_value < 0.05) ++rejected;
  }
  // Binomial(400, 0.05): mean 20, sd 4.4.
  EXPECT_GE(rejected, 5);
  EXPECT_LE(rejected, 37);
}

TEST(UniformityTest, DetectsFixedSeedBunching) {
  auto cfg = small_config({Bunched{4e-6, FixedSeed{32}}, 0.1}, 64, 200);
  const auto res = run_experiment(cfg);
  EXPECT_LT(uniformity_test(res.shots).p_value, 1e-6);
  // Atoms confined to the left half: blocks that never fill give a
  // degenerate covariance and an outright rejection.
  std::vector<Occupancy> left;
  Engine rng = make_stream(5, 0);
  for (std::size_t s = 0; s < 50; ++s) {
    const auto pos = detail::sample_random(32, 4, rng).positions();
    left.push_back(Occupancy::from_positions(64, pos));
  }
  const auto u = uniformity_test(left);
  EXPECT_EQ(u.p_value, 0.0);
  EXPECT_TRUE(std::isinf(u.statistic));
  EXPECT_THROW(uniformity_test(std::span<const Occupancy>(left.data(), 10)), Error);
}

TEST(Figure6, SuiteRunsEveryModel) {
  ExperimentConfig base = small_config({RandomFill{}, 0.125}, 64, 100, 6);
  const auto models = default_figure6_models(base.lattice, 0.125);
  const auto out = figure6_suite(base, models);
  ASSERT_EQ(out.size(), 4u);
  for (const auto& [kind, r] : out) {
    EXPECT_EQ(r.atom_count, 8u);
    EXPECT_EQ(r.master_seed, figure6_seed(6, kind));
  }
  const auto& anti = out.at(ModelKind::AntiBunched).p2_recon;
  for (std::size_t j = 1; j < 4; ++j) EXPECT_NEAR(anti[j], 0.0, 1e-12);
  const auto& comb = out.at(ModelKind::SuperLattice).p2_recon;
  for (std::size_t j = 1; j < 64; ++j)
    if (j % 4) EXPECT_NEAR(comb[j], 0.0, 1e-12);
  // Distinct seeds per model.
  EXPECT_NE(figure6_seed(6, ModelKind::Random), figure6_seed(6, ModelKind::Bunched));
  EXPECT_FALSE(same_bits(out.at(ModelKind::Random), run_experiment(base)));
}

TEST(Serialization, JsonRespectsSelection) {
  const auto res = run_experiment(small_config({RandomFill{}, 0.1}, 32, 40));
  const auto all = to_json(res);
  EXPECT_TRUE(all.contains("p1_recon"));
  EXPECT_TRUE(all.contains("mean_g2"));
  EXPECT_EQ(all["mean_g2"].size(), 64u);
  EXPECT_EQ(all["mean_g2"][0]["l"], -32);
  const auto some = to_json(res, {true, false, false, false});
  EXPECT_TRUE(some.contains("p1_recon"));
  EXPECT_FALSE(some.contains("p2_recon"));
  EXPECT_FALSE(some.contains("mean_g1"));
  EXPECT_FALSE(some.contains("p1_truth"));
}

TEST(Serialization, PanelCsv) {
  std::ostringstream os;
  const std::vector<double> r{0.0, 0.75}, se{0.0, 0.125}, t{0.0, 0.5};
  const std::vector<std::string> header{"n_sites = 2"};
  write_panel_csv(os, "j", r, se, t, header);
  EXPECT_EQ(os.str(), "# n_sites = 2\nj,recon,se,truth\n0,0,0,0\n1,0.75,0.125,0.5\n");
  EXPECT_THROW(write_panel_csv(os, "j", r, std::vector<double>{0.0}, t), Error);
}
