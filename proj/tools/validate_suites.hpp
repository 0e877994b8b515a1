#pragma once

// Self-check suites run by `latticecorr validate`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "latticecorr/correlations.hpp"
#include "latticecorr/ensemble.hpp"
#include "latticecorr/lattice_model.hpp"
#include "latticecorr/oracle/fock_space.hpp"

namespace latticecorr::tools {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Closed forms against brute-force Fock-space evaluation, every basis state.
inline SuiteResult oracle_suite(std::size_t max_modes = 6) {
  double worst = 0.0;
  std::size_t states = 0;
  for (std::size_t n = 4; n <= max_modes; ++n) {
    const ModeBasis basis = oracle::table_basis(n);
    for (Statistics stats : {Statistics::Boson, Statistics::Fermion}) {
      const oracle::FockSpace space(n, stats);
      for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<std::size_t> pos;
        for (std::size_t j = 0; j < n; ++j)
          if (mask & (1u << j)) pos.push_back(j);
        const FieldState st = FieldState::from(Occupancy::from_positions(n, pos), stats);
        for (std::size_t l = 0; l < n; ++l) {
          const double d = static_cast<double>(l) * basis.slit_quantum();
          worst = std::max(worst, std::abs(g1_of_state(st, basis, d) - space.g1(mask, basis, d)));
        }
        if (pos.size() >= 2) {
          for (std::size_t i = 0; i < basis.coincidence_points(); ++i) {
            const double d = static_cast<double>(basis.coincidence_ell(i)) * basis.coincidence_quantum();
            worst = std::max(worst, std::abs(g2_of_state(st, basis, d) - space.g2(mask, basis, d)));
          }
        }
        ++states;
      }
    }
  }
  return {"operator-oracle equivalence (N = 4..6)", worst < 1e-10,
          std::to_string(states) + " states, max deviation " + fmt(worst)};
}

inline std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng, bool zero_first) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  for (auto& x : p) x = e(rng);
  if (zero_first) p[0] = 0.0;
  return normalized(p);
}

inline SuiteResult roundtrip_suite(std::size_t trials = 20, std::size_t n = 256) {
  std::mt19937_64 rng(20240611);
  const ModeBasis basis(n, 0.5e-6, 3.0e-9);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto p1 = random_distribution(n, rng, false);
    const auto back1 = p1_from_g1(g1_from_p1(p1, basis)).values;
    for (std::size_t j = 0; j < n; ++j) e1 = std::max(e1, std::abs(back1[j] - p1[j]));
    const auto p2 = random_distribution(n, rng, true);
    const std::size_t r = 2 + t % 30;
    const auto back2 = p2_from_g2(g2_from_p2(p2, r, basis), r).values;
    for (std::size_t j = 0; j < n; ++j) e2 = std::max(e2, std::abs(back2[j] - p2[j]));
  }
  return {"transform round trips (N = 256)", e1 < 1e-12 && e2 < 1e-12,
          "p1 max error " + fmt(e1) + ", p2 max error " + fmt(e2)};
}

// Gaussian-statistics relation for independently filled lattices, in the
// form that holds for R atoms on distinct sites, plus consistency of the
// reconstructed pair distribution with the autocorrelation of p1.
inline SuiteResult siegert_suite(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.lattice.n_sites = 64;
  cfg.model = {RandomFill{}, 0.10};
  cfg.lattice.fill_factor = 0.10;
  cfg.runs = 4000;
  cfg.master_seed = seed;
  cfg.workers = 0;
  const auto res = run_experiment(cfg);
  const std::size_t r = res.atom_count;
  const double rr = static_cast<double>(r);
  double a0 = 0.0;
  for (double p : res.p1_truth) a0 += p * p;
  const auto sr = siegert_check_single_occupancy(res.mean_g1_coincidence, res.mean_g2, r, a0);
  double worst_z = 0.0;
  for (std::size_t i = 0; i < sr.residual.size(); ++i) {
    const cplx g = res.mean_g1_coincidence[i];
    const double mag = std::abs(g);
    const double se_g1 = mag > 0.0 ? std::hypot(g.real() * res.se_g1c_re[i], g.imag() * res.se_g1c_im[i]) / mag : 0.0;
    const double se = std::hypot(rr / (rr - 1.0) * res.se_g2[i], 2.0 * mag * se_g1 / (1.0 - a0));
    const double floor = 1.0 / static_cast<double>(res.runs);
    worst_z = std::max(worst_z, std::abs(sr.residual[i]) / std::max(se, floor));
  }
  const auto auto_p2 = drop_zero_separation(autocorrelation_p2(res.p1_truth).normalized);
  const double pair_floor = 1.0 / (static_cast<double>(res.runs) * rr * (rr - 1.0) / 2.0);
  double worst_wk = 0.0;
  for (std::size_t j = 1; j < res.n_sites; ++j)
    worst_wk = std::max(worst_wk, std::abs(res.p2_recon[j] - auto_p2[j]) / std::hypot(res.p2_se[j], pair_floor));
  return {"Siegert relation and autocorrelation consistency (N = 64)", worst_z < 5.0 && worst_wk < 5.0,
          "max |z| Siegert " + fmt(worst_z) + ", autocorrelation " + fmt(worst_wk)};
}

inline SuiteResult washout_suite(std::uint64_t seed, std::size_t n = 64, std::size_t runs = 200) {
  ExperimentConfig fixed;
  fixed.lattice.n_sites = n;
  fixed.lattice.fill_factor = 0.10;
  fixed.runs = runs;
  fixed.workers = 0;
  fixed.master_seed = seed;
  const double tau = 8.0 * fixed.lattice.lattice_const;
  fixed.model = {Bunched{tau, FixedSeed{n / 2}}, 0.10};
  ExperimentConfig random = fixed;
  random.model = {Bunched{tau, RandomSeed{}}, 0.10};
  random.master_seed = derive_seed(seed, 1);

  const auto rf = run_experiment(fixed);
  const auto rr = run_experiment(random);
  const auto peak = static_cast<std::size_t>(
      std::max_element(rf.p1_recon.begin(), rf.p1_recon.end()) - rf.p1_recon.begin());
  const auto u = uniformity_test(rr.shots);
  const auto cmp = compare_distributions(rf.p2_recon, rr.p2_recon);
  const bool ok = (peak + 2 >= n / 2 && peak <= n / 2 + 2) && u.p_value > 0.01 && cmp.cosine_similarity >= 0.9;
  return {"washout (N = 64, 200 runs)", ok,
          "fixed-seed peak at " + std::to_string(peak) + ", uniformity p = " + fmt(u.p_value) +
              ", p2 cosine = " + fmt(cmp.cosine_similarity)};
}

template <class F>
SuiteResult timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult r = f();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace latticecorr::tools
