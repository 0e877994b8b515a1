#pragma once

// Ensemble experiment: sample shots, evaluate per-shot correlation profiles,
// average them, invert the averages and compare with the sampled truth.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "latticecorr/correlations.hpp"
#include "latticecorr/error.hpp"
#include "latticecorr/lattice_model.hpp"
#include "latticecorr/numeric.hpp"
#include "latticecorr/rng.hpp"
#include "latticecorr/wavepacket.hpp"

namespace latticecorr {

struct OutputSelection {
  bool p1_recon = true;
  bool p2_recon = true;
  bool raw_profiles = true;
  bool ground_truth = true;
};

struct ExperimentConfig {
  LatticeConfig lattice;
  DistributionModel model;
  std::size_t runs = 500;
  ExpansionParams expansion = ExpansionParams::from_mass_and_time(2.2069e-25, 1.0);
  std::string species = "cesium";  // empty when the mass was given directly
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;  // 0 = hardware concurrency; never affects results
  OutputSelection outputs;

  void validate() const {
    lattice.validate();
    model.validate(lattice);
    if (runs < 1) throw Error("runs must be at least 1");
    expansion.validate();
    if (model.atoms_per_shot(lattice.n_sites) == 0)
      throw Error("fill_factor gives no atoms per shot");
  }

  ModeBasis basis() const { return ModeBasis(lattice.n_sites, lattice.lattice_const, expansion.l_squared); }
};

struct ExperimentDiagnostics {
  double p1_imaginary_residue = 0.0;
  double p2_imaginary_residue = 0.0;
  double p1_clip_mass = 0.0;  // total negative mass set to zero
  double p2_clip_mass = 0.0;
  double p2_zero_separation_weight = 0.0;
  double p2_edge_residual = 0.0;
};

struct ExperimentResult {
  std::size_t n_sites = 0;
  std::size_t atom_count = 0;
  std::size_t runs = 0;
  std::uint64_t master_seed = 0;
  Statistics statistics = Statistics::Boson;

  std::vector<cplx> mean_g1;  // coherence grid
  std::vector<double> se_g1_re;
  std::vector<double> se_g1_im;
  std::vector<cplx> mean_g1_coincidence;  // g1 on the coincidence grid
  std::vector<double> se_g1c_re;
  std::vector<double> se_g1c_im;
  std::vector<double> mean_g2;            // coincidence grid; empty when R < 2
  std::vector<double> se_g2;

  std::vector<double> p1_recon;  // unit sum
  std::vector<double> p1_se;
  std::vector<double> p2_recon;  // unit sum over j >= 1
  std::vector<double> p2_se;
  std::vector<double> p1_truth;  // empirical, rescaled to unit sum
  std::vector<double> p2_truth;

  ExperimentDiagnostics diagnostics;
  std::vector<Occupancy> shots;
};

namespace detail {

inline constexpr std::size_t runs_per_chunk = 32;

// Partial sums over a fixed block of runs. Occupation and pair counts are
// integers, so their first and second moments are exact.
struct ChunkSums {
  std::vector<CompensatedSum> g1_re, g1_im, g1_re2, g1_im2;
  std::vector<CompensatedSum> g1c_re, g1c_im, g1c_re2, g1c_im2;
  std::vector<CompensatedSum> g2, g2_sq;
  std::vector<std::uint64_t> site_counts;
  std::vector<std::uint64_t> pair_counts, pair_counts_sq;

  ChunkSums(std::size_t n, bool with_g2)
      : g1_re(n), g1_im(n), g1_re2(n), g1_im2(n), g1c_re(2 * n), g1c_im(2 * n),
        g1c_re2(2 * n), g1c_im2(2 * n),
        g2(with_g2 ? 2 * n : 0), g2_sq(with_g2 ? 2 * n : 0), site_counts(n, 0),
        pair_counts(n, 0), pair_counts_sq(n, 0) {}

  void merge(const ChunkSums& o) {
    auto m = [](auto& a, const auto& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i].merge(b[i]);
    };
    m(g1_re, o.g1_re);
    m(g1_im, o.g1_im);
    m(g1_re2, o.g1_re2);
    m(g1_im2, o.g1_im2);
    m(g1c_re, o.g1c_re);
    m(g1c_im, o.g1c_im);
    m(g1c_re2, o.g1c_re2);
    m(g1c_im2, o.g1c_im2);
    m(g2, o.g2);
    m(g2_sq, o.g2_sq);
    for (std::size_t i = 0; i < site_counts.size(); ++i) {
      site_counts[i] += o.site_counts[i];
      pair_counts[i] += o.pair_counts[i];
      pair_counts_sq[i] += o.pair_counts_sq[i];
    }
  }
};

inline double standard_error(double sum, double sum_sq, std::size_t n) {
  if (n < 2) return 0.0;
  const double dn = static_cast<double>(n);
  const double var = std::max(0.0, (sum_sq - sum * sum / dn) / (dn - 1.0));
  return std::sqrt(var / dn);
}

// Negative entries are set to zero; returns the clipped mass.
inline double clip_negative(std::vector<double>& v) {
  double mass = 0.0;
  for (double& x : v)
    if (x < 0.0) {
      mass -= x;
      x = 0.0;
    }
  return mass;
}

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested != 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace detail

// Runs are grouped in fixed chunks whose partial sums are merged in chunk
// order, so the result is bit-identical for any worker count.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const ModeBasis basis = config.basis();
  const std::size_t n = config.lattice.n_sites;
  const std::size_t r = config.model.atoms_per_shot(n);
  const std::size_t runs = config.runs;
  const bool with_g2 = r >= 2;
  const Statistics stats = config.lattice.statistics;

  ExperimentResult res;
  res.n_sites = n;
  res.atom_count = r;
  res.runs = runs;
  res.master_seed = config.master_seed;
  res.statistics = stats;
  res.shots.resize(runs);

  const std::size_t n_chunks = (runs + detail::runs_per_chunk - 1) / detail::runs_per_chunk;
  std::vector<std::optional<detail::ChunkSums>> partial(n_chunks);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::vector<std::pair<std::size_t, std::exception_ptr>> errors(n_chunks, {0, nullptr});

  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      detail::ChunkSums sums(n, with_g2);
      const std::size_t lo = c * detail::runs_per_chunk;
      const std::size_t hi = std::min(runs, lo + detail::runs_per_chunk);
      std::size_t run = lo;
      try {
        for (; run < hi; ++run) {
          Engine rng = make_stream(config.master_seed, run);
          Occupancy shot = sample_occupancy(config.model, config.lattice, rng);
          if (shot.atom_count() != r) throw Error("sampler returned a shot with the wrong atom count");
          const FieldState state = FieldState::from(shot, stats);

          const auto g1 = g1_profile(state, basis);
          for (std::size_t l = 0; l < n; ++l) {
            sums.g1_re[l].add(g1[l].real());
            sums.g1_im[l].add(g1[l].imag());
            sums.g1_re2[l].add(g1[l].real() * g1[l].real());
            sums.g1_im2[l].add(g1[l].imag() * g1[l].imag());
          }
          if (config.outputs.raw_profiles) {
            const auto g1c = g1_coincidence_profile(state, basis);
            for (std::size_t i = 0; i < 2 * n; ++i) {
              sums.g1c_re[i].add(g1c[i].real());
              sums.g1c_im[i].add(g1c[i].imag());
              sums.g1c_re2[i].add(g1c[i].real() * g1c[i].real());
              sums.g1c_im2[i].add(g1c[i].imag() * g1c[i].imag());
            }
          }
          if (with_g2) {
            const auto g2 = g2_profile(state, basis);
            for (std::size_t i = 0; i < 2 * n; ++i) {
              sums.g2[i].add(g2[i]);
              sums.g2_sq[i].add(g2[i] * g2[i]);
            }
            const auto pc = pair_separation_counts(shot);
            for (std::size_t j = 0; j < n; ++j) {
              sums.pair_counts[j] += pc[j];
              sums.pair_counts_sq[j] += pc[j] * pc[j];
            }
          }
          for (std::size_t i = 0; i < n; ++i) sums.site_counts[i] += shot.sites()[i];
          res.shots[run] = std::move(shot);
        }
      } catch (...) {
        errors[c] = {run, std::current_exception()};
        failed.store(true);
        return;
      }
      partial[c].emplace(std::move(sums));
    }
  };

  const std::size_t workers = std::min(detail::resolve_workers(config.workers), n_chunks);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  for (const auto& [run, ep] : errors) {
    if (!ep) continue;
    const std::string where = "run " + std::to_string(run) + ": ";
    try {
      std::rethrow_exception(ep);
    } catch (const InfeasibleModel& e) {
      throw InfeasibleModel(where + e.what());
    } catch (const std::exception& e) {
      throw Error(where + e.what());
    }
  }

  detail::ChunkSums total(n, with_g2);
  for (const auto& p : partial) total.merge(*p);

  const double dr = static_cast<double>(runs);
  res.mean_g1.resize(n);
  res.se_g1_re.resize(n);
  res.se_g1_im.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    res.mean_g1[l] = {total.g1_re[l].value() / dr, total.g1_im[l].value() / dr};
    res.se_g1_re[l] = detail::standard_error(total.g1_re[l].value(), total.g1_re2[l].value(), runs);
    res.se_g1_im[l] = detail::standard_error(total.g1_im[l].value(), total.g1_im2[l].value(), runs);
  }
  if (config.outputs.raw_profiles) {
    res.mean_g1_coincidence.resize(2 * n);
    res.se_g1c_re.resize(2 * n);
    res.se_g1c_im.resize(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
      res.mean_g1_coincidence[i] = {total.g1c_re[i].value() / dr, total.g1c_im[i].value() / dr};
      res.se_g1c_re[i] = detail::standard_error(total.g1c_re[i].value(), total.g1c_re2[i].value(), runs);
      res.se_g1c_im[i] = detail::standard_error(total.g1c_im[i].value(), total.g1c_im2[i].value(), runs);
    }
  }

  // The per-shot reconstructions are n_j / R and c_j / (R (R - 1) / 2)
  // exactly; the inversions are linear, so their shot-to-shot spread gives
  // the standard errors of p1_recon and p2_recon.
  const double rr = static_cast<double>(r);
  const Reconstruction rec1 = p1_from_g1(res.mean_g1);
  res.p1_recon = rec1.values;
  res.diagnostics.p1_imaginary_residue = rec1.max_imaginary_residue;
  res.diagnostics.p1_clip_mass = detail::clip_negative(res.p1_recon);
  res.p1_se.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = static_cast<double>(total.site_counts[i]);
    res.p1_se[i] = detail::standard_error(c / rr, c / (rr * rr), runs);
  }

  if (with_g2) {
    res.mean_g2.resize(2 * n);
    res.se_g2.resize(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
      res.mean_g2[i] = total.g2[i].value() / dr;
      res.se_g2[i] = detail::standard_error(total.g2[i].value(), total.g2_sq[i].value(), runs);
    }
    const Reconstruction rec = p2_from_g2(res.mean_g2, r, stats);
    res.p2_recon = rec.values;
    res.diagnostics.p2_imaginary_residue = rec.max_imaginary_residue;
    res.diagnostics.p2_zero_separation_weight = rec.zero_separation_weight;
    res.diagnostics.p2_edge_residual = rec.edge_residual;
    res.diagnostics.p2_clip_mass = detail::clip_negative(res.p2_recon);
    const double pairs = rr * (rr - 1.0) / 2.0;
    res.p2_se.resize(n);
    for (std::size_t j = 0; j < n; ++j)
      res.p2_se[j] = detail::standard_error(static_cast<double>(total.pair_counts[j]) / pairs,
                                            static_cast<double>(total.pair_counts_sq[j]) / (pairs * pairs),
                                            runs);
  }

  if (config.outputs.ground_truth) {
    res.p1_truth = normalized(empirical_p1(res.shots));
    if (with_g2) res.p2_truth = empirical_p2(res.shots);
  }
  return res;
}

// --- comparisons ---------------------------------------------------------------------

struct DistributionComparison {
  double l1 = 0.0;
  double cosine_similarity = 0.0;
  double max_abs = 0.0;
};

inline DistributionComparison compare_distributions(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("compare_distributions: length mismatch");
  const auto na = normalized(a);
  const auto nb = normalized(b);
  DistributionComparison out;
  CompensatedSum l1, dot, aa, bb;
  for (std::size_t i = 0; i < na.size(); ++i) {
    const double d = na[i] - nb[i];
    l1.add(std::abs(d));
    dot.add(na[i] * nb[i]);
    aa.add(na[i] * na[i]);
    bb.add(nb[i] * nb[i]);
    out.max_abs = std::max(out.max_abs, std::abs(d));
  }
  out.l1 = l1.value();
  out.cosine_similarity = dot.value() / std::sqrt(aa.value() * bb.value());
  return out;
}

// Test of a flat single-atom distribution. Sites are grouped into `blocks`
// contiguous blocks; each shot contributes the fraction of its atoms in each
// block. Atoms in one shot are correlated, so the test uses the shot-level
// covariance (Hotelling T^2 on the first blocks - 1 fractions, which sum with
// the last to one) rather than a multinomial chi-square.
struct UniformityTest {
  double statistic = 0.0;  // T^2
  double f_statistic = 0.0;
  std::size_t dof = 0;     // blocks - 1, less blocks that never vary
  double p_value = 0.0;
};

inline UniformityTest uniformity_test(std::span<const Occupancy> shots, std::size_t blocks = 16) {
  if (shots.empty()) throw Error("uniformity_test: no shots");
  const std::size_t n = shots.front().size();
  if (blocks < 2 || blocks > n) throw Error("uniformity_test: bad block count");
  const std::size_t p = blocks - 1;
  const std::size_t m = shots.size();
  if (m <= p + 1) throw Error("uniformity_test: need more shots than blocks");

  auto block_of = [&](std::size_t site) { return site * blocks / n; };
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(blocks));
  for (std::size_t i = 0; i < n; ++i) expected(static_cast<Eigen::Index>(block_of(i))) += 1.0 / static_cast<double>(n);

  Eigen::MatrixXd y(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
  for (std::size_t s = 0; s < m; ++s) {
    const auto& shot = shots[s];
    if (shot.size() != n) throw Error("uniformity_test: shots of different lattice sizes");
    if (shot.atom_count() == 0) throw Error("uniformity_test: empty shot");
    Eigen::VectorXd frac = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(blocks));
    for (std::size_t site : shot.positions()) frac(static_cast<Eigen::Index>(block_of(site))) += 1.0;
    frac /= static_cast<double>(shot.atom_count());
    y.row(static_cast<Eigen::Index>(s)) = frac.head(static_cast<Eigen::Index>(p)).transpose();
  }
  const Eigen::VectorXd mean = y.colwise().mean().transpose();
  const Eigen::MatrixXd centered = y.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov_all = centered.transpose() * centered / static_cast<double>(m - 1);
  const Eigen::VectorXd diff_all = mean - expected.head(static_cast<Eigen::Index>(p));

  // A block whose fraction never varies either matches the flat value
  // (dropped) or rules the flat distribution out.
  UniformityTest out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(p); ++k) {
    if (cov_all(k, k) > 1e-14) {
      keep.push_back(k);
    } else if (std::abs(diff_all(k)) > 1e-12) {
      out.dof = p;
      out.statistic = out.f_statistic = std::numeric_limits<double>::infinity();
      out.p_value = 0.0;
      return out;
    }
  }
  if (keep.empty()) throw Error("uniformity_test: no block varies between shots");
  const auto q = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd cov(q, q);
  Eigen::VectorXd diff(q);
  for (Eigen::Index a = 0; a < q; ++a) {
    diff(a) = diff_all(keep[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < q; ++b) cov(a, b) = cov_all(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw Error("uniformity_test: singular shot covariance");

  out.dof = keep.size();
  out.statistic = static_cast<double>(m) * diff.dot(ldlt.solve(diff));
  const double dm = static_cast<double>(m), dp = static_cast<double>(q);
  out.f_statistic = (dm - dp) / (dp * (dm - 1.0)) * out.statistic;
  const boost::math::fisher_f dist(dp, dm - dp);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.f_statistic));
  return out;
}

// --- figure suites -------------------------------------------------------------------

struct Figure6Models {
  DistributionModel random;
  DistributionModel bunched;
  DistributionModel antibunched;
  DistributionModel superlattice;
};

// Bunched: tau = 8 w' around the central site; anti-bunched: gap of 4
// sites; super-lattice: period 4 under an envelope of 48 w'.
inline Figure6Models default_figure6_models(const LatticeConfig& lattice, double fill) {
  const double w = lattice.lattice_const;
  Figure6Models m;
  m.random = {RandomFill{}, fill};
  m.bunched = {Bunched{8.0 * w, FixedSeed{lattice.n_sites / 2}}, fill};
  m.antibunched = {AntiBunched{4}, fill};
  m.superlattice = {SuperLattice{4, 48.0 * w}, fill};
  return m;
}

inline std::uint64_t figure6_seed(std::uint64_t master, ModelKind kind) {
  return derive_seed(master, 0x6600 + static_cast<std::uint64_t>(kind));
}

inline std::map<ModelKind, ExperimentResult> figure6_suite(const ExperimentConfig& base,
                                                           const Figure6Models& models) {
  base.validate();
  std::map<ModelKind, ExperimentResult> out;
  for (const DistributionModel* m : {&models.random, &models.bunched, &models.antibunched, &models.superlattice}) {
    ExperimentConfig cfg = base;
    cfg.model = *m;
    cfg.master_seed = figure6_seed(base.master_seed, m->model_kind());
    if (out.contains(m->model_kind())) throw Error("figure6_suite: duplicate model kind");
    out.emplace(m->model_kind(), run_experiment(cfg));
  }
  return out;
}

inline std::map<ModelKind, ExperimentResult> figure6_suite(const ExperimentConfig& base) {
  return figure6_suite(base, default_figure6_models(base.lattice, base.model.target_fill));
}

// --- serialization -------------------------------------------------------------------

inline nlohmann::json to_json(const ExperimentResult& r, const OutputSelection& sel = {}) {
  using nlohmann::json;
  json j;
  j["n_sites"] = r.n_sites;
  j["atom_count"] = r.atom_count;
  j["runs"] = r.runs;
  j["master_seed"] = r.master_seed;
  j["statistics"] = to_string(r.statistics);
  if (sel.raw_profiles) {
    json g1 = json::array();
    for (std::size_t l = 0; l < r.mean_g1.size(); ++l)
      g1.push_back({{"l", l},
                    {"re", r.mean_g1[l].real()},
                    {"im", r.mean_g1[l].imag()},
                    {"se_re", r.se_g1_re[l]},
                    {"se_im", r.se_g1_im[l]}});
    j["mean_g1"] = g1;
    json g2 = json::array();
    for (std::size_t i = 0; i < r.mean_g2.size(); ++i)
      g2.push_back({{"l", static_cast<long long>(i) - static_cast<long long>(r.n_sites)},
                    {"value", r.mean_g2[i]},
                    {"se", r.se_g2[i]}});
    j["mean_g2"] = g2;
  }
  if (sel.p1_recon) {
    j["p1_recon"] = r.p1_recon;
    j["p1_se"] = r.p1_se;
  }
  if (sel.p2_recon && !r.p2_recon.empty()) {
    j["p2_recon"] = r.p2_recon;
    j["p2_se"] = r.p2_se;
  }
  if (sel.ground_truth) {
    j["p1_truth"] = r.p1_truth;
    if (!r.p2_truth.empty()) j["p2_truth"] = r.p2_truth;
  }
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"p1_imaginary_residue", d.p1_imaginary_residue},
                      {"p2_imaginary_residue", d.p2_imaginary_residue},
                      {"p1_clip_mass", d.p1_clip_mass},
                      {"p2_clip_mass", d.p2_clip_mass},
                      {"p2_zero_separation_weight", d.p2_zero_separation_weight},
                      {"p2_edge_residual", d.p2_edge_residual}};
  return j;
}

// Columns: j, p1_recon, p1_se, p1_truth, p2_recon, p2_se, p2_truth.
inline void write_distributions_csv(std::ostream& os, const ExperimentResult& r,
                                    std::span<const std::string> header = {}) {
  for (const auto& h : header) os << "# " << h << '\n';
  os << "j,p1_recon,p1_se,p1_truth,p2_recon,p2_se,p2_truth\n";
  os.precision(17);
  auto at = [](const std::vector<double>& v, std::size_t i) -> std::string {
    if (i >= v.size()) return "";
    std::ostringstream s;
    s.precision(17);
    s << v[i];
    return s.str();
  };
  for (std::size_t j = 0; j < r.n_sites; ++j)
    os << j << ',' << at(r.p1_recon, j) << ',' << at(r.p1_se, j) << ',' << at(r.p1_truth, j) << ','
       << at(r.p2_recon, j) << ',' << at(r.p2_se, j) << ',' << at(r.p2_truth, j) << '\n';
}

// One figure panel: index, reconstruction, standard error, truth.
inline void write_panel_csv(std::ostream& os, std::string_view index_name, std::span<const double> recon,
                            std::span<const double> se, std::span<const double> truth,
                            std::span<const std::string> header = {}) {
  if (recon.size() != se.size() || (!truth.empty() && truth.size() != recon.size()))
    throw Error("write_panel_csv: length mismatch");
  for (const auto& h : header) os << "# " << h << '\n';
  os << index_name << ",recon,se,truth\n";
  os.precision(17);
  for (std::size_t i = 0; i < recon.size(); ++i) {
    os << i << ',' << recon[i] << ',' << se[i] << ',';
    if (!truth.empty()) os << truth[i];
    os << '\n';
  }
}

}  // namespace latticecorr
