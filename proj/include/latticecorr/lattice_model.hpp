#pragma once

// Lattice geometry, single-occupancy shot generation and the probability
// vectors P1 (site occupation) and P2 (pair separation).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "latticecorr/error.hpp"
#include "latticecorr/numeric.hpp"
#include "latticecorr/rng.hpp"

namespace latticecorr {

enum class Statistics { Boson, Fermion };

inline const char* to_string(Statistics s) { return s == Statistics::Boson ? "boson" : "fermion"; }

struct LatticeConfig {
  std::size_t n_sites = 256;
  double lattice_const = 0.5e-6;  // w' in meters
  double fill_factor = 0.10;
  Statistics statistics = Statistics::Boson;

  void validate() const {
    if (n_sites < 2) throw Error("n_sites must be at least 2");
    if (!(lattice_const > 0.0) || !std::isfinite(lattice_const))
      throw Error("lattice_const must be positive");
    if (!(fill_factor >= 0.0 && fill_factor <= 1.0)) throw Error("fill_factor out of range");
  }
};

// Atoms per shot: floor(fill * N). The small slack absorbs products such as
// 0.3 * 10 = 2.9999999999999996.
inline std::size_t atoms_for_fill(double fill, std::size_t n_sites) {
  return static_cast<std::size_t>(std::floor(fill * static_cast<double>(n_sites) + 1e-9));
}

// One shot: at most one atom per site.
class Occupancy {
 public:
  Occupancy() = default;
  explicit Occupancy(std::size_t n_sites) : sites_(n_sites, 0) {}

  explicit Occupancy(std::vector<std::uint8_t> sites) : sites_(std::move(sites)) {
    for (auto& s : sites_) {
      s = s ? 1 : 0;
      count_ += s;
    }
  }

  static Occupancy from_positions(std::size_t n_sites, std::span<const std::size_t> positions) {
    Occupancy occ(n_sites);
    for (std::size_t p : positions) {
      if (p >= n_sites) throw Error("site index out of range");
      occ.set(p);
    }
    return occ;
  }

  std::size_t size() const noexcept { return sites_.size(); }
  std::size_t atom_count() const noexcept { return count_; }
  bool occupied(std::size_t site) const { return sites_.at(site) != 0; }

  void set(std::size_t site) {
    if (!sites_.at(site)) {
      sites_[site] = 1;
      ++count_;
    }
  }

  // Occupied sites in increasing order.
  std::vector<std::size_t> positions() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < sites_.size(); ++i)
      if (sites_[i]) out.push_back(i);
    return out;
  }

  const std::vector<std::uint8_t>& sites() const noexcept { return sites_; }

  friend bool operator==(const Occupancy& a, const Occupancy& b) { return a.sites_ == b.sites_; }

 private:
  std::vector<std::uint8_t> sites_;
  std::size_t count_ = 0;
};

// --- distribution models -----------------------------------------------------

struct FixedSeed {
  std::size_t site = 0;
};
struct RandomSeed {};

struct RandomFill {};

// Cluster around a seed site with a Gaussian conditional density of standard
// deviation tau (meters).
struct Bunched {
  double tau = 4e-6;
  std::variant<FixedSeed, RandomSeed> seed = RandomSeed{};
};

// Uniform placement subject to a minimum pairwise separation (in sites).
struct AntiBunched {
  std::size_t min_gap = 4;
};

// Occupation restricted to sites = 0 (mod period) under a Gaussian envelope of
// standard deviation envelope_width (meters) centred on the lattice.
struct SuperLattice {
  std::size_t period = 4;
  double envelope_width = 24e-6;
};

enum class ModelKind { Random, Bunched, AntiBunched, SuperLattice };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Random: return "random";
    case ModelKind::Bunched: return "bunched";
    case ModelKind::AntiBunched: return "antibunched";
    case ModelKind::SuperLattice: return "superlattice";
  }
  return "unknown";
}

struct DistributionModel {
  std::variant<RandomFill, Bunched, AntiBunched, SuperLattice> kind = RandomFill{};
  double target_fill = 0.10;

  ModelKind model_kind() const { return static_cast<ModelKind>(kind.index()); }

  std::size_t atoms_per_shot(std::size_t n_sites) const { return atoms_for_fill(target_fill, n_sites); }

  void validate(const LatticeConfig& config) const {
    config.validate();
    if (!(target_fill >= 0.0 && target_fill <= 1.0)) throw Error("target_fill out of range");
    const std::size_t n = config.n_sites;
    const std::size_t r = atoms_per_shot(n);
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Bunched>) {
            if (!(m.tau > 0.0)) throw Error("bunched tau must be positive");
            if (const auto* f = std::get_if<FixedSeed>(&m.seed); f && f->site >= n)
              throw Error("bunched seed site outside the lattice");
          } else if constexpr (std::is_same_v<M, AntiBunched>) {
            if (m.min_gap < 1) throw Error("min_gap must be at least 1");
            if (m.min_gap * r > n) throw InfeasibleModel("anti-bunched min_gap * atoms exceeds n_sites");
          } else if constexpr (std::is_same_v<M, SuperLattice>) {
            if (m.period < 2 || 2 * m.period > n)
              throw Error("super-lattice period must satisfy 2 <= period <= n_sites / 2");
            if (!(m.envelope_width > 0.0)) throw Error("super-lattice envelope_width must be positive");
            const std::size_t comb = (n + m.period - 1) / m.period;
            if (comb < r) throw InfeasibleModel("super-lattice has fewer comb sites than atoms");
          }
        },
        kind);
  }
};

namespace detail {

inline std::size_t uniform_index(Engine& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Draw one index with probability proportional to exp(log_w[i]) over indices
// where allowed[i] holds. Returns nullopt when no index is allowed.
inline std::optional<std::size_t> draw_log_weighted(Engine& rng, std::span<const double> log_w,
                                                    std::span<const std::uint8_t> allowed) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_w.size(); ++i)
    if (allowed[i]) top = std::max(top, log_w[i]);
  if (top == -std::numeric_limits<double>::infinity()) return std::nullopt;

  std::vector<double> cumulative(log_w.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    if (allowed[i]) total += std::exp(log_w[i] - top);
    cumulative[i] = total;
  }
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  // The cumulative sum only rises at allowed slots, so the first slot whose
  // cumulative weight exceeds u is allowed.
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it != cumulative.end()) return static_cast<std::size_t>(it - cumulative.begin());
  std::size_t idx = log_w.size();
  while (!allowed[--idx]) {
  }
  return idx;
}

inline Occupancy sample_random(std::size_t n, std::size_t r, Engine& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t j = k + uniform_index(rng, n - k);
    std::swap(idx[k], idx[j]);
  }
  return Occupancy::from_positions(n, std::span(idx).first(r));
}

// Log of the discretized Gaussian kernel around `seed`. Distances are taken on
// the ring (minimum image) so that a randomly placed seed yields a
// translation-invariant mean occupation.
inline std::vector<double> bunched_log_kernel(std::size_t n, double w, double tau, std::size_t seed) {
  std::vector<double> out(n);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t a = m > seed ? m - seed : seed - m;
    const double d = static_cast<double>(std::min(a, n - a)) * w;
    out[m] = -(d * d) / (2.0 * tau * tau);
  }
  return out;
}

inline Occupancy sample_bunched(const Bunched& model, const LatticeConfig& cfg, std::size_t r,
                                Engine& rng) {
  const std::size_t n = cfg.n_sites;
  Occupancy occ(n);
  if (r == 0) return occ;
  const std::size_t seed = std::holds_alternative<FixedSeed>(model.seed)
                               ? std::get<FixedSeed>(model.seed).site
                               : uniform_index(rng, n);
  occ.set(seed);
  const auto log_w = bunched_log_kernel(n, cfg.lattice_const, model.tau, seed);
  std::vector<std::uint8_t> free(n, 1);
  free[seed] = 0;
  // Drawing from the kernel restricted to free sites is the same distribution
  // as drawing from the full kernel and redrawing on collisions.
  while (occ.atom_count() < r) {
    auto pick = draw_log_weighted(rng, log_w, free);
    if (!pick) throw InfeasibleModel("bunched model ran out of free sites");
    occ.set(*pick);
    free[*pick] = 0;
  }
  return occ;
}

// Uniform over all configurations whose pairwise separations are at least
// min_gap. Sorted R-subsets y of {0 .. N - (R-1)(g-1) - 1} map one-to-one onto
// such configurations by x_i = y_i + i (g - 1).
inline Occupancy sample_antibunched(const AntiBunched& model, std::size_t n, std::size_t r,
                                    Engine& rng) {
  Occupancy occ(n);
  if (r == 0) return occ;
  const std::size_t spread = (r - 1) * (model.min_gap - 1);
  if (spread + r > n)
    throw InfeasibleModel("anti-bunched model cannot place " + std::to_string(r) +
                          " atoms with min_gap " + std::to_string(model.min_gap));
  auto compressed = sample_random(n - spread, r, rng).positions();
  for (std::size_t i = 0; i < r; ++i) occ.set(compressed[i] + i * (model.min_gap - 1));
  return occ;
}

inline Occupancy sample_superlattice(const SuperLattice& model, const LatticeConfig& cfg,
                                     std::size_t r, Engine& rng) {
  const std::size_t n = cfg.n_sites;
  const double centre = 0.5 * static_cast<double>(n - 1) * cfg.lattice_const;
  std::vector<double> log_w(n, -std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> allowed(n, 0);
  for (std::size_t m = 0; m < n; m += model.period) {
    const double d = static_cast<double>(m) * cfg.lattice_const - centre;
    log_w[m] = -(d * d) / (2.0 * model.envelope_width * model.envelope_width);
    allowed[m] = 1;
  }
  Occupancy occ(n);
  while (occ.atom_count() < r) {
    auto pick = draw_log_weighted(rng, log_w, allowed);
    if (!pick) throw InfeasibleModel("super-lattice model ran out of comb sites");
    occ.set(*pick);
    allowed[*pick] = 0;
  }
  return occ;
}

}  // namespace detail

// One shot with exactly floor(target_fill * N) atoms.
inline Occupancy sample_occupancy(const DistributionModel& model, const LatticeConfig& config,
                                  Engine& rng) {
  model.validate(config);
  const std::size_t n = config.n_sites;
  const std::size_t r = model.atoms_per_shot(n);
  return std::visit(
      [&](const auto& m) -> Occupancy {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, RandomFill>) {
          return detail::sample_random(n, r, rng);
        } else if constexpr (std::is_same_v<M, Bunched>) {
          return detail::sample_bunched(m, config, r, rng);
        } else if constexpr (std::is_same_v<M, AntiBunched>) {
          return detail::sample_antibunched(m, n, r, rng);
        } else {
          return detail::sample_superlattice(m, config, r, rng);
        }
      },
      model.kind);
}

// --- probability vectors ------------------------------------------------------

enum class P1Normalization {
  PerSite,       // entries are occupation probabilities; sum = expected R
  Distribution,  // entries sum to 1
};

struct ProbabilityVectors {
  std::vector<double> p1;
  std::vector<double> p2;
  std::optional<std::vector<std::vector<double>>> conditional;
  P1Normalization p1_normalization = P1Normalization::PerSite;
};

// Rescale to unit sum. Throws on an all-zero or negative-sum vector.
inline std::vector<double> normalized(std::span<const double> v) {
  const double total = compensated_total(v);
  if (!(total > 0.0)) throw Error("cannot normalize a vector with non-positive sum");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= total;
  return out;
}

inline std::vector<double> empirical_p1(std::span<const Occupancy> shots) {
  if (shots.empty()) throw Error("empirical_p1: empty shot list");
  const std::size_t n = shots.front().size();
  std::vector<std::size_t> counts(n, 0);
  for (const auto& s : shots) {
    if (s.size() != n) throw Error("empirical_p1: shots of different lattice sizes");
    for (std::size_t i = 0; i < n; ++i) counts[i] += s.sites()[i];
  }
  std::vector<double> p1(n);
  for (std::size_t i = 0; i < n; ++i)
    p1[i] = static_cast<double>(counts[i]) / static_cast<double>(shots.size());
  return p1;
}

// Unordered pair counts binned by separation |a - b|, for one shot.
inline std::vector<std::uint64_t> pair_separation_counts(const Occupancy& shot) {
  std::vector<std::uint64_t> counts(shot.size(), 0);
  const auto pos = shot.positions();
  for (std::size_t a = 0; a < pos.size(); ++a)
    for (std::size_t b = a + 1; b < pos.size(); ++b) ++counts[pos[b] - pos[a]];
  return counts;
}

// Pair-separation distribution summed over shots with R >= 2 and normalized
// to unit sum. Bin 0 is identically zero.
inline std::vector<double> empirical_p2(std::span<const Occupancy> shots) {
  if (shots.empty()) throw Error("empirical_p2: empty shot list");
  const std::size_t n = shots.front().size();
  std::vector<std::uint64_t> counts(n, 0);
  std::uint64_t pairs = 0;
  for (const auto& s : shots) {
    if (s.size() != n) throw Error("empirical_p2: shots of different lattice sizes");
    if (s.atom_count() < 2) continue;
    const auto c = pair_separation_counts(s);
    for (std::size_t j = 0; j < n; ++j) counts[j] += c[j];
    pairs += s.atom_count() * (s.atom_count() - 1) / 2;
  }
  if (pairs == 0) throw Error("empirical_p2: no shot contains two atoms");
  std::vector<double> p2(n);
  for (std::size_t j = 0; j < n; ++j)
    p2[j] = static_cast<double>(counts[j]) / static_cast<double>(pairs);
  return p2;
}

// P2_j = sum_l P1_l P(l + j | l) with hard lattice edges.
// conditional[l][m] is the probability of an atom at site m given one at l.
inline std::vector<double> p2_from_bayes(std::span<const double> p1,
                                         const std::vector<std::vector<double>>& conditional) {
  const std::size_t n = p1.size();
  if (conditional.size() != n) throw Error("p2_from_bayes: conditional has wrong number of rows");
  for (const auto& row : conditional) {
    if (row.size() != n) throw Error("p2_from_bayes: conditional row has wrong length");
    if (std::any_of(row.begin(), row.end(), [](double x) { return x < 0.0; }))
      throw Error("p2_from_bayes: negative conditional probability");
    if (std::abs(compensated_total(row) - 1.0) > 1e-9)
      throw Error("p2_from_bayes: conditional row is not a distribution");
  }
  std::vector<double> p2(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    CompensatedSum s;
    for (std::size_t l = 0; l + j < n; ++l) s.add(p1[l] * conditional[l][l + j]);
    p2[j] = s.value();
  }
  return p2;
}

struct AutocorrelationP2 {
  std::vector<double> raw;         // sum_l p1_l p1_{l+j}
  std::vector<double> normalized;  // raw / sum(raw)
  bool degenerate = false;         // all weight at j = 0 (unphysical for single occupancy)
};

// Pair-separation distribution of statistically independent sites.
inline AutocorrelationP2 autocorrelation_p2(std::span<const double> p1) {
  if (std::any_of(p1.begin(), p1.end(), [](double x) { return x < 0.0; }))
    throw Error("autocorrelation_p2: negative probability");
  if (std::all_of(p1.begin(), p1.end(), [](double x) { return x == 0.0; }))
    throw Error("autocorrelation_p2: all-zero p1");
  const std::size_t n = p1.size();
  AutocorrelationP2 out;
  out.raw.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    CompensatedSum s;
    for (std::size_t l = 0; l + j < n; ++l) s.add(p1[l] * p1[l + j]);
    out.raw[j] = s.value();
  }
  out.normalized = normalized(out.raw);
  out.degenerate = std::all_of(out.raw.begin() + 1, out.raw.end(), [](double x) { return x == 0.0; });
  return out;
}

// Separation distribution restricted to physical separations j >= 1.
inline std::vector<double> drop_zero_separation(std::span<const double> p2) {
  std::vector<double> out(p2.begin(), p2.end());
  if (!out.empty()) out[0] = 0.0;
  return normalized(out);
}

// Pair-separation distribution of R atoms placed uniformly without
// replacement: p2_j = 2 (N - j) / (N (N - 1)) for j >= 1.
inline std::vector<double> triangle_baseline(std::size_t n_sites) {
  std::vector<double> out(n_sites, 0.0);
  const double n = static_cast<double>(n_sites);
  for (std::size_t j = 1; j < n_sites; ++j)
    out[j] = 2.0 * (n - static_cast<double>(j)) / (n * (n - 1.0));
  return out;
}

// --- shot archives -------------------------------------------------------------
//
//   N=<n> w=<meters> fill=<f>
//   # optional comment lines (resolved configuration)
//   0010010...
//   ...

struct ShotArchive {
  std::size_t n_sites = 0;
  double lattice_const = 0.0;
  double fill_factor = 0.0;
  std::vector<Occupancy> shots;
};

inline void write_shot_archive(std::ostream& os, const LatticeConfig& config,
                               std::span<const Occupancy> shots,
                               std::span<const std::string> comments = {}) {
  os << "N=" << config.n_sites << " w=" << std::setprecision(17) << config.lattice_const
     << " fill=" << config.fill_factor << '\n';
  for (const auto& c : comments) os << "# " << c << '\n';
  std::string line;
  for (const auto& s : shots) {
    if (s.size() != config.n_sites) throw Error("write_shot_archive: shot size mismatch");
    line.assign(s.size(), '0');
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.sites()[i]) line[i] = '1';
    os << line << '\n';
  }
}

inline ShotArchive read_shot_archive(std::istream& is) {
  ShotArchive out;
  std::string line;
  if (!std::getline(is, line)) throw Error("shot archive: missing header");
  {
    std::istringstream hs(line);
    std::string tok;
    bool have_n = false, have_w = false, have_f = false;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw Error("shot archive: malformed header token '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      try {
        if (key == "N") {
          out.n_sites = std::stoull(val);
          have_n = true;
        } else if (key == "w") {
          out.lattice_const = std::stod(val);
          have_w = true;
        } else if (key == "fill") {
          out.fill_factor = std::stod(val);
          have_f = true;
        } else {
          throw Error("shot archive: unknown header key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw Error("shot archive: bad value for '" + key + "'");
      }
    }
    if (!(have_n && have_w && have_f)) throw Error("shot archive: header needs N, w and fill");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() != out.n_sites)
      throw Error("shot archive: line " + std::to_string(line_no) + " has wrong length");
    std::vector<std::uint8_t> sites(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] != '0' && line[i] != '1')
        throw Error("shot archive: line " + std::to_string(line_no) + " has a non 0/1 character");
      sites[i] = line[i] == '1';
    }
    out.shots.emplace_back(std::move(sites));
  }
  return out;
}

}  // namespace latticecorr
