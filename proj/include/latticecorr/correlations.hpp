#pragma once

// First- and second-order same-time correlations of the detected atomic field
// for single-occupancy Fock states, and the discrete transform pairs that
// link them to the site (P1) and pair-separation (P2) distributions.
//
// Separation grids:
//   coherence grid   x2 - x1 = l dx,  l = 0..N-1,   dk dx  = 2 pi / N
//   coincidence grid x2 - x1 = l dx2, l = -N..N-1,  dk dx2 = pi / N
// Profiles on the coincidence grid are stored at index l + N.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "latticecorr/error.hpp"
#include "latticecorr/lattice_model.hpp"
#include "latticecorr/numeric.hpp"

namespace latticecorr {

using cplx = std::complex<double>;

class ModeBasis {
 public:
  // Plane-wave modes k_j = j * 2 pi w' / L^2 for sites j = 0..N-1.
  ModeBasis(std::size_t n_modes, double lattice_const, double l_squared)
      : n_(n_modes), lattice_const_(lattice_const), l_squared_(l_squared) {
    if (n_modes < 2) throw Error("ModeBasis: need at least two modes");
    if (!(lattice_const > 0.0) || !(l_squared > 0.0))
      throw Error("ModeBasis: lattice_const and l_squared must be positive");
    delta_k_ = 2.0 * std::numbers::pi * lattice_const / l_squared;
    slit_ = 2.0 * std::numbers::pi / (static_cast<double>(n_) * delta_k_);
    slit2_ = 0.5 * slit_;
  }

  std::size_t n_modes() const noexcept { return n_; }
  double lattice_const() const noexcept { return lattice_const_; }
  double l_squared() const noexcept { return l_squared_; }
  double delta_k() const noexcept { return delta_k_; }
  double wavenumber(std::size_t j) const noexcept { return static_cast<double>(j) * delta_k_; }
  double slit_quantum() const noexcept { return slit_; }        // dx
  double coincidence_quantum() const noexcept { return slit2_; }  // dx2

  std::size_t coherence_points() const noexcept { return n_; }
  std::size_t coincidence_points() const noexcept { return 2 * n_; }
  long long coincidence_ell(std::size_t index) const noexcept {
    return static_cast<long long>(index) - static_cast<long long>(n_);
  }

 private:
  std::size_t n_;
  double lattice_const_;
  double l_squared_;
  double delta_k_ = 0.0;
  double slit_ = 0.0;
  double slit2_ = 0.0;
};

// Fock state with one atom in mode j for every occupied site j.
struct FieldState {
  std::vector<std::size_t> modes;  // occupied modes, increasing
  std::size_t n_modes = 0;
  Statistics statistics = Statistics::Boson;

  static FieldState from(const Occupancy& shot, Statistics stats) {
    return FieldState{shot.positions(), shot.size(), stats};
  }
  std::size_t atom_count() const noexcept { return modes.size(); }
};

struct CorrelationProfile {
  std::vector<cplx> g1;          // coherence grid, l = 0..N-1
  std::vector<double> g2;        // coincidence grid, index l + N
  std::vector<double> visibility;  // |g1|
};

// --- single-state correlation functions --------------------------------------

// Complex degree of coherence for detectors separated by `separation` meters.
inline cplx g1_of_state(const FieldState& state, const ModeBasis& basis, double separation) {
  if (state.atom_count() == 0) throw Error("g1_of_state: empty field");
  CompensatedComplexSum s;
  for (std::size_t j : state.modes) s.add(std::polar(1.0, basis.wavenumber(j) * separation));
  return s.value() / static_cast<double>(state.atom_count());
}

// Separation histogram of the occupied modes: counts[d] = #{pairs with |j - j'| = d}.
inline std::vector<std::size_t> mode_pair_counts(const FieldState& state) {
  std::vector<std::size_t> counts(state.n_modes, 0);
  const auto& m = state.modes;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t b = a + 1; b < m.size(); ++b) ++counts[m[b] - m[a]];
  return counts;
}

// Normalized coincidence rate for detectors separated by `separation` meters:
//   g2 = (1/R^2) sum_{j != j'} [1 +- cos((k_j - k_j') (x2 - x1))]
inline double g2_of_state(const FieldState& state, const ModeBasis& basis, double separation) {
  const std::size_t r = state.atom_count();
  if (r < 2) throw Error("g2_of_state: need two atoms for coincidences");
  const double sign = state.statistics == Statistics::Boson ? 1.0 : -1.0;
  const auto counts = mode_pair_counts(state);
  CompensatedSum interference;
  for (std::size_t d = 1; d < counts.size(); ++d)
    if (counts[d]) interference.add(static_cast<double>(counts[d]) *
                                    std::cos(static_cast<double>(d) * basis.delta_k() * separation));
  const double rr = static_cast<double>(r);
  return (rr * (rr - 1.0) + 2.0 * sign * interference.value()) / (rr * rr);
}

// g1 at l dx for l = 0..N-1, using exact integer phase reduction.
inline std::vector<cplx> g1_profile(const FieldState& state, const ModeBasis& basis) {
  if (state.atom_count() == 0) throw Error("g1_of_state: empty field");
  const std::size_t n = basis.n_modes();
  const PhaseTable phase(n);
  std::vector<cplx> out(n);
  const double inv_r = 1.0 / static_cast<double>(state.atom_count());
  for (std::size_t l = 0; l < n; ++l) {
    CompensatedComplexSum s;
    for (std::size_t j : state.modes)
      s.add(phase(static_cast<long long>(j) * static_cast<long long>(l)));
    out[l] = s.value() * inv_r;
  }
  return out;
}

// g1 re-evaluated on the coincidence grid (l dx2, l = -N..N-1).
inline std::vector<cplx> g1_coincidence_profile(const FieldState& state, const ModeBasis& basis) {
  if (state.atom_count() == 0) throw Error("g1_of_state: empty field");
  const std::size_t n = basis.n_modes();
  const PhaseTable phase(2 * n);
  std::vector<cplx> out(2 * n);
  const double inv_r = 1.0 / static_cast<double>(state.atom_count());
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const long long l = basis.coincidence_ell(i);
    CompensatedComplexSum s;
    for (std::size_t j : state.modes) s.add(phase(static_cast<long long>(j) * l));
    out[i] = s.value() * inv_r;
  }
  return out;
}

// g2 at l dx2 for l = -N..N-1.
inline std::vector<double> g2_profile(const FieldState& state, const ModeBasis& basis) {
  const std::size_t r = state.atom_count();
  if (r < 2) throw Error("g2_of_state: need two atoms for coincidences");
  const std::size_t n = basis.n_modes();
  const PhaseTable phase(2 * n);
  const double sign = state.statistics == Statistics::Boson ? 1.0 : -1.0;
  const auto counts = mode_pair_counts(state);
  std::vector<std::size_t> seps;
  for (std::size_t d = 1; d < counts.size(); ++d)
    if (counts[d]) seps.push_back(d);
  const double rr = static_cast<double>(r);
  std::vector<double> out(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const long long l = basis.coincidence_ell(i);
    CompensatedSum interference;
    for (std::size_t d : seps)
      interference.add(static_cast<double>(counts[d]) * phase.cos(static_cast<long long>(d) * l));
    out[i] = (rr * (rr - 1.0) + 2.0 * sign * interference.value()) / (rr * rr);
  }
  return out;
}

inline CorrelationProfile correlation_profile(const FieldState& state, const ModeBasis& basis) {
  CorrelationProfile p;
  p.g1 = g1_profile(state, basis);
  p.visibility.resize(p.g1.size());
  std::transform(p.g1.begin(), p.g1.end(), p.visibility.begin(), [](cplx z) { return std::abs(z); });
  if (state.atom_count() >= 2) p.g2 = g2_profile(state, basis);
  return p;
}

// --- transform pairs -----------------------------------------------------------

struct Reconstruction {
  std::vector<double> values;
  double max_imaginary_residue = 0.0;  // discarded imaginary part
  bool unphysical_zero_separation = false;  // P2 weight at j = 0
  double zero_separation_weight = 0.0;
  double edge_residual = 0.0;  // |component at j = -N| of the symmetric extension
};

namespace detail {
inline void require_normalized(std::span<const double> p, const char* who) {
  if (std::any_of(p.begin(), p.end(), [](double x) { return x < 0.0 || !std::isfinite(x); }))
    throw Error(std::string(who) + ": negative or non-finite probability");
  if (std::abs(compensated_total(p) - 1.0) > 1e-9)
    throw Error(std::string(who) + ": distribution is not normalized");
}
}  // namespace detail

// g1_l = sum_j p1_j exp(i 2 pi j l / N), l = 0..N-1.
inline std::vector<cplx> g1_from_p1(std::span<const double> p1, const ModeBasis& basis) {
  const std::size_t n = basis.n_modes();
  if (p1.size() != n) throw Error("g1_from_p1: length does not match the mode basis");
  detail::require_normalized(p1, "g1_from_p1");
  const PhaseTable phase(n);
  std::vector<cplx> g1(n);
  for (std::size_t l = 0; l < n; ++l) {
    CompensatedComplexSum s;
    for (std::size_t j = 0; j < n; ++j)
      if (p1[j] != 0.0) s.add(p1[j] * phase(static_cast<long long>(j * l)));
    g1[l] = s.value();
  }
  return g1;
}

// Same sum, evaluated on the coincidence grid (phase pi j l / N).
inline std::vector<cplx> g1_from_p1_coincidence(std::span<const double> p1, const ModeBasis& basis) {
  const std::size_t n = basis.n_modes();
  if (p1.size() != n) throw Error("g1_from_p1: length does not match the mode basis");
  detail::require_normalized(p1, "g1_from_p1");
  const PhaseTable phase(2 * n);
  std::vector<cplx> g1(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const long long l = basis.coincidence_ell(i);
    CompensatedComplexSum s;
    for (std::size_t j = 0; j < n; ++j)
      if (p1[j] != 0.0) s.add(p1[j] * phase(static_cast<long long>(j) * l));
    g1[i] = s.value();
  }
  return g1;
}

// p1_j = (1/N) sum_l g1_l exp(-i 2 pi j l / N).
inline Reconstruction p1_from_g1(std::span<const cplx> g1) {
  const std::size_t n = g1.size();
  if (n < 2) throw Error("p1_from_g1: need at least two samples");
  const PhaseTable phase(n);
  Reconstruction out;
  out.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    CompensatedComplexSum s;
    for (std::size_t l = 0; l < n; ++l) s.add(g1[l] * phase(-static_cast<long long>(j * l)));
    const cplx p = s.value() / static_cast<double>(n);
    out.values[j] = p.real();
    out.max_imaginary_residue = std::max(out.max_imaginary_residue, std::abs(p.imag()));
  }
  if (out.max_imaginary_residue > 1e-6) throw Error("p1_from_g1: inconsistent g1 samples");
  return out;
}

// (R/(R-1)) g2 - 1; the quantity that is a pure cosine series in P2.
inline double normalized_coincidence(double g2, std::size_t r) {
  const double rr = static_cast<double>(r);
  return rr / (rr - 1.0) * g2 - 1.0;
}

// Exchange-sign map (g2 - 1) -> -(g2 - 1).
inline std::vector<double> fermion_transform(std::span<const double> g2) {
  std::vector<double> out(g2.size());
  std::transform(g2.begin(), g2.end(), out.begin(), [](double g) { return 2.0 - g; });
  return out;
}

// Exchange-sign map applied to the normalized coincidence rate of R atoms:
// (R/(R-1)) g2 - 1 -> -((R/(R-1)) g2 - 1), i.e. g2 -> 2 (R-1)/R - g2.
// Tends to fermion_transform(g2) as R grows.
inline std::vector<double> fermion_transform(std::span<const double> g2, std::size_t atom_count) {
  if (atom_count < 2) throw Error("fermion_transform: need at least two atoms");
  const double rr = static_cast<double>(atom_count);
  const double level = 2.0 * (rr - 1.0) / rr;
  std::vector<double> out(g2.size());
  std::transform(g2.begin(), g2.end(), out.begin(), [level](double g) { return level - g; });
  return out;
}

// g2 on the coincidence grid from the pair-separation distribution:
//   (R/(R-1)) g2_l - 1 = sum_j p2_j cos(pi j l / N)
inline std::vector<double> g2_from_p2(std::span<const double> p2, std::size_t atom_count,
                                      const ModeBasis& basis,
                                      Statistics stats = Statistics::Boson) {
  const std::size_t n = basis.n_modes();
  if (p2.size() != n) throw Error("g2_from_p2: length does not match the mode basis");
  if (atom_count < 2) throw Error("g2_from_p2: need at least two atoms");
  if (p2[0] != 0.0) throw Error("g2_from_p2: p2_0 must vanish for single occupancy");
  detail::require_normalized(p2, "g2_from_p2");
  const PhaseTable phase(2 * n);
  const double rr = static_cast<double>(atom_count);
  const double scale = (rr - 1.0) / rr;
  std::vector<double> g2(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const long long l = basis.coincidence_ell(i);
    CompensatedSum s;
    for (std::size_t j = 1; j < n; ++j)
      if (p2[j] != 0.0) s.add(p2[j] * phase.cos(static_cast<long long>(j) * l));
    g2[i] = scale * (1.0 + s.value());
  }
  if (stats == Statistics::Fermion) return fermion_transform(g2, atom_count);
  return g2;
}

// Inverse of g2_from_p2 by the 2N-point transform of the even extension
// q_0 = p2_0, q_{+-j} = p2_j / 2, q_{-N} = 0.
inline Reconstruction p2_from_g2(std::span<const double> g2, std::size_t atom_count,
                                 Statistics stats = Statistics::Boson) {
  if (g2.size() < 4 || g2.size() % 2 != 0)
    throw Error("p2_from_g2: need 2N samples on the coincidence grid");
  if (atom_count < 2) throw Error("p2_from_g2: need at least two atoms");
  const std::size_t n = g2.size() / 2;
  for (std::size_t l = 1; l < n; ++l)
    if (std::abs(g2[n + l] - g2[n - l]) > 1e-8) throw Error("p2_from_g2: asymmetric g2 input");

  std::vector<double> boson(g2.begin(), g2.end());
  if (stats == Statistics::Fermion) boson = fermion_transform(g2, atom_count);

  std::vector<double> h(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) h[i] = normalized_coincidence(boson[i], atom_count);

  const PhaseTable phase(2 * n);
  auto q = [&](long long j) {
    CompensatedComplexSum s;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      const long long l = static_cast<long long>(i) - static_cast<long long>(n);
      s.add(h[i] * phase(-j * l));
    }
    return s.value() / static_cast<double>(2 * n);
  };

  Reconstruction out;
  out.values.assign(n, 0.0);
  const cplx q0 = q(0);
  out.values[0] = q0.real();
  out.max_imaginary_residue = std::abs(q0.imag());
  for (std::size_t j = 1; j < n; ++j) {
    const cplx plus = q(static_cast<long long>(j));
    const cplx minus = q(-static_cast<long long>(j));
    out.values[j] = plus.real() + minus.real();
    out.max_imaginary_residue =
        std::max({out.max_imaginary_residue, std::abs(plus.imag()), std::abs(minus.imag())});
  }
  out.edge_residual = std::abs(q(-static_cast<long long>(n)));
  out.zero_separation_weight = out.values[0];
  out.unphysical_zero_separation = std::abs(out.values[0]) > 1e-9;
  return out;
}

// --- Gaussian-statistics relations -----------------------------------------------

struct SiegertResidual {
  std::vector<double> residual;
  double max_abs = 0.0;
};

// residual_l = g2_l - 1 - |g1_l|^2 on a common grid.
inline SiegertResidual siegert_check(std::span<const cplx> g1, std::span<const double> g2) {
  if (g1.size() != g2.size())
    throw Error("siegert_check: g1 and g2 are not on a common grid (re-evaluate g1 on the g2 grid)");
  SiegertResidual out;
  out.residual.resize(g2.size());
  for (std::size_t i = 0; i < g2.size(); ++i) {
    out.residual[i] = g2[i] - 1.0 - std::norm(g1[i]);
    out.max_abs = std::max(out.max_abs, std::abs(out.residual[i]));
  }
  return out;
}

// Siegert relation for R atoms on distinct sites with pairs drawn from
// p1 x p1 restricted to distinct sites:
//   (R/(R-1)) g2 - 1 = (|g1|^2 - A0) / (1 - A0),   A0 = sum_j p1_j^2.
// Reduces to siegert_check as R and N grow.
inline SiegertResidual siegert_check_single_occupancy(std::span<const cplx> g1,
                                                      std::span<const double> g2,
                                                      std::size_t atom_count, double self_overlap) {
  if (g1.size() != g2.size()) throw Error("siegert_check: g1 and g2 are not on a common grid");
  if (atom_count < 2) throw Error("siegert_check: need at least two atoms");
  if (!(self_overlap >= 0.0 && self_overlap < 1.0))
    throw Error("siegert_check: self overlap must lie in [0, 1)");
  SiegertResidual out;
  out.residual.resize(g2.size());
  for (std::size_t i = 0; i < g2.size(); ++i) {
    const double predicted = (std::norm(g1[i]) - self_overlap) / (1.0 - self_overlap);
    out.residual[i] = normalized_coincidence(g2[i], atom_count) - predicted;
    out.max_abs = std::max(out.max_abs, std::abs(out.residual[i]));
  }
  return out;
}

// --- CSV -------------------------------------------------------------------------

// Columns: l, separation_m, Re g1, Im g1, V, g2. g1 columns are filled on the
// coherence grid (l >= 0); the g2 column on the coincidence grid.
inline void write_profile_csv(std::ostream& os, const CorrelationProfile& p, const ModeBasis& basis,
                              std::span<const std::string> header = {}) {
  for (const auto& h : header) os << "# " << h << '\n';
  os << "grid,l,separation_m,re_g1,im_g1,V,g2\n";
  os.precision(17);
  for (std::size_t l = 0; l < p.g1.size(); ++l)
    os << "coherence," << l << ',' << static_cast<double>(l) * basis.slit_quantum() << ','
       << p.g1[l].real() << ',' << p.g1[l].imag() << ',' << p.visibility[l] << ",\n";
  for (std::size_t i = 0; i < p.g2.size(); ++i) {
    const long long l = basis.coincidence_ell(i);
    os << "coincidence," << l << ',' << static_cast<double>(l) * basis.coincidence_quantum()
       << ",,,," << p.g2[i] << '\n';
  }
}

}  // namespace latticecorr
