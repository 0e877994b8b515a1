#pragma once

// Single-atom sector: far-field free expansion of a local wave function,
// time-of-flight densities of incoherent mixtures, double-well fringes and
// their inversion, and the resolution / timing scales of the detector plane.

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unsupported/Eigen/NonLinearOptimization>
#include <utility>
#include <vector>

#include "latticecorr/constants.hpp"
#include "latticecorr/error.hpp"
#include "latticecorr/lattice_model.hpp"
#include "latticecorr/numeric.hpp"

namespace latticecorr {

using cplx = std::complex<double>;

// L^2 = h (t - t') / M, unreduced Planck constant.
struct ExpansionParams {
  double mass = 0.0;         // kg
  double flight_time = 0.0;  // s
  double l_squared = 0.0;    // m^2

  static ExpansionParams from_mass_and_time(double mass, double flight_time) {
    if (!(mass > 0.0) || !(flight_time > 0.0))
      throw Error("ExpansionParams: mass and flight_time must be positive");
    return {mass, flight_time, constants::planck_h * flight_time / mass};
  }

  // Geometry given directly by L^2 (flight time fixed to 1 s, mass implied).
  static ExpansionParams from_l_squared(double l_squared) {
    if (!(l_squared > 0.0)) throw Error("ExpansionParams: l_squared must be positive");
    return {constants::planck_h / l_squared, 1.0, l_squared};
  }

  void validate() const {
    if (!(l_squared > 0.0)) throw Error("ExpansionParams: l_squared must be positive");
    const double implied = constants::planck_h * flight_time / mass;
    if (!(std::abs(implied - l_squared) <= 1e-12 * l_squared))
      throw Error("ExpansionParams: l_squared inconsistent with mass and flight_time");
  }

  // Width of the detection-plane envelope for a packet of width sigma_prime.
  double envelope_width(double sigma_prime) const {
    return l_squared / (4.0 * std::numbers::pi * sigma_prime);
  }
};

// Uniform grid in the detection plane; u = x / L^2 is the reciprocal coordinate.
struct DetectionGrid {
  double x_start = 0.0;
  double dx = 0.0;
  std::size_t n = 0;
  double l_squared = 0.0;

  double position(std::size_t i) const { return x_start + static_cast<double>(i) * dx; }
  double reciprocal(std::size_t i) const { return position(i) / l_squared; }

  // n points symmetric about 0 covering [-half_width, half_width).
  static DetectionGrid symmetric(double half_width, std::size_t n, double l_squared) {
    if (n < 2 || !(half_width > 0.0)) throw Error("DetectionGrid: bad extent");
    const double dx = 2.0 * half_width / static_cast<double>(n);
    return {-half_width, dx, n, l_squared};
  }
};

// Local wave function sampled on a uniform lattice-plane grid.
struct LocalWavepacket {
  double x_start = 0.0;  // position of amplitudes[0] (m)
  double dx = 0.0;
  std::vector<cplx> amplitudes;
  double center = 0.0;  // x'_i
  double width = 0.0;   // sigma' (standard deviation of |Phi|^2)

  double position(std::size_t i) const { return x_start + static_cast<double>(i) * dx; }

  double norm() const {
    CompensatedSum s;
    for (const auto& a : amplitudes) s.add(std::norm(a));
    return s.value() * dx;
  }

  void validate() const {
    const std::size_t n = amplitudes.size();
    if (n < 2 || (n & (n - 1)) != 0) throw GridError("LocalWavepacket: length must be a power of two");
    if (!(dx > 0.0) || !(width > 0.0)) throw GridError("LocalWavepacket: dx and width must be positive");
    if (std::abs(norm() - 1.0) > 1e-10) throw Error("LocalWavepacket: not normalized");
    const double lo = position(0), hi = position(n - 1);
    if (center - lo < 8.0 * width * (1.0 - 1e-12) || hi - center < 8.0 * width * (1.0 - 1e-12))
      throw GridError("LocalWavepacket: grid must span 8 sigma' on each side of the center");
  }
};

// Grid of n points centred on `center` (sample n/2 sits at the center).
inline LocalWavepacket gaussian_wavepacket(double center, double width, double dx, std::size_t n) {
  LocalWavepacket p;
  p.x_start = center - static_cast<double>(n / 2) * dx;
  p.dx = dx;
  p.center = center;
  p.width = width;
  p.amplitudes.resize(n);
  const double amp = std::pow(2.0 * std::numbers::pi * width * width, -0.25);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = p.position(i) - center;
    p.amplitudes[i] = amp * std::exp(-xi * xi / (4.0 * width * width));
  }
  return p;
}

// Closed-form far-field wave function of gaussian_wavepacket:
//   Psi(x) = sqrt(-i)/L exp[i 2 pi (x^2/2 + x x'_i)/L^2] (8 pi sigma'^2)^(1/4)
//            exp(-4 pi^2 sigma'^2 x^2 / L^4)
inline cplx gaussian_far_field(double x, double center, double width, double l_squared) {
  const double pi = std::numbers::pi;
  const double mag = std::pow(8.0 * pi * width * width, 0.25) / std::sqrt(l_squared) *
                     std::exp(-4.0 * pi * pi * width * width * x * x / (l_squared * l_squared));
  const double phase = -0.25 * pi + 2.0 * pi * (0.5 * x * x + x * center) / l_squared;
  return std::polar(mag, phase);
}

struct FreeExpandOptions {
  std::size_t padding = 4;  // zero-padding factor, power of two
  double max_phase_step = std::numbers::pi / 4.0;
  double far_field_threshold = 0.1;
};

struct ExpandedWavefunction {
  DetectionGrid grid;
  std::vector<cplx> psi;
  double far_field_ratio = 0.0;  // S / d_f = S^2 / L^2
  bool far_field_warning = false;
  double max_quadratic_phase_step = 0.0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Forward DFT Y_k = sum_n x_n exp(-2 pi i k n / M). Planning is serialized;
// execution on private buffers is thread safe.
inline std::vector<cplx> forward_dft(std::vector<cplx> data) {
  const int m = static_cast<int>(data.size());
  std::vector<cplx> out(data.size());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(m, reinterpret_cast<fftw_complex*>(data.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace detail

// Far-field transform of a local wave function to the detection plane,
//   Psi(x) = sqrt(-i)/L exp[i (2 pi/L^2)(x^2/2 + x x'_i)] F[Phi](x/L^2),
// where F[Phi](u) = int Phi(x' + x'_i) exp(-2 pi i u x') dx' is taken about
// the packet center. The detection grid is fixed by the padded DFT:
// dx = L^2 / (M dx').
inline ExpandedWavefunction free_expand(const LocalWavepacket& psi0, const ExpansionParams& params,
                                        const FreeExpandOptions& opts = {}) {
  psi0.validate();
  if (!(params.l_squared > 0.0)) throw Error("free_expand: l_squared must be positive");
  if (opts.padding < 4 || (opts.padding & (opts.padding - 1)) != 0)
    throw GridError("free_expand: padding must be a power of two >= 4");

  const double pi = std::numbers::pi;
  const double l2 = params.l_squared;
  const std::size_t n = psi0.amplitudes.size();
  const std::size_t m = n * opts.padding;
  const double xi0 = psi0.x_start - psi0.center;

  std::vector<cplx> padded(m, cplx{});
  std::copy(psi0.amplitudes.begin(), psi0.amplitudes.end(), padded.begin());
  const auto spectrum = detail::forward_dft(std::move(padded));

  ExpandedWavefunction out;
  const double du = 1.0 / (static_cast<double>(m) * psi0.dx);
  out.grid = {-static_cast<double>(m / 2) * du * l2, du * l2, m, l2};
  out.psi.resize(m);
  const cplx prefactor = std::polar(1.0 / std::sqrt(l2), -0.25 * pi);
  for (std::size_t i = 0; i < m; ++i) {
    const long long mi = static_cast<long long>(i) - static_cast<long long>(m / 2);
    const std::size_t k = static_cast<std::size_t>(mi < 0 ? mi + static_cast<long long>(m) : mi);
    const double u = static_cast<double>(mi) * du;
    const cplx transform = psi0.dx * spectrum[k] * std::polar(1.0, -2.0 * pi * u * xi0);
    const double x = out.grid.position(i);
    const double phase = 2.0 * pi * (0.5 * x * x + x * psi0.center) / l2;
    out.psi[i] = prefactor * std::polar(1.0, phase) * transform;
  }

  double peak = 0.0;
  for (const auto& v : out.psi) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (std::abs(out.psi[i]) <= 1e-6 * peak && std::abs(out.psi[i + 1]) <= 1e-6 * peak) continue;
    const double a = out.grid.position(i), b = out.grid.position(i + 1);
    out.max_quadratic_phase_step =
        std::max(out.max_quadratic_phase_step, std::abs(pi * (b * b - a * a) / l2));
  }
  if (out.max_quadratic_phase_step > opts.max_phase_step)
    throw GridError("free_expand: detection grid too coarse for the quadratic phase (step " +
                    std::to_string(out.max_quadratic_phase_step) + " rad)");

  double amp_peak = 0.0;
  for (const auto& a : psi0.amplitudes) amp_peak = std::max(amp_peak, std::abs(a));
  std::size_t first = n, last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(psi0.amplitudes[i]) > 1e-3 * amp_peak) {
      first = std::min(first, i);
      last = i;
    }
  }
  const double extent = first <= last ? static_cast<double>(last - first) * psi0.dx : 0.0;
  out.far_field_ratio = extent * extent / l2;
  out.far_field_warning = out.far_field_ratio > opts.far_field_threshold;
  return out;
}

struct DensityProfile {
  DetectionGrid grid;
  std::vector<double> values;
};

// n(x) = sum_j p_j (1/L^2) |F[Phi_j](x/L^2)|^2 for an incoherent mixture.
// All components must share the lattice-plane grid spacing and length.
inline DensityProfile tof_density(std::span<const std::pair<double, LocalWavepacket>> components,
                                  const ExpansionParams& params, const FreeExpandOptions& opts = {}) {
  if (components.empty()) throw Error("tof_density: empty component list");
  CompensatedSum total;
  for (const auto& [w, packet] : components) {
    if (w < 0.0) throw Error("tof_density: negative weight");
    total.add(w);
    if (packet.amplitudes.size() != components.front().second.amplitudes.size() ||
        packet.dx != components.front().second.dx)
      throw GridError("tof_density: components must share grid spacing and length");
  }
  if (std::abs(total.value() - 1.0) > 1e-9) throw Error("tof_density: weights must sum to 1");

  DensityProfile out;
  for (const auto& [w, packet] : components) {
    const auto expanded = free_expand(packet, params, opts);
    if (out.values.empty()) {
      out.grid = expanded.grid;
      out.values.assign(expanded.psi.size(), 0.0);
    }
    for (std::size_t i = 0; i < expanded.psi.size(); ++i) out.values[i] += w * std::norm(expanded.psi[i]);
  }
  return out;
}

// --- double well ---------------------------------------------------------------------

struct DoubleWellState {
  double c1 = std::numbers::sqrt2 / 2.0;
  double c2 = std::numbers::sqrt2 / 2.0;
  double phi = 0.0;              // relative phase (rad)
  double well_separation = 0.0;  // delta xi' (m)
  double packet_width = 0.0;     // sigma' (m)

  void validate() const {
    if (c1 < 0.0 || c2 < 0.0) throw Error("DoubleWellState: amplitudes must be non-negative");
    if (std::abs(c1 * c1 + c2 * c2 - 1.0) > 1e-10) throw Error("DoubleWellState: c1^2 + c2^2 != 1");
    if (!(well_separation > 0.0) || !(packet_width > 0.0))
      throw Error("DoubleWellState: separation and width must be positive");
  }

  double contrast() const { return 2.0 * c1 * c2; }

  static DoubleWellState from_contrast(double contrast, double phi, double separation, double width) {
    if (!(contrast >= 0.0 && contrast <= 1.0)) throw Error("DoubleWellState: contrast out of [0, 1]");
    // c1 c2 = contrast / 2 with c1^2 + c2^2 = 1.
    const double s = std::sqrt(1.0 - contrast * contrast);
    DoubleWellState st;
    st.c1 = std::sqrt(0.5 * (1.0 + s));
    st.c2 = std::sqrt(0.5 * (1.0 - s));
    st.phi = phi;
    st.well_separation = separation;
    st.packet_width = width;
    return st;
  }
};

// Fringe spacing d_f = L^2 / delta xi'.
inline double fringe_spacing(const DoubleWellState& state, const ExpansionParams& params) {
  return params.l_squared / state.well_separation;
}

// Psi(x') = c1 Phi0(x' - dxi/2) + exp(i phi) c2 Phi0(x' + dxi/2), normalized,
// on a grid of n points centred at 0.
inline LocalWavepacket double_well_wavepacket(const DoubleWellState& state, double dx, std::size_t n) {
  state.validate();
  LocalWavepacket p;
  p.dx = dx;
  p.center = 0.0;
  p.x_start = -static_cast<double>(n / 2) * dx;
  p.amplitudes.resize(n);
  const double amp = std::pow(2.0 * std::numbers::pi * state.packet_width * state.packet_width, -0.25);
  const double w2 = 4.0 * state.packet_width * state.packet_width;
  const cplx rel = std::polar(state.c2, state.phi);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = p.position(i);
    const double a = x - 0.5 * state.well_separation, b = x + 0.5 * state.well_separation;
    p.amplitudes[i] = amp * (state.c1 * std::exp(-a * a / w2) + rel * std::exp(-b * b / w2));
  }
  const double nrm = std::sqrt(p.norm());
  for (auto& a : p.amplitudes) a /= nrm;
  p.width = state.packet_width;
  return p;
}

// |Psi(x)|^2 = N(x; 0, sigma^2) (1 + 2 c1 c2 cos(2 pi x dxi/L^2 + phi)) / Z,
// sigma = L^2/(4 pi sigma'), Z = 1 + 2 c1 c2 cos(phi) exp(-dxi^2/(8 sigma'^2))
// so that the density has unit integral.
inline std::vector<double> double_well_density(const DoubleWellState& state,
                                               const ExpansionParams& params,
                                               const DetectionGrid& grid) {
  state.validate();
  const double pi = std::numbers::pi;
  const double sigma = params.envelope_width(state.packet_width);
  const double k = 2.0 * pi * state.well_separation / params.l_squared;
  const double c = state.contrast();
  const double z = 1.0 + c * std::cos(state.phi) *
                             std::exp(-state.well_separation * state.well_separation /
                                      (8.0 * state.packet_width * state.packet_width));
  const double env_norm = 1.0 / (std::sqrt(2.0 * pi) * sigma);
  std::vector<double> out(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.position(i);
    out[i] = env_norm * std::exp(-x * x / (2.0 * sigma * sigma)) * (1.0 + c * std::cos(k * x + state.phi)) / z;
  }
  return out;
}

struct FringeFit {
  double contrast = 0.0;             // 2 c1 c2
  std::optional<double> phase;       // phi in [0, 2 pi); empty when contrast vanishes
  double envelope_center = 0.0;      // m
  double envelope_width = 0.0;       // m
  double amplitude = 0.0;
  double rms_residual = 0.0;         // relative to the density maximum
  int iterations = 0;
};

struct FringeFitOptions {
  double max_relative_rms = 1e-3;
  double zero_contrast = 1e-6;
};

namespace detail {

// Model in scaled units t = (x - x0)/s0:
//   A exp(-(x - x0)^2 / (2 s^2)) (1 + a cos(k (x - x0)) - b sin(k (x - x0)))
struct FringeFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  Eigen::VectorXd x;  // scaled positions
  Eigen::VectorXd y;  // scaled density
  double k = 0.0;     // scaled wavenumber

  int inputs() const { return 5; }
  int values() const { return static_cast<int>(x.size()); }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double t = x(i) - p(1);
      const double e = std::exp(-t * t / (2.0 * p(2) * p(2)));
      f(i) = p(0) * e * (1.0 + p(3) * std::cos(k * t) - p(4) * std::sin(k * t)) - y(i);
    }
    return 0;
  }

  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
    const double a = p(0), s = p(2), ca = p(3), sb = p(4);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double t = x(i) - p(1);
      const double e = std::exp(-t * t / (2.0 * s * s));
      const double c = std::cos(k * t), sn = std::sin(k * t);
      const double fr = 1.0 + ca * c - sb * sn;
      jac(i, 0) = e * fr;
      jac(i, 1) = a * e * (t / (s * s) * fr + k * (ca * sn + sb * c));
      jac(i, 2) = a * e * fr * t * t / (s * s * s);
      jac(i, 3) = a * e * c;
      jac(i, 4) = -a * e * sn;
    }
    return 0;
  }
};

}  // namespace detail

// Least-squares fit of the double-well fringe model with known spacing
// L^2/dxi. The initial phase comes from the argument of the density's
// discrete transform at the fringe frequency.
inline FringeFit extract_fringe_params(std::span<const double> density, const DetectionGrid& grid,
                                       const ExpansionParams& params, double delta_xi,
                                       const FringeFitOptions& opts = {}) {
  if (density.size() != grid.n) throw Error("extract_fringe_params: density does not match grid");
  if (grid.n < 8) throw Error("extract_fringe_params: too few samples");
  if (!(delta_xi > 0.0)) throw Error("extract_fringe_params: delta_xi must be positive");
  for (double v : density)
    if (!(v >= 0.0)) throw Error("extract_fringe_params: density must be non-negative");

  const double pi = std::numbers::pi;
  const double k = 2.0 * pi * delta_xi / params.l_squared;

  CompensatedSum tot, first;
  double peak = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    tot.add(density[i]);
    first.add(density[i] * grid.position(i));
    peak = std::max(peak, density[i]);
  }
  if (!(tot.value() > 0.0)) throw Error("extract_fringe_params: empty density");
  const double mean = first.value() / tot.value();
  CompensatedSum second;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double d = grid.position(i) - mean;
    second.add(density[i] * d * d);
  }
  const double s0 = std::sqrt(second.value() / tot.value());

  // Fringe component of the transform at k, with the envelope's own
  // transform removed.
  CompensatedComplexSum z;
  for (std::size_t i = 0; i < grid.n; ++i)
    z.add(density[i] * std::polar(1.0, -k * (grid.position(i) - mean)));
  const cplx fringe = z.value() - tot.value() * std::exp(-0.5 * k * k * s0 * s0);
  const double c0 = std::min(1.0, 2.0 * std::abs(fringe) / tot.value());
  const double phi0 = std::arg(fringe);

  detail::FringeFunctor fn;
  fn.x.resize(static_cast<Eigen::Index>(grid.n));
  fn.y.resize(static_cast<Eigen::Index>(grid.n));
  for (std::size_t i = 0; i < grid.n; ++i) {
    fn.x(static_cast<Eigen::Index>(i)) = grid.position(i) / s0;
    fn.y(static_cast<Eigen::Index>(i)) = density[i] / peak;
  }
  fn.k = k * s0;

  Eigen::VectorXd p(5);
  p << tot.value() * grid.dx / (std::sqrt(2.0 * pi) * s0) / peak, mean / s0, 1.0,
      c0 * std::cos(phi0), c0 * std::sin(phi0);

  Eigen::LevenbergMarquardt<detail::FringeFunctor> lm(fn);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.parameters.maxfev = 4000;
  lm.minimize(p);

  Eigen::VectorXd resid(fn.values());
  fn(p, resid);

  FringeFit fit;
  fit.iterations = static_cast<int>(lm.iter);
  fit.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
  fit.amplitude = p(0) * peak;
  fit.envelope_center = p(1) * s0;
  fit.envelope_width = std::abs(p(2)) * s0;
  fit.contrast = std::hypot(p(3), p(4));
  if (fit.contrast > opts.zero_contrast) {
    double ph = std::atan2(p(4), p(3));
    if (ph < 0.0) ph += 2.0 * pi;
    fit.phase = ph;
  }
  if (fit.rms_residual > opts.max_relative_rms)
    throw ModelMismatch("extract_fringe_params: model mismatch (relative rms residual " +
                        std::to_string(fit.rms_residual) + ")");
  return fit;
}

// --- resolution and timing ------------------------------------------------------------

struct ResolutionFigures {
  double coincidence_period = 0.0;  // Lambda = L^2 / w'
  double envelope_width = 0.0;      // sigma = L^2 / (4 pi sigma')
};

inline ResolutionFigures resolution_figures(const LatticeConfig& config, double sigma_prime,
                                            const ExpansionParams& params) {
  if (!(config.lattice_const > 0.0) || !(sigma_prime > 0.0) || !(params.l_squared > 0.0))
    throw Error("resolution_figures: lengths must be positive");
  return {params.l_squared / config.lattice_const, params.envelope_width(sigma_prime)};
}

// Detector spacing along the fall direction equivalent to a detection delay:
// dx = g t dt.
inline double gravity_delay_map(double flight_time, double g, double delta_t) {
  if (!(flight_time > 0.0)) throw Error("gravity_delay_map: flight_time must be positive");
  return g * flight_time * delta_t;
}

// --- CSV --------------------------------------------------------------------------------

inline void write_wavefunction_csv(std::ostream& os, const DetectionGrid& grid,
                                   std::span<const cplx> values,
                                   std::span<const std::string> header = {}) {
  if (values.size() != grid.n) throw Error("write_wavefunction_csv: size mismatch");
  for (const auto& h : header) os << "# " << h << '\n';
  os << "x,Re,Im,abs2\n";
  os.precision(17);
  for (std::size_t i = 0; i < grid.n; ++i)
    os << grid.position(i) << ',' << values[i].real() << ',' << values[i].imag() << ','
       << std::norm(values[i]) << '\n';
}

// A density is written as the non-negative real amplitude sqrt(n).
inline void write_density_csv(std::ostream& os, const DetectionGrid& grid,
                              std::span<const double> density,
                              std::span<const std::string> header = {}) {
  std::vector<cplx> amp(density.size());
  std::transform(density.begin(), density.end(), amp.begin(),
                 [](double v) { return cplx(std::sqrt(std::max(v, 0.0)), 0.0); });
  write_wavefunction_csv(os, grid, amp, header);
}

}  // namespace latticecorr
