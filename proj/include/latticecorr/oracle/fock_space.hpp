#pragma once

// Brute-force evaluation of detector correlation functions in the full
// single-occupancy Fock space of N modes (dimension 2^N). Used as an
// independent check of the closed forms in correlations.hpp; it shares no
// code with them beyond ModeBasis geometry.
//
// Basis state |n> is indexed by the bitmask with bit j set when mode j is
// occupied. Annihilation never raises an occupation, so the space is closed
// under a_j; creation operators are taken as the adjoint matrices, which is
// exact for expectation values in states with at most one atom per mode.

#include <Eigen/Dense>
#include <bit>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "latticecorr/correlations.hpp"
#include "latticecorr/error.hpp"
#include "latticecorr/lattice_model.hpp"

namespace latticecorr::oracle {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

class FockSpace {
 public:
  FockSpace(std::size_t n_modes, Statistics stats) : n_(n_modes), stats_(stats) {
    if (n_modes == 0 || n_modes > 12) throw Error("FockSpace: 1 <= n_modes <= 12");
    dim_ = std::size_t{1} << n_;
    for (std::size_t j = 0; j < n_; ++j) annihilators_.push_back(build_annihilator(j));
  }

  std::size_t dimension() const noexcept { return dim_; }
  const Matrix& annihilator(std::size_t j) const { return annihilators_.at(j); }

  Vector basis_state(std::uint32_t mask) const {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
    v(mask) = 1.0;
    return v;
  }

  // b(x) = (1/sqrt N) sum_j a_j exp(i k_j x)
  Matrix detector(const ModeBasis& basis, double x) const {
    Matrix b = Matrix::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    for (std::size_t j = 0; j < n_; ++j)
      b += std::polar(1.0, basis.wavenumber(j) * x) * annihilators_[j];
    return b / std::sqrt(static_cast<double>(n_));
  }

  // G1(x1, x2) = <b1^dag b2>
  std::complex<double> first_order(const Vector& psi, const ModeBasis& basis, double x1,
                                   double x2) const {
    const Matrix b1 = detector(basis, x1);
    const Matrix b2 = detector(basis, x2);
    return psi.dot(b1.adjoint() * (b2 * psi));
  }

  // G2(x1, x2; x2, x1) = <b1^dag b2^dag b2 b1>
  std::complex<double> second_order(const Vector& psi, const ModeBasis& basis, double x1,
                                    double x2) const {
    const Matrix b1 = detector(basis, x1);
    const Matrix b2 = detector(basis, x2);
    return psi.dot(b1.adjoint() * (b2.adjoint() * (b2 * (b1 * psi))));
  }

  // Complex degree of coherence with detectors at -d/2 and +d/2.
  std::complex<double> g1(std::uint32_t mask, const ModeBasis& basis, double d) const {
    const Vector psi = basis_state(mask);
    const double x1 = -0.5 * d, x2 = 0.5 * d;
    const double n1 = first_order(psi, basis, x1, x1).real();
    const double n2 = first_order(psi, basis, x2, x2).real();
    return first_order(psi, basis, x1, x2) / std::sqrt(n1 * n2);
  }

  double g2(std::uint32_t mask, const ModeBasis& basis, double d) const {
    const Vector psi = basis_state(mask);
    const double x1 = -0.5 * d, x2 = 0.5 * d;
    const double n1 = first_order(psi, basis, x1, x1).real();
    const double n2 = first_order(psi, basis, x2, x2).real();
    return second_order(psi, basis, x1, x2).real() / (n1 * n2);
  }

 private:
  Matrix build_annihilator(std::size_t j) const {
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    const std::uint32_t bit = 1u << j;
    for (std::uint32_t m = 0; m < dim_; ++m) {
      if (!(m & bit)) continue;
      double amp = 1.0;
      if (stats_ == Statistics::Fermion) {
        // Jordan-Wigner string over the modes ordered before j.
        const int before = std::popcount(m & (bit - 1));
        amp = (before % 2) ? -1.0 : 1.0;
      }
      a(m & ~bit, m) = amp;
    }
    return a;
  }

  std::size_t n_;
  Statistics stats_;
  std::size_t dim_ = 0;
  std::vector<Matrix> annihilators_;
};

inline std::uint32_t mask_of(const Occupancy& occ) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < occ.size(); ++i)
    if (occ.occupied(i)) m |= 1u << i;
  return m;
}

inline std::string bits_of(std::uint32_t mask, std::size_t n) {
  std::string s(n, '0');
  for (std::size_t i = 0; i < n; ++i)
    if (mask & (1u << i)) s[i] = '1';
  return s;
}

// --- plain-text Fock tables ------------------------------------------------------
//
//   # fock-table N=<n>
//   <statistics> <occupation bits> g1 <l> <re> <im>
//   <statistics> <occupation bits> g2 <l> <value>
//
// g1 rows use the coherence grid (l = 0..N-1), g2 rows the coincidence grid
// (l = -N..N-1). Rows are emitted for every state where the quantity exists.

struct FockTableRow {
  Statistics statistics = Statistics::Boson;
  std::uint32_t mask = 0;
  bool is_g1 = true;
  long long ell = 0;
  std::complex<double> value;
};

struct FockTable {
  std::size_t n_modes = 0;
  std::vector<FockTableRow> rows;
};

// Dimensionless geometry used by the tables: w' = 1, L^2 = N (so dk = 2 pi / N).
inline ModeBasis table_basis(std::size_t n) { return ModeBasis(n, 1.0, static_cast<double>(n)); }

inline FockTable build_fock_table(std::size_t n) {
  FockTable t;
  t.n_modes = n;
  const ModeBasis basis = table_basis(n);
  for (Statistics stats : {Statistics::Boson, Statistics::Fermion}) {
    const FockSpace space(n, stats);
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      for (std::size_t l = 0; l < n; ++l) {
        const double d = static_cast<double>(l) * basis.slit_quantum();
        t.rows.push_back({stats, mask, true, static_cast<long long>(l), space.g1(mask, basis, d)});
      }
      if (std::popcount(mask) < 2) continue;
      for (std::size_t i = 0; i < basis.coincidence_points(); ++i) {
        const long long l = basis.coincidence_ell(i);
        const double d = static_cast<double>(l) * basis.coincidence_quantum();
        t.rows.push_back({stats, mask, false, l, space.g2(mask, basis, d)});
      }
    }
  }
  return t;
}

inline void write_fock_table(std::ostream& os, const FockTable& t) {
  os << "# fock-table N=" << t.n_modes << '\n';
  os << std::setprecision(17);
  for (const auto& r : t.rows) {
    os << to_string(r.statistics) << ' ' << bits_of(r.mask, t.n_modes) << ' ';
    if (r.is_g1)
      os << "g1 " << r.ell << ' ' << r.value.real() << ' ' << r.value.imag() << '\n';
    else
      os << "g2 " << r.ell << ' ' << r.value.real() << '\n';
  }
}

inline FockTable read_fock_table(std::istream& is) {
  FockTable t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# fock-table N=", 0) != 0)
    throw Error("fock table: missing header");
  t.n_modes = std::stoul(line.substr(15));
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string stats, bits, kind;
    FockTableRow row;
    ls >> stats >> bits >> kind >> row.ell;
    if (!ls || bits.size() != t.n_modes) throw Error("fock table: malformed row '" + line + "'");
    row.statistics = stats == "fermion" ? Statistics::Fermion : Statistics::Boson;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i] == '1') row.mask |= 1u << i;
    row.is_g1 = kind == "g1";
    double re = 0.0, im = 0.0;
    ls >> re;
    if (row.is_g1) ls >> im;
    if (!ls) throw Error("fock table: malformed value in '" + line + "'");
    row.value = {re, im};
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace latticecorr::oracle
