#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace latticecorr {

// Neumaier compensated sum. The result does not depend on the order in which
// terms of very different magnitude arrive, up to the last ulp.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  void merge(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

class CompensatedComplexSum {
 public:
  void add(std::complex<double> z) noexcept {
    re_.add(z.real());
    im_.add(z.imag());
  }
  void merge(const CompensatedComplexSum& other) noexcept {
    re_.merge(other.re_);
    im_.merge(other.im_);
  }
  std::complex<double> value() const noexcept { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum re_;
  CompensatedSum im_;
};

inline double compensated_total(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

// Unit phasors exp(2 pi i k / period) for k = 0..period-1. Indexing by an
// integer residue keeps DFT kernels exact to one rounding regardless of the
// size of j*l.
class PhaseTable {
 public:
  explicit PhaseTable(std::size_t period) : period_(period), table_(period) {
    for (std::size_t k = 0; k < period; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                           static_cast<double>(period);
      table_[k] = {std::cos(angle), std::sin(angle)};
    }
  }

  std::size_t period() const noexcept { return period_; }

  // exp(2 pi i m / period) for any integer m.
  std::complex<double> operator()(long long m) const noexcept {
    const auto p = static_cast<long long>(period_);
    long long r = m % p;
    if (r < 0) r += p;
    return table_[static_cast<std::size_t>(r)];
  }

  double cos(long long m) const noexcept { return (*this)(m).real(); }

 private:
  std::size_t period_;
  std::vector<std::complex<double>> table_;
};

}  // namespace latticecorr
