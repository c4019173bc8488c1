#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "usrd/errors.hpp"

namespace usrd {

using Pmf = std::vector<double>;
using Matrix = std::vector<std::vector<double>>;  // row-major tables W[x][y], d[x][y]

constexpr double kLn2 = 0.6931471805599453;

inline double log2_safe(double x) { return x > 0.0 ? std::log2(x) : 0.0; }

// Binary entropy in bits; clamped outside (0,1).
inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

inline double entropy_bits(const Pmf& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

inline double sum(const Pmf& p) {
  double s = 0.0;
  for (double v : p) s += v;
  return s;
}

inline void normalize(Pmf& p) {
  double s = sum(p);
  if (s <= 0.0) fail(Errc::PmfNotNormalized, "pmf has zero total mass");
  for (double& v : p) v /= s;
}

inline bool is_pmf(const Pmf& p, double tol) {
  double s = 0.0;
  for (double v : p) {
    if (v < 0.0) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

// Mixed-radix indexing for product alphabets, component 0 most significant.
class JointIndexer {
 public:
  JointIndexer() = default;
  explicit JointIndexer(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    strides_.assign(sizes_.size(), 1);
    for (int i = static_cast<int>(sizes_.size()) - 2; i >= 0; --i)
      strides_[i] = strides_[i + 1] * sizes_[i + 1];
    total_ = sizes_.empty() ? 1 : strides_[0] * sizes_[0];
  }

  int total() const { return total_; }
  int size(int i) const { return sizes_[i]; }
  int rank() const { return static_cast<int>(sizes_.size()); }

  int compose(const std::vector<int>& digits) const {
    int idx = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) idx += digits[i] * strides_[i];
    return idx;
  }

  std::vector<int> decompose(int idx) const {
    std::vector<int> digits(sizes_.size());
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      digits[i] = idx / strides_[i];
      idx %= strides_[i];
    }
    return digits;
  }

  int digit(int idx, int i) const { return (idx / strides_[i]) % sizes_[i]; }

 private:
  std::vector<int> sizes_;
  std::vector<int> strides_;
  int total_ = 1;
};

// splitmix64; used to derive independent per-trial RNG streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace usrd
