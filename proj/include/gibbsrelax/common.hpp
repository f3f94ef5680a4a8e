#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gibbsrelax {

// Thrown on malformed models, dimension mismatches, out-of-domain arguments.
class invalid_input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when an operation would exceed an enumeration or memory cap.
class size_limit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Neumaier-compensated accumulator; add order is the caller's iteration order.
class CompensatedSum {
 public:
  void add(double x) {
    double t = s_ + x;
    if (std::abs(s_) >= std::abs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

// log(sum_i exp(v_i)) with max shift; empty input -> -inf.
inline double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  CompensatedSum acc;
  for (double x : v) acc.add(std::exp(x - m));
  return m + std::log(acc.value());
}

inline std::uint64_t ipow(std::uint64_t base, unsigned exp) {
  std::uint64_t r = 1;
  for (unsigned i = 0; i < exp; ++i) {
    if (base != 0 && r > std::numeric_limits<std::uint64_t>::max() / base)
      throw size_limit_error("ipow: overflow");
    r *= base;
  }
  return r;
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

inline std::uint64_t binom_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * std::uint64_t(n - k + i) / std::uint64_t(i);
  return r;
}

inline double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= double(i);
  return r;
}

// First k-combination of {0..n-1} in lexicographic order.
inline std::vector<int> first_combination(int k) {
  std::vector<int> c(k);
  for (int i = 0; i < k; ++i) c[i] = i;
  return c;
}

// Advances c to the next k-combination of {0..n-1}; false when exhausted.
inline bool next_combination(std::vector<int>& c, int n) {
  int k = int(c.size());
  for (int i = k - 1; i >= 0; --i) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

inline std::uint64_t mask_of(const std::vector<int>& verts) {
  std::uint64_t m = 0;
  for (int v : verts) m |= std::uint64_t(1) << v;
  return m;
}

inline std::vector<int> verts_of_mask(std::uint64_t m) {
  std::vector<int> v;
  for (int i = 0; m != 0; ++i, m >>= 1)
    if (m & 1) v.push_back(i);
  return v;
}

// Default ceiling on q^n exact enumeration; GIBBSRELAX_CAP overrides.
inline std::uint64_t& enumeration_cap_ref() {
  static std::uint64_t cap = [] {
    std::uint64_t c = std::uint64_t(1) << 24;
    if (const char* e = std::getenv("GIBBSRELAX_CAP")) {
      char* end = nullptr;
      unsigned long long v = std::strtoull(e, &end, 10);
      if (end != e && v > 0) c = v;
    }
    return c;
  }();
  return cap;
}

inline std::uint64_t enumeration_cap() { return enumeration_cap_ref(); }
inline void set_enumeration_cap(std::uint64_t cap) { enumeration_cap_ref() = cap; }

// Checked q^n with cap enforcement; the cap bounds every exact oracle.
inline std::uint64_t checked_state_count(int q, int n) {
  if (q < 2) throw invalid_input_error("alphabet size must be >= 2");
  if (n < 1) throw invalid_input_error("vertex count must be >= 1");
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) {
    if (total > enumeration_cap() / std::uint64_t(q))
      throw size_limit_error("q^n exceeds enumeration cap " + std::to_string(enumeration_cap()));
    total *= std::uint64_t(q);
  }
  if (total > enumeration_cap())
    throw size_limit_error("q^n exceeds enumeration cap " + std::to_string(enumeration_cap()));
  return total;
}

}  // namespace gibbsrelax
