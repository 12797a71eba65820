#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace starvol {

inline constexpr double kPi = 3.14159265358979323846;

// Largest base-manifold dimension handled by the fixed-size vector type.
inline constexpr std::size_t kMaxDim = 8;

// ---- errors -----------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Expression text that does not parse; carries the byte offset of the fault.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Evaluation hit a mathematical domain fault (log of a nonpositive value, ...).
class DomainFault : public Error {
 public:
  DomainFault(const std::string& what, std::size_t offset)
      : Error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Two star bodies built over different grids were combined.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

// Non-convergence, drift budget exceeded, singular Jacobian (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Model/dimension combination or feature outside the supported set.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// A declared invariant failed an audit (homogeneity, positivity, symmetry).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// ---- small fixed-capacity vector ---------------------------------------------
//
// Coordinates of base points, momenta and tangent vectors. Capacity kMaxDim
// keeps hot loops allocation-free; tori up to dimension kMaxDim and the
// 3-dimensional ambient coordinates of sphere models all fit.

struct Vec {
  std::array<double, kMaxDim> a{};
  std::uint32_t n = 0;

  Vec() = default;
  Vec(std::initializer_list<double> xs) {
    if (xs.size() > kMaxDim) throw UnsupportedError("vector dimension exceeds capacity");
    for (double x : xs) a[n++] = x;
  }
  static Vec zero(std::size_t m) {
    if (m > kMaxDim) throw UnsupportedError("vector dimension exceeds capacity");
    Vec v;
    v.n = static_cast<std::uint32_t>(m);
    return v;
  }
  static Vec from(std::span<const double> xs) {
    if (xs.size() > kMaxDim) throw UnsupportedError("vector dimension exceeds capacity");
    Vec v;
    v.n = static_cast<std::uint32_t>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) v.a[i] = xs[i];
    return v;
  }

  std::size_t size() const { return n; }
  double& operator[](std::size_t i) { return a[i]; }
  double operator[](std::size_t i) const { return a[i]; }
  double* data() { return a.data(); }
  const double* data() const { return a.data(); }
  std::span<const double> span() const { return {a.data(), n}; }

  bool operator==(const Vec& o) const {
    if (n != o.n) return false;
    for (std::uint32_t i = 0; i < n; ++i)
      if (a[i] != o.a[i]) return false;
    return true;
  }
};

inline Vec operator+(const Vec& x, const Vec& y) {
  Vec r = x;
  for (std::uint32_t i = 0; i < r.n; ++i) r.a[i] += y.a[i];
  return r;
}
inline Vec operator-(const Vec& x, const Vec& y) {
  Vec r = x;
  for (std::uint32_t i = 0; i < r.n; ++i) r.a[i] -= y.a[i];
  return r;
}
inline Vec operator*(double s, const Vec& x) {
  Vec r = x;
  for (std::uint32_t i = 0; i < r.n; ++i) r.a[i] *= s;
  return r;
}
inline Vec operator-(const Vec& x) { return -1.0 * x; }

inline double dot(const Vec& x, const Vec& y) {
  double s = 0;
  for (std::uint32_t i = 0; i < x.n; ++i) s += x.a[i] * y.a[i];
  return s;
}
inline double norm2(const Vec& x) { return dot(x, x); }
inline double norm(const Vec& x) { return std::sqrt(norm2(x)); }
inline Vec normalized(const Vec& x) {
  double r = norm(x);
  if (r == 0) throw NumericalError("cannot normalize the zero vector");
  return (1.0 / r) * x;
}
inline Vec cross3(const Vec& x, const Vec& y) {
  Vec r = Vec::zero(3);
  r[0] = x[1] * y[2] - x[2] * y[1];
  r[1] = x[2] * y[0] - x[0] * y[2];
  r[2] = x[0] * y[1] - x[1] * y[0];
  return r;
}

// ---- deterministic reductions --------------------------------------------------
//
// Pairwise summation: associativity fixed by the recursion tree, so results do
// not depend on how node evaluation was partitioned across workers.

inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 32) {
    double s = 0;
    for (double x : xs) s += x;
    return s;
  }
  std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// ---- worker pool ----------------------------------------------------------------
//
// Node evaluation may be partitioned across workers; reductions stay
// deterministic for any worker count because chunk boundaries are fixed and
// partial sums combine pairwise in index order.

namespace detail {
inline std::atomic<int>& worker_threads_ref() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

inline int worker_threads() { return detail::worker_threads_ref().load(); }
inline void set_worker_threads(int n) { detail::worker_threads_ref().store(n < 1 ? 1 : n); }

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const int threads = worker_threads();
  if (threads <= 1 || count < 256) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t block = (count + static_cast<std::size_t>(threads) - 1) /
                            static_cast<std::size_t>(threads);
  std::vector<std::future<void>> jobs;
  for (std::size_t lo = 0; lo < count; lo += block) {
    const std::size_t hi = std::min(count, lo + block);
    jobs.push_back(std::async(std::launch::async, [&fn, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    }));
  }
  for (auto& j : jobs) j.get();
}

inline double pairwise_sum(std::span<const double> xs);

// Deterministic map-reduce: sum of term(i) over i < count, chunked into fixed
// blocks whose partial sums combine pairwise.
template <typename TermFn>
double chunked_sum(std::size_t count, TermFn&& term) {
  constexpr std::size_t kChunk = 2048;
  const std::size_t chunks = count == 0 ? 0 : (count - 1) / kChunk + 1;
  std::vector<double> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(count, lo + kChunk);
    double buf[kChunk];
    for (std::size_t i = lo; i < hi; ++i) buf[i - lo] = term(i);
    partial[c] = pairwise_sum({buf, hi - lo});
  });
  return pairwise_sum(partial);
}

// ---- quadrature helpers --------------------------------------------------------

// Composite Simpson on uniformly spaced samples; odd interval counts close
// with a 3/8 block. One interval falls back to the trapezoid.
inline double simpson(std::span<const double> f, double dt) {
  const std::size_t m = f.size() < 2 ? 0 : f.size() - 1;  // interval count
  if (m == 0) return 0.0;
  if (m == 1) return 0.5 * dt * (f[0] + f[1]);
  std::size_t even = m;
  double tail = 0.0;
  if (m % 2 != 0) {
    if (m < 3) return 0.5 * dt * (f[0] + f[1]);
    even = m - 3;
    const std::size_t k = even;
    tail = 3.0 * dt / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]);
  }
  double s = 0.0;
  for (std::size_t i = 0; i + 2 <= even; i += 2) s += f[i] + 4.0 * f[i + 1] + f[i + 2];
  return dt / 3.0 * s + tail;
}

// ---- seeding -------------------------------------------------------------------
//
// All randomness flows from one user seed; sub-tasks derive independent
// streams so results do not depend on execution order.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(derive_seed(seed, stream));
}

}  // namespace starvol
