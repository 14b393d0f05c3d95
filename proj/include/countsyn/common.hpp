#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace countsyn {

using Vec = std::vector<double>;

/// Axis-aligned box in R^n, lower < upper per coordinate.
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }

  bool contains(const Vec& x, double slack = 0.0) const {
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
    }
    return true;
  }

  void validate() const {
    if (lower.size() != upper.size() || lower.empty())
      throw std::invalid_argument("Box: mismatched or empty bounds");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw std::invalid_argument("Box: lower must be < upper on every axis");
  }
};

struct CertificateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnumerationOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LcmCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parity mismatch when steering a periodic component; carries the class sums
/// of both endpoints and the rotations (if any) that would be compatible.
struct ParityError : std::runtime_error {
  std::vector<double> from_class_sums;
  std::vector<double> to_class_sums;
  std::vector<int> compatible_rotations;

  ParityError(const std::string& what, std::vector<double> from_sums,
              std::vector<double> to_sums, std::vector<int> rotations)
      : std::runtime_error(what),
        from_class_sums(std::move(from_sums)),
        to_class_sums(std::move(to_sums)),
        compatible_rotations(std::move(rotations)) {}
};

/// Deterministic RNG: fixed engine plus hand-rolled draws, so equal seeds give
/// equal streams independent of the standard library's distribution objects.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ULL) {
    // warm up splitmix so nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [lo, hi] inclusive (rejection sampling, unbiased).
  int uniform_int(int lo, int hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int>(v % span);
  }

  /// Uniform double in [lo, hi).
  double uniform_real(double lo, double hi) {
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

 private:
  std::uint64_t state_;
};

/// Runs fn(i) for i in [0, n) across hardware threads. Results must be written
/// to disjoint slots; the split is deterministic and so is the outcome.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  if (n < 256 || workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline long long llgcd(long long a, long long b) {
  while (b != 0) {
    long long t = a % b;
    a = b;
    b = t;
  }
  return a < 0 ? -a : a;
}

}  // namespace countsyn
