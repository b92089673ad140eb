#ifndef MULTIVIEW_COMMON_HPP
#define MULTIVIEW_COMMON_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace multiview {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Community / cluster labels are stored 0-based; serialized output is 1-based.
using Labels = std::vector<int>;

using Rng = std::mt19937_64;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input, unreadable files. The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical or model-level failure (infeasible parameters, non-convergence).
/// The CLI maps these to exit code 1.
class DomainError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Named streams so that independent consumers of one master seed never
// share a generator state.
enum class Stream : std::uint64_t {
  memberships = 1,
  view1 = 2,
  view2 = 3,
  popularity = 4,
  covariates = 5,
  spectral = 6,
  permutation = 7,
  gtest_permutation = 8,
  gmm_init = 9,
  replicate = 10,
};

/// Deterministic child seed for (master, stream, index). Replicate seeds are
/// a pure function of their index, so parallel loops are order independent.
inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream)));
  return splitmix64(h + splitmix64(index));
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

inline double log_sum_exp(const double* x, std::size_t len) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < len; ++i) m = std::max(m, x[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Exceptions
/// are captured and the one with the lowest index is rethrown.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = count;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline unsigned default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

inline int num_levels(const Labels& z) {
  int k = 0;
  for (int v : z) k = std::max(k, v + 1);
  return k;
}

}  // namespace multiview

#endif  // MULTIVIEW_COMMON_HPP
