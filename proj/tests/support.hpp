// Independent oracles and small statistics helpers shared by the test suites.
#pragma once

#include "multiview.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

namespace oracle {

using multiview::Matrix;
using multiview::Vector;

// Exact n! for n <= 30 in 128-bit integers.
inline unsigned __int128 factorial(int n) {
  unsigned __int128 f = 1;
  for (int k = 2; k <= n; ++k) f *= static_cast<unsigned __int128>(k);
  return f;
}

inline long double to_ld(unsigned __int128 x) {
  long double v = 0.0L;
  long double scale = 1.0L;
  while (x > 0) {
    v += static_cast<long double>(static_cast<unsigned>(x % 1000000000u)) * scale;
    x /= 1000000000u;
    scale *= 1e9L;
  }
  return v;
}

// log( d! / prod b! * prod eta^b ) with the coefficient formed as an exact integer.
inline double log_multinomial(const std::vector<int>& b, const std::vector<double>& eta) {
  int d = std::accumulate(b.begin(), b.end(), 0);
  unsigned __int128 coef = factorial(d);
  for (int c : b) coef /= factorial(c);
  long double out = std::log(to_ld(coef));
  for (std::size_t m = 0; m < b.size(); ++m)
    if (b[m] > 0) out += static_cast<long double>(b[m]) * std::log(static_cast<long double>(eta[m]));
  return static_cast<double>(out);
}

// Every composition of d into K nonnegative parts.
inline void compositions(int d, int K, std::vector<int>& cur, const std::function<void(const std::vector<int>&)>& f) {
  if (static_cast<int>(cur.size()) == K - 1) {
    cur.push_back(d);
    f(cur);
    cur.pop_back();
    return;
  }
  for (int c = 0; c <= d; ++c) {
    cur.push_back(c);
    compositions(d - c, K, cur, f);
    cur.pop_back();
  }
}

// sum_i log sum_k sum_k' g1_ik g2_ik' pi1_k pi2_k' C_kk', straight from the densities.
inline double joint_double_sum(const Matrix& log_g1, const Matrix& log_g2, const Vector& pi1, const Vector& pi2,
                               const Matrix& C) {
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < log_g1.rows(); ++i) {
    long double s = 0.0L;
    for (Eigen::Index k = 0; k < pi1.size(); ++k)
      for (Eigen::Index l = 0; l < pi2.size(); ++l)
        s += std::exp(static_cast<long double>(log_g1(i, k)) + static_cast<long double>(log_g2(i, l))) * pi1(k) *
             pi2(l) * C(k, l);
    total += std::log(s);
  }
  return static_cast<double>(total);
}

// Feasible 2 x 2 couplings form a segment: P11 = t, P12 = a - t, P21 = b - t,
// P22 = 1 - a - b + t with t between max(0, a + b - 1) and min(a, b).
struct Segment2x2 {
  double a, b;
  double lo() const { return std::max(0.0, a + b - 1.0); }
  double hi() const { return std::min(a, b); }
  Matrix coupling(double t) const {
    Matrix P(2, 2);
    P << t, a - t, b - t, 1.0 - a - b + t;
    Matrix C(2, 2);
    double pa[2] = {a, 1.0 - a}, pb[2] = {b, 1.0 - b};
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l) C(k, l) = P(k, l) / (pa[k] * pb[l]);
    return C;
  }
};

// Maximizes f over the segment: grid scan then golden-section refinement
// around the best grid cell (f is concave along the segment).
inline double maximize_on_segment(const Segment2x2& seg, const std::function<double(double)>& f, int grid = 2000) {
  const double lo = seg.lo(), hi = seg.hi();
  double best_t = lo, best = -INFINITY;
  for (int g = 0; g <= grid; ++g) {
    double t = lo + (hi - lo) * g / grid;
    // stay off the boundary, where log densities may be -inf
    t = std::clamp(t, lo + 1e-12 * (hi - lo), hi - 1e-12 * (hi - lo));
    double v = f(t);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  double step = (hi - lo) / grid;
  double x0 = std::max(lo + 1e-14, best_t - step), x1 = std::min(hi - 1e-14, best_t + step);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && x1 - x0 > 1e-15; ++it) {
    double m1 = x1 - phi * (x1 - x0), m2 = x0 + phi * (x1 - x0);
    if (f(m1) < f(m2)) x0 = m1;
    else x1 = m2;
  }
  return std::max(best, f(0.5 * (x0 + x1)));
}

// Balanced 2 x 2 coupling by bisection: diag(v) O diag(u) keeps the cross
// ratio O11 O22 / (O12 O21), which increases monotonically along the segment.
inline Matrix sinkhorn_2x2_bisection(const Matrix& O, const Segment2x2& seg) {
  const double target = O(0, 0) * O(1, 1) / (O(0, 1) * O(1, 0));
  double lo = seg.lo(), hi = seg.hi();
  for (int it = 0; it < 300; ++it) {
    double t = 0.5 * (lo + hi);
    Matrix C = seg.coupling(t);
    double ratio = C(0, 0) * C(1, 1) / (C(0, 1) * C(1, 0));
    if (ratio < target) lo = t;
    else hi = t;
  }
  return seg.coupling(0.5 * (lo + hi));
}

// Adjusted Rand index.
inline double ari(const std::vector<int>& x, const std::vector<int>& y) {
  std::map<std::pair<int, int>, double> nij;
  std::map<int, double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    nij[{x[i], y[i]}] += 1.0;
    a[x[i]] += 1.0;
    b[y[i]] += 1.0;
  }
  auto c2 = [](double v) { return v * (v - 1.0) / 2.0; };
  double sij = 0.0, sa = 0.0, sb = 0.0;
  for (auto& [k, v] : nij) sij += c2(v);
  for (auto& [k, v] : a) sa += c2(v);
  for (auto& [k, v] : b) sb += c2(v);
  double expected = sa * sb / c2(static_cast<double>(x.size()));
  double maxv = 0.5 * (sa + sb);
  if (maxv == expected) return 1.0;
  return (sij - expected) / (maxv - expected);
}

// One-sample KS test against Uniform(0, 1); returns the p-value.
inline double ks_uniform_pvalue(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double D = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double u = std::clamp(p[i], 0.0, 1.0);
    D = std::max({D, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  // Kolmogorov tail with Stephens' finite-n correction.
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * D;
  if (lambda < 1e-3) return 1.0;
  double q = 0.0;
  for (int j = 1; j <= 200; ++j) q += 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
  return std::clamp(q, 0.0, 1.0);
}

// Pearson chi-square goodness-of-fit p-value for equiprobable bins.
inline double chi_square_uniform_pvalue(const std::vector<int>& counts) {
  double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double e = total / static_cast<double>(counts.size());
  double x2 = 0.0;
  for (int c : counts) x2 += (c - e) * (c - e) / e;
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, x2));
}

inline double chi_square_pvalue(double x2, double df) {
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, x2));
}

// Best-matching permutation of the columns of a K x K matrix (max trace), K <= 8.
inline std::vector<int> best_alignment(const Matrix& M) {
  std::vector<int> perm(static_cast<std::size_t>(M.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_v = -INFINITY;
  do {
    double v = 0.0;
    for (std::size_t k = 0; k < perm.size(); ++k) v += M(static_cast<Eigen::Index>(k), perm[k]);
    if (v > best_v) {
      best_v = v;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace oracle
