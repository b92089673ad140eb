#ifndef MULTIVIEW_PSEUDOLIK_HPP
#define MULTIVIEW_PSEUDOLIK_HPP

#include "multiview/common.hpp"
#include "multiview/netcore.hpp"
#include "multiview/spectral.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace multiview {

/// Per-node edge counts into each estimated community, plus degrees.
/// Row sums of `b` equal `d`.
struct BlockCounts {
  IntMatrix b;
  DegreeVector d;
};

inline BlockCounts block_counts(const AdjacencyView& a, const Labels& zhat, int K) {
  if (K < 1) throw DomainError("K must be at least 1");
  if (static_cast<int>(zhat.size()) != a.n()) throw DomainError("label vector length does not match graph");
  for (int v : zhat)
    if (v < 0 || v >= K) throw DomainError("label out of range");
  BlockCounts bc;
  bc.b = IntMatrix::Zero(a.n(), K);
  for (int i = 0; i < a.n(); ++i)
    for (int j : a.neighbors(i)) ++bc.b(i, zhat[static_cast<std::size_t>(j)]);
  bc.d = degrees(a);
  return bc;
}

/// log of the Multinomial(d, eta) pmf at counts b; 0 when d == 0.
template <typename Counts, typename Probs>
double multinomial_log_pmf(const Counts& b, std::int64_t d, const Probs& eta) {
  if (b.size() != eta.size()) throw DomainError("count and probability vectors differ in length");
  std::int64_t sum = 0;
  for (Eigen::Index m = 0; m < b.size(); ++m) sum += static_cast<std::int64_t>(b(m));
  if (sum != d) throw DomainError("block counts do not sum to the degree");
  if (d == 0) return 0.0;
  double out = std::lgamma(static_cast<double>(d) + 1.0);
  for (Eigen::Index m = 0; m < b.size(); ++m) {
    auto c = static_cast<double>(b(m));
    if (c == 0.0) continue;
    out += c * std::log(static_cast<double>(eta(m))) - std::lgamma(c + 1.0);
  }
  return out;
}

struct EmConfig {
  double tol_per_node = 1e-8;  // stop when |delta loglik| < tol_per_node * n
  int max_iter = 500;
  double eta_floor = 1e-10;
  double pi_floor = 1e-12;
  double init_smoothing = 0.05;
  // Gaussian mixtures
  double sigma_floor = 1e-6;
  bool shared_variance = false;
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;
};

struct MultinomialMixtureFit {
  Matrix eta;  // K x K, row-stochastic
  Vector pi;
  double loglik = 0.0;
  Matrix responsibilities;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// Floors entries at eps and rescales the remaining mass so the row sums to 1
// while floored entries stay exactly eps.
inline void floor_and_normalize(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, double eps) {
  const auto K = row.size();
  double total = row.sum();
  if (!(total > 0.0)) {
    row.setConstant(1.0 / static_cast<double>(K));
    return;
  }
  row /= total;
  for (int pass = 0; pass < 4; ++pass) {
    double floored = 0.0, free_mass = 0.0;
    for (Eigen::Index m = 0; m < K; ++m) {
      if (row(m) <= eps) floored += eps;
      else free_mass += row(m);
    }
    if (floored == 0.0) return;
    double scale = (1.0 - floored) / free_mass;
    bool again = false;
    for (Eigen::Index m = 0; m < K; ++m) {
      if (row(m) <= eps) row(m) = eps;
      else {
        row(m) *= scale;
        if (row(m) <= eps) again = true;
      }
    }
    if (!again) return;
  }
}

inline void floor_pi(Vector& pi, double eps) {
  pi = pi.cwiseMax(eps);
  pi /= pi.sum();
}

inline Matrix smoothed_responsibilities(const Labels& init, int K, double smoothing) {
  const int n = static_cast<int>(init.size());
  Matrix r = Matrix::Constant(n, K, smoothing / K);
  for (int i = 0; i < n; ++i) {
    int z = init[static_cast<std::size_t>(i)];
    if (z < 0 || z >= K) throw DomainError("initial label out of range");
    r(i, z) += 1.0 - smoothing;
  }
  return r;
}

// Row-wise log-sum-exp normalization; returns total log likelihood.
inline double normalize_rows(const Matrix& logw, Matrix& resp) {
  const auto n = logw.rows();
  const auto K = logw.cols();
  resp.resize(n, K);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = logw.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) s += std::exp(logw(i, k) - m);
    double lse = m + std::log(s);
    for (Eigen::Index k = 0; k < K; ++k) resp(i, k) = std::exp(logw(i, k) - lse);
    total += lse;
  }
  return total;
}

inline Vector multinomial_coefficients(const BlockCounts& bc) {
  const auto n = bc.b.rows();
  Vector coef(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double c = std::lgamma(static_cast<double>(bc.d[static_cast<std::size_t>(i)]) + 1.0);
    for (Eigen::Index m = 0; m < bc.b.cols(); ++m) c -= std::lgamma(static_cast<double>(bc.b(i, m)) + 1.0);
    coef(i) = c;
  }
  return coef;
}

}  // namespace detail

/// n x K matrix of log Multinomial(b_i; d_i, eta_k).
inline Matrix multinomial_log_density(const BlockCounts& bc, const Matrix& eta) {
  if (eta.cols() != bc.b.cols()) throw DomainError("eta has the wrong number of columns");
  Matrix counts = bc.b.cast<double>();
  Matrix out = counts * eta.array().log().matrix().transpose();
  out.colwise() += detail::multinomial_coefficients(bc);
  return out;
}

/// EM for the degree-conditioned pseudo-likelihood
///   sum_i log sum_k pi_k Mult(b_i; d_i, eta_k).
/// Nodes with d_i = 0 have pmf 1 under every component; their posterior is
/// the prior and they add 0 to the objective.
inline MultinomialMixtureFit fit_multinomial_mixture(const BlockCounts& bc, int K, const Matrix& init_resp,
                                                     const EmConfig& cfg = {}) {
  const auto n = bc.b.rows();
  if (K < 1) throw DomainError("K must be at least 1");
  if (K > n) throw DomainError("K exceeds the number of nodes");
  if (init_resp.rows() != n || init_resp.cols() != K) throw DomainError("initial responsibilities have wrong shape");

  const Matrix counts = bc.b.cast<double>();
  const Vector coef = detail::multinomial_coefficients(bc);
  MultinomialMixtureFit fit;
  Matrix resp = init_resp;

  auto m_step = [&](const Matrix& r) {
    fit.pi = r.colwise().sum().transpose() / static_cast<double>(n);
    detail::floor_pi(fit.pi, cfg.pi_floor);
    fit.eta = r.transpose() * counts;  // K x cols
    for (int k = 0; k < K; ++k) detail::floor_and_normalize(fit.eta.row(k), cfg.eta_floor);
  };
  auto e_step = [&](Matrix& r) {
    Matrix logw = counts * fit.eta.array().log().matrix().transpose();
    logw.rowwise() += fit.pi.array().log().matrix().transpose();
    double ll = detail::normalize_rows(logw, r) + coef.sum();
    if (!std::isfinite(ll))
      throw DomainError("non-finite pseudo-log-likelihood at EM iteration " + std::to_string(fit.iterations));
    return ll;
  };

  m_step(resp);
  const double tol = cfg.tol_per_node * static_cast<double>(n);
  for (fit.iterations = 1; fit.iterations <= cfg.max_iter; ++fit.iterations) {
    double ll = e_step(resp);
    fit.trace.push_back(ll);
    fit.loglik = ll;
    if (K == 1 || (fit.trace.size() > 1 && std::abs(ll - fit.trace[fit.trace.size() - 2]) < tol)) {
      fit.converged = true;
      break;
    }
    if (fit.iterations == cfg.max_iter) break;
    m_step(resp);
  }
  fit.iterations = std::min(fit.iterations, cfg.max_iter);
  fit.responsibilities = std::move(resp);
  return fit;
}

inline MultinomialMixtureFit fit_multinomial_mixture(const BlockCounts& bc, int K, const Labels& init,
                                                     const EmConfig& cfg = {}) {
  return fit_multinomial_mixture(bc, K, detail::smoothed_responsibilities(init, K, cfg.init_smoothing), cfg);
}

// ---------------------------------------------------------------------------
// Spherical Gaussian mixtures for the multivariate view

struct GaussianMixtureFit {
  Matrix mu;     // p x K
  Vector sigma;  // per-component std (all equal in shared mode)
  Vector pi;
  double loglik = 0.0;
  double bic = 0.0;
  Matrix responsibilities;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  int reinitializations = 0;
};

inline int gaussian_mixture_num_params(int K, int p, bool shared_variance) {
  return K * p + (shared_variance ? 1 : K) + (K - 1);
}

/// n x K matrix of log N(y_i; mu_k, sigma_k^2 I).
inline Matrix gaussian_log_density(const Matrix& Y, const Matrix& mu, const Vector& sigma) {
  const auto n = Y.rows();
  const auto p = static_cast<double>(Y.cols());
  const auto K = mu.cols();
  Matrix out(n, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    double var = sigma(k) * sigma(k);
    double norm = -0.5 * p * std::log(2.0 * std::numbers::pi * var);
    for (Eigen::Index i = 0; i < n; ++i)
      out(i, k) = norm - (Y.row(i).transpose() - mu.col(k)).squaredNorm() / (2.0 * var);
  }
  return out;
}

namespace detail {

inline GaussianMixtureFit fit_gaussian_fixed_k(const Matrix& Y, int K, const EmConfig& cfg) {
  const auto n = Y.rows();
  const int p = static_cast<int>(Y.cols());
  GaussianMixtureFit fit;
  fit.mu.resize(p, K);
  fit.sigma.resize(K);

  Matrix resp;
  if (K == 1) {
    resp = Matrix::Ones(n, 1);
  } else {
    Rng rng(derive_seed(cfg.seed, Stream::gmm_init, static_cast<std::uint64_t>(K)));
    auto km = kmeans(Y, K, cfg.kmeans_restarts, 100, rng);
    resp = smoothed_responsibilities(km.labels, K, 0.0);
  }

  auto reinit_component = [&](int k) {
    if (fit.reinitializations > 0)
      throw DomainError("Gaussian component " + std::to_string(k) + " collapsed after reinitialization");
    ++fit.reinitializations;
    // Re-seed on the observation with the lowest mixture density.
    Matrix logw = gaussian_log_density(Y, fit.mu, fit.sigma.cwiseMax(cfg.sigma_floor));
    logw.rowwise() += fit.pi.array().log().matrix().transpose();
    Eigen::Index worst = 0;
    double worst_v = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd row = logw.row(i);
      double lse = log_sum_exp(row.data(), static_cast<std::size_t>(row.size()));
      if (lse < worst_v) {
        worst_v = lse;
        worst = i;
      }
    }
    double pooled = 0.0;
    Eigen::RowVectorXd mean = Y.colwise().mean();
    for (Eigen::Index i = 0; i < n; ++i) pooled += (Y.row(i) - mean).squaredNorm();
    fit.mu.col(k) = Y.row(worst).transpose();
    fit.sigma(k) = std::max(std::sqrt(pooled / (static_cast<double>(n) * p)), cfg.sigma_floor);
    fit.pi(k) = 1.0 / K;
    fit.pi /= fit.pi.sum();
  };

  auto m_step = [&](const Matrix& r) {
    Vector nk = r.colwise().sum().transpose();
    fit.pi = nk / static_cast<double>(n);
    floor_pi(fit.pi, cfg.pi_floor);
    double shared_ss = 0.0;
    std::vector<int> collapsed;
    for (int k = 0; k < K; ++k) {
      if (!(nk(k) > 0.0)) {
        collapsed.push_back(k);
        continue;
      }
      fit.mu.col(k) = Y.transpose() * r.col(k) / nk(k);
      double ss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) ss += r(i, k) * (Y.row(i).transpose() - fit.mu.col(k)).squaredNorm();
      shared_ss += ss;
      fit.sigma(k) = std::sqrt(ss / (nk(k) * p));
    }
    if (cfg.shared_variance) fit.sigma.setConstant(std::sqrt(shared_ss / (static_cast<double>(n) * p)));
    for (int k = 0; k < K; ++k)
      if (!(fit.sigma(k) >= cfg.sigma_floor) &&
          std::find(collapsed.begin(), collapsed.end(), k) == collapsed.end())
        collapsed.push_back(k);
    for (int k : collapsed) reinit_component(k);
  };

  m_step(resp);
  const double tol = cfg.tol_per_node * static_cast<double>(n);
  for (fit.iterations = 1; fit.iterations <= cfg.max_iter; ++fit.iterations) {
    Matrix logw = gaussian_log_density(Y, fit.mu, fit.sigma);
    logw.rowwise() += fit.pi.array().log().matrix().transpose();
    double ll = normalize_rows(logw, resp);
    if (!std::isfinite(ll))
      throw DomainError("non-finite Gaussian mixture log-likelihood at EM iteration " +
                        std::to_string(fit.iterations));
    fit.trace.push_back(ll);
    fit.loglik = ll;
    if (K == 1 || (fit.trace.size() > 1 && std::abs(ll - fit.trace[fit.trace.size() - 2]) < tol)) {
      fit.converged = true;
      break;
    }
    if (fit.iterations == cfg.max_iter) break;
    m_step(resp);
  }
  fit.iterations = std::min(fit.iterations, cfg.max_iter);
  fit.responsibilities = std::move(resp);
  fit.bic = -2.0 * fit.loglik +
            gaussian_mixture_num_params(K, p, cfg.shared_variance) * std::log(static_cast<double>(n));
  return fit;
}

}  // namespace detail

struct GaussianMixtureSelection {
  GaussianMixtureFit fit;
  int k = 0;
  bool estimated = false;
  std::vector<double> bic_by_k;  // NaN where the fit failed
};

/// Spherical-Gaussian EM. With `K` unset, fits K = 1..k_max and keeps the
/// BIC minimizer (ties: smaller K).
inline GaussianMixtureSelection fit_gaussian_mixture(const Matrix& Y, std::optional<int> K,
                                                     const EmConfig& cfg = {}, int k_max = 10) {
  if (!Y.allFinite()) throw DomainError("multivariate view contains non-finite values");
  const auto n = Y.rows();
  GaussianMixtureSelection sel;
  if (K) {
    if (*K < 1 || *K >= n) throw DomainError("Gaussian mixture needs 1 <= K < n");
    sel.fit = detail::fit_gaussian_fixed_k(Y, *K, cfg);
    sel.k = *K;
    return sel;
  }
  sel.estimated = true;
  const int top = std::min<int>(k_max, static_cast<int>(n) - 1);
  if (top < 1) throw DomainError("too few observations for a Gaussian mixture");
  std::optional<GaussianMixtureFit> best;
  for (int k = 1; k <= top; ++k) {
    try {
      auto f = detail::fit_gaussian_fixed_k(Y, k, cfg);
      sel.bic_by_k.push_back(f.bic);
      if (!best || f.bic < best->bic) {
        best = std::move(f);
        sel.k = k;
      }
    } catch (const DomainError&) {
      sel.bic_by_k.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (!best) throw DomainError("no Gaussian mixture fit succeeded");
  sel.fit = std::move(*best);
  return sel;
}

inline Labels hard_labels(const Matrix& responsibilities) {
  Labels z(static_cast<std::size_t>(responsibilities.rows()));
  for (Eigen::Index i = 0; i < responsibilities.rows(); ++i) {
    Eigen::Index arg = 0;
    responsibilities.row(i).maxCoeff(&arg);
    z[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return z;
}

inline void write_trace_csv(std::ostream& out, const std::vector<double>& trace) {
  out << "iteration,loglik\n";
  out.precision(17);
  for (std::size_t t = 0; t < trace.size(); ++t) out << t + 1 << ',' << trace[t] << '\n';
}

}  // namespace multiview

#endif  // MULTIVIEW_PSEUDOLIK_HPP
