#ifndef MULTIVIEW_SIMGEN_HPP
#define MULTIVIEW_SIMGEN_HPP

#include "multiview/common.hpp"
#include "multiview/netcore.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace multiview {

/// Dependence between two label vectors: P(z1 = k, z2 = k') = pi1_k pi2_k' C_kk'.
/// C = all-ones is independence.
struct CouplingMatrix {
  Matrix C;
  Vector pi1;
  Vector pi2;

  /// Largest violation of C pi2 = 1 and C^T pi1 = 1.
  double marginal_violation() const {
    double row = ((C * pi2).array() - 1.0).abs().maxCoeff();
    double col = ((C.transpose() * pi1).array() - 1.0).abs().maxCoeff();
    return std::max(row, col);
  }

  void validate(double tol = 1e-8) const {
    if (C.rows() != pi1.size() || C.cols() != pi2.size())
      throw DomainError("coupling matrix dimensions do not match marginals");
    if ((C.array() < 0.0).any()) throw DomainError("coupling matrix has negative entries");
    for (const Vector* p : {&pi1, &pi2}) {
      if ((p->array() <= 0.0).any()) throw DomainError("marginal probabilities must be positive");
      if (std::abs(p->sum() - 1.0) > tol) throw DomainError("marginal probabilities must sum to 1");
    }
    if (marginal_violation() > tol) throw DomainError("coupling matrix violates marginal constraints");
  }

  Matrix joint() const { return pi1.asDiagonal() * C * pi2.asDiagonal(); }
};

/// C = (1 - delta) 11^T + delta diag(K 1) with uniform marginals.
inline CouplingMatrix coupling_matrix(double delta, int K) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("delta must lie in [0, 1]");
  if (K < 1) throw DomainError("K must be at least 1");
  CouplingMatrix c;
  c.C = Matrix::Constant(K, K, 1.0 - delta);
  c.C.diagonal().array() += delta * K;
  c.pi1 = Vector::Constant(K, 1.0 / K);
  c.pi2 = c.pi1;
  return c;
}

struct SbmParams {
  Matrix theta;
  Vector pi;

  void validate() const {
    if (theta.rows() != theta.cols() || theta.rows() != pi.size())
      throw DomainError("SBM parameter dimensions disagree");
    if (theta != theta.transpose())
      throw DomainError("theta must be symmetric");
    if ((theta.array() < 0.0).any() || (theta.array() > 1.0).any())
      throw DomainError("theta entries must lie in [0, 1]");
  }
};

/// Returns omega such that the planted-partition matrix
/// theta_kk' = omega + (2r - 1) omega 1{k = k'} has expected edge density s
/// under membership probabilities pi.
inline double planted_partition_base(double r, double s, const Vector& pi) {
  double sum_sq = pi.squaredNorm();
  return s / (1.0 + (2.0 * r - 1.0) * sum_sq);
}

inline SbmParams block_matrix(double r, double s, int K, const Vector& pi) {
  if (!(r > 0.0)) throw DomainError("r must be positive");
  if (!(s > 0.0 && s < 1.0)) throw DomainError("s must lie in (0, 1)");
  if (K < 1 || pi.size() != K) throw DomainError("pi must have K entries");
  double omega = planted_partition_base(r, s, pi);
  double diag = 2.0 * r * omega;
  if (!(omega > 0.0 && omega <= 1.0 && diag <= 1.0))
    throw DomainError("infeasible (r,s,K)");
  SbmParams p;
  p.theta = Matrix::Constant(K, K, omega);
  p.theta.diagonal().setConstant(diag);
  p.pi = pi;
  return p;
}

inline SbmParams block_matrix(double r, double s, int K) {
  return block_matrix(r, s, K, Vector::Constant(K, 1.0 / K));
}

/// Node popularity (degree-correction) distribution.
struct PopularitySpec {
  enum class Kind { two_point, uniform, shared_with_view1 };
  Kind kind = Kind::two_point;
  std::vector<double> values{2.5, 0.625};
  std::vector<double> probs{0.2, 0.8};
  double lo = 0.14;
  double hi = 0.84;

  static PopularitySpec two_point(std::vector<double> v, std::vector<double> p) {
    PopularitySpec s;
    s.kind = Kind::two_point;
    s.values = std::move(v);
    s.probs = std::move(p);
    return s;
  }
  static PopularitySpec uniform(double lo, double hi) {
    PopularitySpec s;
    s.kind = Kind::uniform;
    s.lo = lo;
    s.hi = hi;
    return s;
  }
  static PopularitySpec shared() {
    PopularitySpec s;
    s.kind = Kind::shared_with_view1;
    return s;
  }
};

/// Draws one popularity per node. `view1` is consulted only by the shared kind.
inline std::vector<double> sample_popularities(const PopularitySpec& spec, int n, Rng& rng,
                                               const std::vector<double>* view1 = nullptr) {
  std::vector<double> out(static_cast<std::size_t>(n));
  switch (spec.kind) {
    case PopularitySpec::Kind::two_point: {
      if (spec.values.size() != spec.probs.size() || spec.values.empty())
        throw DomainError("two-point popularity needs matching values and probabilities");
      double total = 0.0;
      for (std::size_t i = 0; i < spec.values.size(); ++i) {
        if (!(spec.values[i] > 0.0)) throw DomainError("popularity values must be positive");
        if (spec.probs[i] < 0.0) throw DomainError("negative popularity probability");
        total += spec.probs[i];
      }
      if (std::abs(total - 1.0) > 1e-12) throw DomainError("popularity probabilities must sum to 1");
      std::discrete_distribution<int> pick(spec.probs.begin(), spec.probs.end());
      for (auto& v : out) v = spec.values[static_cast<std::size_t>(pick(rng))];
      break;
    }
    case PopularitySpec::Kind::uniform: {
      if (!(spec.lo > 0.0 && spec.hi > spec.lo)) throw DomainError("uniform popularity needs 0 < lo < hi");
      std::uniform_real_distribution<double> u(spec.lo, spec.hi);
      for (auto& v : out) v = u(rng);
      break;
    }
    case PopularitySpec::Kind::shared_with_view1:
      if (view1 == nullptr || static_cast<int>(view1->size()) != n)
        throw DomainError("shared popularity requires the first view's popularities");
      out = *view1;
      break;
  }
  return out;
}

/// Draws n i.i.d. label pairs from the coupled joint law.
inline std::pair<Labels, Labels> sample_joint_memberships(const CouplingMatrix& coupling, int n,
                                                          Rng& rng) {
  coupling.validate(1e-8);
  const Matrix P = coupling.joint();
  const int K2 = static_cast<int>(P.cols());
  std::vector<double> w(static_cast<std::size_t>(P.size()));
  for (int k = 0; k < P.rows(); ++k)
    for (int l = 0; l < K2; ++l) w[static_cast<std::size_t>(k * K2 + l)] = P(k, l);
  std::discrete_distribution<int> pick(w.begin(), w.end());
  Labels z1(static_cast<std::size_t>(n)), z2(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int cell = pick(rng);
    z1[static_cast<std::size_t>(i)] = cell / K2;
    z2[static_cast<std::size_t>(i)] = cell % K2;
  }
  return {std::move(z1), std::move(z2)};
}

inline Labels sample_memberships(const Vector& pi, int n, Rng& rng) {
  std::discrete_distribution<int> pick(pi.data(), pi.data() + pi.size());
  Labels z(static_cast<std::size_t>(n));
  for (auto& v : z) v = pick(rng);
  return z;
}

namespace detail {
inline void check_labels(const Labels& z, int K) {
  for (int v : z)
    if (v < 0 || v >= K) throw DomainError("label out of range");
}
}  // namespace detail

inline AdjacencyView sample_sbm(const Labels& z, const SbmParams& params, Rng& rng) {
  params.validate();
  const int K = static_cast<int>(params.theta.rows());
  detail::check_labels(z, K);
  const int n = static_cast<int>(z.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < params.theta(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]))
        edges.emplace_back(i, j);
  return AdjacencyView(n, std::move(edges));
}

/// Degree-corrected SBM; edge {i,j} present with probability
/// delta_i delta_j theta_{z_i z_j}. Rejects parameters that exceed 1.
inline AdjacencyView sample_dcsbm(const Labels& z, const std::vector<double>& delta,
                                  const SbmParams& params, Rng& rng) {
  params.validate();
  const int K = static_cast<int>(params.theta.rows());
  detail::check_labels(z, K);
  const int n = static_cast<int>(z.size());
  if (static_cast<int>(delta.size()) != n) throw DomainError("popularity vector length mismatch");
  for (double d : delta)
    if (!(d > 0.0)) throw DomainError("popularities must be positive");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double p = delta[static_cast<std::size_t>(i)] * delta[static_cast<std::size_t>(j)] *
                 params.theta(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]);
      if (p > 1.0)
        throw DomainError("edge probability " + std::to_string(p) + " exceeds 1 for pair (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
    }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double p = delta[static_cast<std::size_t>(i)] * delta[static_cast<std::size_t>(j)] *
                 params.theta(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]);
      if (u(rng) < p) edges.emplace_back(i, j);
    }
  return AdjacencyView(n, std::move(edges));
}

/// Spherical Gaussian mixture view: column k of mu is the k-th mean.
struct GmmParams {
  Matrix mu;
  double sigma = 1.0;
};

/// The 10 x 3 mean matrix used by the network + covariate simulations:
/// rows 1-5 are (0, 0, sqrt 12), rows 6-10 are (2, -2, 0).
inline Matrix default_covariate_means() {
  Matrix mu(10, 3);
  for (int r = 0; r < 5; ++r) mu.row(r) << 0.0, 0.0, std::sqrt(12.0);
  for (int r = 5; r < 10; ++r) mu.row(r) << 2.0, -2.0, 0.0;
  return mu;
}

inline Matrix sample_gmm(const Labels& z, const GmmParams& params, Rng& rng) {
  if (!(params.sigma > 0.0)) throw DomainError("sigma must be positive");
  if (!params.mu.allFinite()) throw DomainError("mean matrix must be finite");
  detail::check_labels(z, static_cast<int>(params.mu.cols()));
  const int n = static_cast<int>(z.size());
  const int p = static_cast<int>(params.mu.rows());
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix Y(n, p);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < p; ++c)
      Y(i, c) = params.mu(c, z[static_cast<std::size_t>(i)]) + params.sigma * normal(rng);
  return Y;
}

}  // namespace multiview

#endif  // MULTIVIEW_SIMGEN_HPP
