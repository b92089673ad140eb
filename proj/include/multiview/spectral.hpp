#ifndef MULTIVIEW_SPECTRAL_HPP
#define MULTIVIEW_SPECTRAL_HPP

#include "multiview/common.hpp"
#include "multiview/netcore.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace multiview {

struct SpectralConfig {
  double regularizer_scale = 0.25;
  int kmeans_restarts = 20;
  int kmeans_max_iter = 100;
  double eig_tolerance = 1e-8;
  // Graphs up to this size use a dense eigensolver; larger ones use
  // block subspace iteration on the sparse operator.
  int dense_limit = 4000;
  int subspace_max_iter = 3000;
};

struct KMeansResult {
  Labels labels;
  Matrix centers;
  double objective = 0.0;
  int empty_clusters = 0;
  int restart = 0;
  // Objective after each Lloyd iteration of the winning restart.
  std::vector<double> trace;
};

namespace detail {

inline double sq_dist(const Matrix& X, int i, const Matrix& centers, int k) {
  return (X.row(i) - centers.row(k)).squaredNorm();
}

inline KMeansResult kmeans_once(const Matrix& X, int K, int max_iter, Rng& rng) {
  const int n = static_cast<int>(X.rows());
  const int dim = static_cast<int>(X.cols());
  KMeansResult res;
  res.centers.resize(K, dim);

  // k-means++ seeding
  std::uniform_int_distribution<int> first(0, n - 1);
  res.centers.row(0) = X.row(first(rng));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int k = 1; k < K; ++k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(X, i, res.centers, k - 1));
      total += d2[static_cast<std::size_t>(i)];
    }
    int pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc >= target && d2[static_cast<std::size_t>(i)] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    res.centers.row(k) = X.row(pick);
  }

  res.labels.assign(static_cast<std::size_t>(n), -1);
  Vector counts(K);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(X, i, res.centers, 0);
      for (int k = 1; k < K; ++k) {
        double d = sq_dist(X, i, res.centers, k);
        if (d < best_d) {  // strict: ties go to the lowest index
          best_d = d;
          best = k;
        }
      }
      if (res.labels[static_cast<std::size_t>(i)] != best) changed = true;
      res.labels[static_cast<std::size_t>(i)] = best;
      obj += best_d;
    }
    if (!changed && it > 0) break;
    Matrix sums = Matrix::Zero(K, dim);
    counts.setZero();
    for (int i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<std::size_t>(i)]) += X.row(i);
      counts(res.labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int k = 0; k < K; ++k)
      if (counts(k) > 0) res.centers.row(k) = sums.row(k) / counts(k);
    obj = 0.0;
    for (int i = 0; i < n; ++i) obj += sq_dist(X, i, res.centers, res.labels[static_cast<std::size_t>(i)]);
    res.trace.push_back(obj);
  }
  res.objective = 0.0;
  counts.setZero();
  for (int i = 0; i < n; ++i) {
    res.objective += sq_dist(X, i, res.centers, res.labels[static_cast<std::size_t>(i)]);
    counts(res.labels[static_cast<std::size_t>(i)]) += 1.0;
  }
  res.empty_clusters = static_cast<int>((counts.array() == 0.0).count());
  return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; keeps the restart with the
/// lowest objective (ties: lowest restart index). Empty clusters are reported
/// in the result, not repaired.
inline KMeansResult kmeans(const Matrix& X, int K, int restarts, int max_iter, Rng& rng) {
  const int n = static_cast<int>(X.rows());
  if (K < 1 || K > n) throw DomainError("k-means needs 1 <= K <= n");
  if (restarts < 1 || max_iter < 1) throw DomainError("k-means restarts and iterations must be positive");
  const std::uint64_t base = rng();
  std::vector<KMeansResult> runs(static_cast<std::size_t>(restarts));
  for (int r = 0; r < restarts; ++r) {
    Rng local(splitmix64(base + static_cast<std::uint64_t>(r)));
    runs[static_cast<std::size_t>(r)] = detail::kmeans_once(X, K, max_iter, local);
    runs[static_cast<std::size_t>(r)].restart = r;
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].objective < runs[best].objective) best = r;
  return std::move(runs[best]);
}

struct SpectralResult {
  Labels labels;
  Vector eigenvalues;  // the K eigenvalues used, by decreasing magnitude
  double kmeans_objective = 0.0;
  int empty_clusters = 0;
  int eig_iterations = 0;  // 0 for the dense path
};

namespace detail {

// y = (A + c 11^T) x for a block of column vectors.
inline Matrix apply_regularized(const AdjacencyView& a, double c, const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  Eigen::RowVectorXd colsum = x.colwise().sum();
  for (int i = 0; i < a.n(); ++i) {
    Eigen::RowVectorXd acc = c * colsum;
    for (int j : a.neighbors(i)) acc += x.row(j);
    y.row(i) = acc;
  }
  return y;
}

inline std::vector<int> order_by_magnitude(const Vector& evals) {
  std::vector<int> idx(static_cast<std::size_t>(evals.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return std::abs(evals(a)) > std::abs(evals(b)); });
  return idx;
}

inline Matrix top_eigvecs_dense(const AdjacencyView& a, double c, int K, Vector& values) {
  const int n = a.n();
  Matrix M = Matrix::Constant(n, n, c);
  for (const auto& [i, j] : a.edges()) {
    M(i, j) += 1.0;
    M(j, i) += 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success) throw DomainError("dense eigensolver failed to converge");
  auto order = order_by_magnitude(es.eigenvalues());
  Matrix vecs(n, K);
  values.resize(K);
  for (int k = 0; k < K; ++k) {
    vecs.col(k) = es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    values(k) = es.eigenvalues()(order[static_cast<std::size_t>(k)]);
  }
  return vecs;
}

inline Matrix top_eigvecs_subspace(const AdjacencyView& a, double c, int K, const SpectralConfig& cfg,
                                   Rng& rng, Vector& values, int& iterations) {
  const int n = a.n();
  const int b = std::min(n, K + 10);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix Q(n, b);
  for (int j = 0; j < b; ++j)
    for (int i = 0; i < n; ++i) Q(i, j) = normal(rng);
  Q = Eigen::HouseholderQR<Matrix>(Q).householderQ() * Matrix::Identity(n, b);

  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.subspace_max_iter; ++it) {
    Matrix Z = apply_regularized(a, c, Q);
    if (it % 5 == 0 || it == cfg.subspace_max_iter) {
      Matrix T = Q.transpose() * Z;
      T = 0.5 * (T + T.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(T);
      auto order = order_by_magnitude(es.eigenvalues());
      Matrix ritz(n, K);
      values.resize(K);
      for (int k = 0; k < K; ++k) {
        ritz.col(k) = Q * es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
        values(k) = es.eigenvalues()(order[static_cast<std::size_t>(k)]);
      }
      Matrix R = apply_regularized(a, c, ritz) - ritz * values.asDiagonal();
      double scale = std::max(std::abs(values(0)), 1.0);
      residual = R.colwise().norm().maxCoeff() / scale;
      if (residual < cfg.eig_tolerance) {
        iterations = it;
        return ritz;
      }
    }
    Q = Eigen::HouseholderQR<Matrix>(Z).householderQ() * Matrix::Identity(n, b);
  }
  throw DomainError("subspace iteration did not converge after " + std::to_string(cfg.subspace_max_iter) +
                    " iterations (relative residual " + std::to_string(residual) + ")");
}

}  // namespace detail

/// Regularized spectral clustering: embed with the K largest-magnitude
/// eigenvectors of A + alpha (mean degree / n) 11^T, normalize rows, then
/// run seeded k-means.
inline SpectralResult spectral_cluster_perturbed(const AdjacencyView& a, int K, const SpectralConfig& cfg,
                                                 Rng& rng) {
  const int n = a.n();
  if (K < 1 || K > n) throw DomainError("spectral clustering needs 1 <= K <= n");
  if (!(cfg.regularizer_scale > 0.0) || cfg.kmeans_restarts < 1 || cfg.kmeans_max_iter < 1 ||
      !(cfg.eig_tolerance > 0.0))
    throw DomainError("spectral configuration values must be positive");
  SpectralResult res;
  if (K == 1) {
    res.labels.assign(static_cast<std::size_t>(n), 0);
    return res;
  }
  const double mean_degree = 2.0 * static_cast<double>(a.num_edges()) / n;
  const double c = cfg.regularizer_scale * mean_degree / n;

  Matrix vecs = n <= cfg.dense_limit
                    ? detail::top_eigvecs_dense(a, c, K, res.eigenvalues)
                    : detail::top_eigvecs_subspace(a, c, K, cfg, rng, res.eigenvalues, res.eig_iterations);
  for (int i = 0; i < n; ++i) {
    double norm = vecs.row(i).norm();
    if (norm > 1e-12) vecs.row(i) /= norm;
    else vecs.row(i).setZero();
  }
  auto km = kmeans(vecs, K, cfg.kmeans_restarts, cfg.kmeans_max_iter, rng);
  res.labels = std::move(km.labels);
  res.kmeans_objective = km.objective;
  res.empty_clusters = km.empty_clusters;
  return res;
}

/// Bethe Hessian H = (rho^2 - 1) I - rho A + D with rho^2 = sum d^2 / sum d - 1.
/// Returns the number of its negative eigenvalues, floored at 1.
inline int estimate_num_communities(const AdjacencyView& a, int dense_limit = 4000) {
  if (a.num_edges() == 0) throw DomainError("cannot estimate communities of an edgeless graph");
  const int n = a.n();
  auto d = degrees(a);
  double s1 = 0.0, s2 = 0.0;
  for (auto v : d) {
    s1 += static_cast<double>(v);
    s2 += static_cast<double>(v) * static_cast<double>(v);
  }
  const double rho = std::sqrt(std::max(s2 / s1 - 1.0, 0.0));
  const double tol = 1e-9 * std::max(1.0, rho * rho);

  int negatives = 0;
  if (n <= dense_limit) {
    Matrix H = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) H(i, i) = rho * rho - 1.0 + static_cast<double>(d[static_cast<std::size_t>(i)]);
    for (const auto& [i, j] : a.edges()) {
      H(i, j) = -rho;
      H(j, i) = -rho;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw DomainError("Bethe Hessian eigensolver failed");
    negatives = static_cast<int>((es.eigenvalues().array() < -tol).count());
  } else {
    // Sylvester's law of inertia: sign pattern of D in H = P^T L D L^T P.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) + 2 * a.num_edges());
    for (int i = 0; i < n; ++i)
      trip.emplace_back(i, i, rho * rho - 1.0 + static_cast<double>(d[static_cast<std::size_t>(i)]));
    for (const auto& [i, j] : a.edges()) {
      trip.emplace_back(i, j, -rho);
      trip.emplace_back(j, i, -rho);
    }
    Eigen::SparseMatrix<double> H(n, n);
    H.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
    if (ldlt.info() != Eigen::Success) throw DomainError("Bethe Hessian factorization failed");
    negatives = static_cast<int>((ldlt.vectorD().array() < -tol).count());
  }
  return std::max(negatives, 1);
}

}  // namespace multiview

#endif  // MULTIVIEW_SPECTRAL_HPP
