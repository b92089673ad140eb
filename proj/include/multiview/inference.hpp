#ifndef MULTIVIEW_INFERENCE_HPP
#define MULTIVIEW_INFERENCE_HPP

#include "multiview/common.hpp"
#include "multiview/coupling.hpp"
#include "multiview/netcore.hpp"
#include "multiview/pseudolik.hpp"
#include "multiview/spectral.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace multiview {

/// Number of communities: a fixed value, or std::nullopt to estimate it.
using KChoice = std::optional<int>;

struct TestConfig {
  SpectralConfig spectral;
  EmConfig em;
  OptimizerConfig optimizer;
  unsigned threads = 1;
  // (1 + count) / (1 + M) instead of count / M
  bool plus_one_pvalue = false;
  int gmm_k_max = 10;
};

/// Fraction of permutation replicates at least as large as the observed
/// statistic (ties count against the observation).
inline double compute_pvalue(double observed, const std::vector<double>& perms, bool plus_one = false) {
  if (perms.empty()) throw DomainError("no permutation replicates");
  std::size_t count = 0;
  for (double v : perms)
    if (observed <= v) ++count;
  if (plus_one) return (1.0 + static_cast<double>(count)) / (1.0 + static_cast<double>(perms.size()));
  return static_cast<double>(count) / static_cast<double>(perms.size());
}

struct TestResult {
  std::string test;
  double statistic = 0.0;
  std::vector<double> perm_statistics;
  double p_value = 1.0;
  int M = 0;
  std::uint64_t seed = 0;
  int k1 = 0;
  int k2 = 0;
  bool k1_estimated = false;
  bool k2_estimated = false;
  Vector pi1;
  Vector pi2;
  Matrix C_hat;
  Matrix eta1;
  Matrix eta2;      // network second view
  Matrix mu2;       // covariate second view (p x K2)
  Vector sigma2;
  nlohmann::json diagnostics = nlohmann::json::object();
  double runtime_ms = 0.0;

  std::string k_source() const { return (k1_estimated || k2_estimated) ? "estimated" : "given"; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["test"] = test;
    j["statistic"] = statistic;
    j["p_value"] = p_value;
    j["M"] = M;
    j["seed"] = seed;
    j["k1"] = k1;
    j["k2"] = k2;
    j["k_source"] = k_source();
    j["runtime_ms"] = runtime_ms;
    j["diagnostics"] = diagnostics;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Single-view fits

struct NetworkViewFit {
  int k = 0;
  bool estimated = false;
  SpectralResult spectral;
  BlockCounts counts;
  MultinomialMixtureFit fit;
  Matrix log_density;  // n x k

  Labels labels() const { return hard_labels(fit.responsibilities); }
};

/// Spectral labels -> block counts -> pseudo-likelihood EM -> component log pmfs.
inline NetworkViewFit fit_network_view(const AdjacencyView& a, KChoice K, const TestConfig& cfg, Rng& rng) {
  NetworkViewFit v;
  v.estimated = !K.has_value();
  v.k = K ? *K : estimate_num_communities(a, cfg.spectral.dense_limit);
  if (v.k < 1 || v.k > a.n()) throw DomainError("number of communities must lie in [1, n]");
  v.spectral = spectral_cluster_perturbed(a, v.k, cfg.spectral, rng);
  v.counts = block_counts(a, v.spectral.labels, v.k);
  v.fit = fit_multinomial_mixture(v.counts, v.k, v.spectral.labels, cfg.em);
  v.log_density = multinomial_log_density(v.counts, v.fit.eta);
  return v;
}

struct CovariateViewFit {
  int k = 0;
  bool estimated = false;
  GaussianMixtureSelection selection;
  Matrix log_density;

  Labels labels() const { return hard_labels(selection.fit.responsibilities); }
};

inline CovariateViewFit fit_covariate_view(const Matrix& Y, KChoice K, const TestConfig& cfg) {
  CovariateViewFit v;
  v.selection = fit_gaussian_mixture(Y, K, cfg.em, cfg.gmm_k_max);
  v.k = v.selection.k;
  v.estimated = v.selection.estimated;
  v.log_density = gaussian_log_density(Y, v.selection.fit.mu, v.selection.fit.sigma);
  return v;
}

// ---------------------------------------------------------------------------
// Permutation machinery

inline std::vector<int> random_permutation(int n, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

struct PermutationOutcome {
  P2lrtStatistic observed;
  std::vector<double> perm_statistics;
  int stalled_replicates = 0;
};

/// Observed P2LRT plus M replicates in which the rows of view 2's component
/// densities are permuted. Single-view fits are permutation invariant and
/// are not recomputed.
inline PermutationOutcome permutation_p2lrt(const ComponentDensityMatrix& gd, const Vector& pi1, const Vector& pi2,
                                            int M, std::uint64_t master_seed, const TestConfig& cfg) {
  if (M < 1) throw DomainError("number of permutations must be at least 1");
  PermutationOutcome out;
  out.observed = p2lrt_statistic(CouplingProblem(gd, pi1, pi2), cfg.optimizer);
  out.perm_statistics.assign(static_cast<std::size_t>(M), 0.0);
  std::vector<char> stalled(static_cast<std::size_t>(M), 0);
  const int n = static_cast<int>(gd.n());
  parallel_for(static_cast<std::size_t>(M), cfg.threads, [&](std::size_t m) {
    try {
      auto perm = random_permutation(n, derive_seed(master_seed, Stream::permutation, m + 1));
      auto r = p2lrt_statistic(CouplingProblem(gd.permuted_view2(perm), pi1, pi2), cfg.optimizer);
      out.perm_statistics[m] = r.statistic;
      stalled[m] = r.optimum.stalled ? 1 : 0;
    } catch (const Error& e) {
      throw DomainError("permutation replicate " + std::to_string(m + 1) + " failed: " + e.what());
    }
  });
  for (char s : stalled) out.stalled_replicates += s;
  return out;
}

namespace detail {

inline void fill_common(TestResult& r, const PermutationOutcome& po, int M, std::uint64_t seed,
                        const TestConfig& cfg) {
  r.statistic = po.observed.statistic;
  r.perm_statistics = po.perm_statistics;
  r.p_value = compute_pvalue(r.statistic, r.perm_statistics, cfg.plus_one_pvalue);
  r.M = M;
  r.seed = seed;
  r.C_hat = po.observed.optimum.C;
  r.diagnostics["optimizer_iterations"] = po.observed.optimum.iterations;
  r.diagnostics["optimizer_converged"] = po.observed.optimum.converged;
  r.diagnostics["optimizer_stalled"] = po.observed.optimum.stalled;
  r.diagnostics["stalled_replicates"] = po.stalled_replicates;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// P2LRT for two networks from already-fitted single views.
inline TestResult p2lrt_from_fits(const NetworkViewFit& v1, const NetworkViewFit& v2, int M,
                                  std::uint64_t master_seed, const TestConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  ComponentDensityMatrix gd{v1.log_density, v2.log_density};
  auto po = permutation_p2lrt(gd, v1.fit.pi, v2.fit.pi, M, master_seed, cfg);
  TestResult r;
  r.test = "p2lrt-networks";
  detail::fill_common(r, po, M, master_seed, cfg);
  r.k1 = v1.k;
  r.k2 = v2.k;
  r.k1_estimated = v1.estimated;
  r.k2_estimated = v2.estimated;
  r.pi1 = v1.fit.pi;
  r.pi2 = v2.fit.pi;
  r.eta1 = v1.fit.eta;
  r.eta2 = v2.fit.eta;
  r.diagnostics["empty_clusters"] = {v1.spectral.empty_clusters, v2.spectral.empty_clusters};
  r.diagnostics["em_iterations"] = {v1.fit.iterations, v2.fit.iterations};
  r.diagnostics["em_converged"] = {v1.fit.converged, v2.fit.converged};
  r.runtime_ms = detail::elapsed_ms(t0);
  return r;
}

inline TestResult p2lrt_from_fits(const NetworkViewFit& v1, const CovariateViewFit& v2, int M,
                                  std::uint64_t master_seed, const TestConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  ComponentDensityMatrix gd{v1.log_density, v2.log_density};
  auto po = permutation_p2lrt(gd, v1.fit.pi, v2.selection.fit.pi, M, master_seed, cfg);
  TestResult r;
  r.test = "p2lrt-netcov";
  detail::fill_common(r, po, M, master_seed, cfg);
  r.k1 = v1.k;
  r.k2 = v2.k;
  r.k1_estimated = v1.estimated;
  r.k2_estimated = v2.estimated;
  r.pi1 = v1.fit.pi;
  r.pi2 = v2.selection.fit.pi;
  r.eta1 = v1.fit.eta;
  r.mu2 = v2.selection.fit.mu;
  r.sigma2 = v2.selection.fit.sigma;
  r.diagnostics["empty_clusters"] = v1.spectral.empty_clusters;
  r.diagnostics["em_iterations"] = {v1.fit.iterations, v2.selection.fit.iterations};
  if (v2.estimated) r.diagnostics["bic_by_k"] = v2.selection.bic_by_k;
  r.runtime_ms = detail::elapsed_ms(t0);
  return r;
}

/// Permutation P2LRT of independence between the community memberships of
/// two networks on a common node set.
inline TestResult permutation_test_networks(const AdjacencyView& a1, const AdjacencyView& a2, KChoice K1, KChoice K2,
                                            int M, const TestConfig& cfg, std::uint64_t master_seed) {
  if (a1.n() != a2.n()) throw DomainError("views have different node counts");
  auto t0 = std::chrono::steady_clock::now();
  Rng rng1 = make_rng(master_seed, Stream::spectral, 1);
  Rng rng2 = make_rng(master_seed, Stream::spectral, 2);
  auto v1 = fit_network_view(a1, K1, cfg, rng1);
  auto v2 = fit_network_view(a2, K2, cfg, rng2);
  auto r = p2lrt_from_fits(v1, v2, M, master_seed, cfg);
  r.runtime_ms = detail::elapsed_ms(t0);
  return r;
}

/// Same test with a multivariate second view modelled as a spherical
/// Gaussian mixture.
inline TestResult permutation_test_net_cov(const AdjacencyView& a, const Matrix& Y, KChoice K1, KChoice K2, int M,
                                           const TestConfig& cfg, std::uint64_t master_seed) {
  if (a.n() != Y.rows())
    throw DomainError("network has " + std::to_string(a.n()) + " nodes but the matrix has " +
                      std::to_string(Y.rows()) + " rows");
  auto t0 = std::chrono::steady_clock::now();
  Rng rng1 = make_rng(master_seed, Stream::spectral, 1);
  auto v1 = fit_network_view(a, K1, cfg, rng1);
  TestConfig local = cfg;
  local.em.seed = derive_seed(master_seed, Stream::gmm_init);
  auto v2 = fit_covariate_view(Y, K2, local);
  auto r = p2lrt_from_fits(v1, v2, M, master_seed, cfg);
  r.runtime_ms = detail::elapsed_ms(t0);
  return r;
}

// ---------------------------------------------------------------------------
// G-test baseline on hard label assignments

/// G = 2 sum_{O > 0} O log(O / E) for the contingency table of two labelings.
inline double g_statistic(const Labels& z1, const Labels& z2) {
  if (z1.size() != z2.size()) throw DomainError("label vectors differ in length");
  const int K1 = num_levels(z1), K2 = num_levels(z2);
  const auto n = static_cast<double>(z1.size());
  Matrix O = Matrix::Zero(K1, K2);
  for (std::size_t i = 0; i < z1.size(); ++i) {
    if (z1[i] < 0 || z2[i] < 0) throw DomainError("negative label");
    O(z1[i], z2[i]) += 1.0;
  }
  Vector rows = O.rowwise().sum();
  Vector cols = O.colwise().sum().transpose();
  double g = 0.0;
  for (int k = 0; k < K1; ++k)
    for (int l = 0; l < K2; ++l)
      if (O(k, l) > 0.0) g += O(k, l) * std::log(O(k, l) * n / (rows(k) * cols(l)));
  return 2.0 * g;
}

inline TestResult g_test(const Labels& z1, const Labels& z2, int M, std::uint64_t master_seed,
                         const TestConfig& cfg = {}) {
  if (z1.size() != z2.size()) throw DomainError("label vectors differ in length");
  if (M < 1) throw DomainError("number of permutations must be at least 1");
  auto t0 = std::chrono::steady_clock::now();
  TestResult r;
  r.test = "g-test";
  r.M = M;
  r.seed = master_seed;
  r.k1 = num_levels(z1);
  r.k2 = num_levels(z2);
  auto used = [](const Labels& z) {
    std::vector<char> seen(static_cast<std::size_t>(num_levels(z)), 0);
    for (int v : z) seen[static_cast<std::size_t>(v)] = 1;
    return std::count(seen.begin(), seen.end(), 1);
  };
  if (z1.empty() || used(z1) < 2 || used(z2) < 2) {
    r.statistic = 0.0;
    r.perm_statistics.assign(static_cast<std::size_t>(M), 0.0);
    r.p_value = 1.0;
    r.runtime_ms = detail::elapsed_ms(t0);
    return r;
  }
  r.statistic = g_statistic(z1, z2);
  r.perm_statistics.assign(static_cast<std::size_t>(M), 0.0);
  const int n = static_cast<int>(z1.size());
  parallel_for(static_cast<std::size_t>(M), cfg.threads, [&](std::size_t m) {
    auto perm = random_permutation(n, derive_seed(master_seed, Stream::gtest_permutation, m + 1));
    Labels z2p(z2.size());
    for (int i = 0; i < n; ++i) z2p[static_cast<std::size_t>(i)] = z2[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    r.perm_statistics[m] = g_statistic(z1, z2p);
  });
  r.p_value = compute_pvalue(r.statistic, r.perm_statistics, cfg.plus_one_pvalue);
  r.runtime_ms = detail::elapsed_ms(t0);
  return r;
}

}  // namespace multiview

#endif  // MULTIVIEW_INFERENCE_HPP
