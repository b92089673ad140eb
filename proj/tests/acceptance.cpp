// Acceptance checks. One PASS/FAIL/SKIP line per criterion; exits nonzero on any FAIL.
//
// MULTIVIEW_ACCEPTANCE_ONLY=1,4   run a subset
// MULTIVIEW_THREADS=8             worker threads (default: hardware concurrency)
// MULTIVIEW_HINT_BINARY, MULTIVIEW_HINT_COCOMPLEX   HINT H. sapiens edge lists for criterion 7
// MULTIVIEW_HINT_COLUMNS=1,2      1-based label columns in those files (header line skipped)

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace multiview;

namespace {

struct Outcome {
  enum Kind { pass, fail, skip } kind = fail;
  std::string detail;
};

unsigned thread_count() {
  if (const char* t = std::getenv("MULTIVIEW_THREADS")) return static_cast<unsigned>(std::max(1, std::atoi(t)));
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << v;
  return o.str();
}

// null calibration band shared by criteria 1 and 3
constexpr double kBandLo = 0.030, kBandHi = 0.072;

DesignPoint null_point(double delta) {
  DesignPoint p;
  p.n = 400;
  p.K = 3;
  p.r = 3.0;
  p.s = 0.03;
  p.delta = delta;
  return p;
}

const AggregateRow* find(const std::vector<AggregateRow>& agg, int point, const std::string& test, int k_fixed = 0) {
  for (const auto& g : agg)
    if (g.point == point && g.test == test && g.k_fixed == k_fixed) return &g;
  return nullptr;
}

Outcome criterion1() {
  StudySpec spec;
  spec.points = {null_point(0.0)};
  spec.tests = {StudyTest::p2lrt_true_k};
  spec.reps = 500;
  spec.M = 200;
  spec.seed = 101;
  auto agg = aggregate(run_study(spec, TestConfig{}, thread_count()));
  const auto* g = find(agg, 0, "p2lrt-true-K");
  std::string d = "rate " + fmt(g->rate) + " (" + std::to_string(g->rejections) + "/" + std::to_string(g->reps) +
                  ", errors " + std::to_string(g->errors) + "), band [0.030, 0.072]";
  bool ok = g->errors == 0 && g->rate >= kBandLo && g->rate <= kBandHi;
  return {ok ? Outcome::pass : Outcome::fail, d};
}

Outcome criterion2() {
  StudySpec spec;
  spec.points = {null_point(0.0), null_point(0.5), null_point(0.9)};
  spec.reps = 200;
  spec.M = 200;
  spec.seed = 202;
  auto agg = aggregate(run_study(spec, TestConfig{}, thread_count()));
  bool ok = true;
  std::ostringstream d;
  for (const char* test : {"p2lrt-true-K", "gtest-true-K", "p2lrt-auto-K", "gtest-auto-K"}) {
    d << test << ":";
    for (int p = 0; p < 3; ++p) {
      const auto* g = find(agg, p, test);
      d << ' ' << fmt(g->rate, 3);
      if (g->errors > 0) ok = false;
      if (p > 0) {
        const auto* prev = find(agg, p - 1, test);
        double se = std::sqrt(g->se * g->se + prev->se * prev->se);
        if (g->rate < prev->rate - 2.0 * se) ok = false;
      }
    }
    d << "; ";
  }
  for (const auto& [pl, gt] : {std::pair{"p2lrt-true-K", "gtest-true-K"}, std::pair{"p2lrt-auto-K", "gtest-auto-K"}}) {
    const auto* a = find(agg, 1, pl);
    const auto* b = find(agg, 1, gt);
    double se = std::sqrt(a->se * a->se + b->se * b->se);
    if (a->rate < b->rate - 2.0 * se) ok = false;
  }
  d << "(Delta = 0, 0.5, 0.9)";
  return {ok ? Outcome::pass : Outcome::fail, d.str()};
}

Outcome criterion3() {
  StudySpec spec;
  auto p = default_design(Generator::dcsbm_shared);
  p.delta = 0.0;
  spec.points = {p};
  spec.tests = {StudyTest::p2lrt_true_k};
  spec.k_sweep = {p.n};
  spec.reps = 200;
  spec.M = 200;
  spec.seed = 303;
  auto agg = aggregate(run_study(spec, TestConfig{}, thread_count()));
  const auto* t = find(agg, 0, "p2lrt-true-K");
  const auto* kn = find(agg, 0, "p2lrt-fixed-K", p.n);
  bool ok = t->errors == 0 && kn->errors == 0 && t->rate >= kBandLo && t->rate <= kBandHi && kn->rate > 0.10;
  return {ok ? Outcome::pass : Outcome::fail, "true K rate " + fmt(t->rate) + " (band [0.030, 0.072]); K = n rate " +
                                                  fmt(kn->rate) + " (> 0.10); errors " +
                                                  std::to_string(t->errors + kn->errors)};
}

Outcome criterion4() {
  const unsigned threads = thread_count();
  StudySpec null_spec;
  auto p = default_design(Generator::netcov);
  p.delta = 0.0;
  null_spec.points = {p};
  null_spec.tests = {StudyTest::p2lrt_true_k};
  null_spec.reps = 500;
  null_spec.M = 200;
  null_spec.seed = 404;
  auto rows = run_study(null_spec, TestConfig{}, threads);
  std::vector<double> pvals;
  int errors = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) ++errors;
    else pvals.push_back(r.p_value);
  }
  double ks = pvals.empty() ? 0.0 : oracle::ks_uniform_pvalue(pvals);

  StudySpec power_spec = null_spec;
  power_spec.points[0].delta = 0.9;
  power_spec.points[0].sigma = 1.0;
  power_spec.points[0].r = 3.0;
  power_spec.points[0].n = 500;
  power_spec.reps = 200;
  power_spec.seed = 405;
  auto agg = aggregate(run_study(power_spec, TestConfig{}, threads));
  const auto* g = find(agg, 0, "p2lrt-true-K");
  errors += g->errors;
  bool ok = errors == 0 && ks > 0.01 && g->rate >= 0.8;
  return {ok ? Outcome::pass : Outcome::fail, "null KS p " + fmt(ks) + " over " + std::to_string(pvals.size()) +
                                                  " runs (> 0.01); power " + fmt(g->rate) + " (>= 0.8); errors " +
                                                  std::to_string(errors)};
}

Vector random_simplex(int K, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Vector v(K);
  for (int k = 0; k < K; ++k) v(k) = u(rng);
  return v / v.sum();
}

Matrix random_logs(int n, int K, Rng& rng) {
  std::uniform_real_distribution<double> u(-6.0, 0.0);
  Matrix m(n, K);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) m(i, k) = u(rng);
  return m;
}

Outcome criterion5() {
  double worst_gap = 0.0, worst_marg = 0.0, min_stat = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(505, Stream::replicate, seed));
    Matrix g1 = random_logs(6, 2, rng), g2 = random_logs(6, 2, rng);
    Vector p1 = random_simplex(2, rng), p2 = random_simplex(2, rng);
    auto res = p2lrt_statistic({g1, g2}, p1, p2);
    const Matrix& C = res.optimum.C;
    oracle::Segment2x2 seg{p1(0), p2(0)};
    double best = oracle::maximize_on_segment(
        seg, [&](double t) { return oracle::joint_double_sum(g1, g2, p1, p2, seg.coupling(t)); });
    worst_gap = std::max(worst_gap, std::abs(res.optimum.objective - best));
    double marg = std::max(((C * p2).array() - 1.0).abs().maxCoeff(), ((C.transpose() * p1).array() - 1.0).abs().maxCoeff());
    worst_marg = std::max(worst_marg, marg);
    min_stat = std::min(min_stat, res.statistic);
  }
  bool ok = worst_gap <= 1e-6 && worst_marg <= 1e-7 && min_stat >= 0.0;
  return {ok ? Outcome::pass : Outcome::fail, "max |objective - oracle| " + fmt(worst_gap, 3) +
                                                  " (<= 1e-6); max marginal violation " + fmt(worst_marg, 3) +
                                                  " (<= 1e-7); min statistic " + fmt(min_stat, 3)};
}

Outcome criterion6() {
  // EM traces
  int traces = 0;
  double worst_drop = 0.0;
  auto scan = [&](const std::vector<double>& tr) {
    ++traces;
    for (std::size_t t = 1; t < tr.size(); ++t) worst_drop = std::max(worst_drop, tr[t - 1] - tr[t]);
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = simulate(null_point(0.5), derive_seed(606, Stream::replicate, seed));
    Rng rng(seed);
    auto sc = spectral_cluster_perturbed(d.view1, 3, SpectralConfig{}, rng);
    auto bc = block_counts(d.view1, sc.labels, 3);
    scan(fit_multinomial_mixture(bc, 3, sc.labels, EmConfig{}).trace);
    auto q = default_design(Generator::netcov);
    q.n = 300;
    auto dc = simulate(q, derive_seed(607, Stream::replicate, seed));
    EmConfig cfg;
    cfg.seed = seed;
    scan(fit_gaussian_mixture(*dc.covariates, 3, cfg).fit.trace);
  }
  bool em_ok = worst_drop <= 1e-9;

  // multinomial pmf against exact factorials
  double pmf_err = 0.0;
  Rng rng(608);
  for (int K = 1; K <= 4; ++K) {
    for (int rep = 0; rep < 3; ++rep) {
      Vector eta = random_simplex(K, rng);
      std::vector<double> eta_v(eta.data(), eta.data() + K);
      for (int d = 0; d <= 20; ++d) {
        std::vector<int> cur;
        oracle::compositions(d, K, cur, [&](const std::vector<int>& b) {
          Eigen::VectorXi bv(K);
          for (int k = 0; k < K; ++k) bv(k) = b[static_cast<std::size_t>(k)];
          double got = multinomial_log_pmf(bv, d, eta);
          double want = oracle::log_multinomial(b, eta_v);
          pmf_err = std::max(pmf_err, std::abs(got - want) / std::max(1.0, std::abs(want)));
        });
      }
    }
  }
  bool pmf_ok = pmf_err <= 1e-12;

  // joint pseudo-log-likelihood against the double sum
  double joint_err = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r(derive_seed(609, Stream::replicate, seed));
    const int K1 = 2 + static_cast<int>(seed % 3), K2 = 2 + static_cast<int>((seed / 3) % 3);
    Matrix g1 = random_logs(5, K1, r), g2 = random_logs(5, K2, r);
    Vector p1 = random_simplex(K1, r), p2 = random_simplex(K2, r);
    Matrix O = (random_logs(K1, K2, r) / 3.0).array().exp().matrix();
    Matrix C = sinkhorn_project(O, p1, p2).C;
    double got = joint_pseudo_loglik({g1, g2}, p1, p2, C);
    double want = oracle::joint_double_sum(g1, g2, p1, p2, C);
    joint_err = std::max(joint_err, std::abs(got - want));
  }
  bool joint_ok = joint_err <= 1e-10;

  bool ok = em_ok && pmf_ok && joint_ok;
  return {ok ? Outcome::pass : Outcome::fail,
          std::to_string(traces) + " EM traces, worst drop " + fmt(worst_drop, 3) + " (<= 1e-9); pmf rel error " +
              fmt(pmf_err, 3) + "; double-sum error " + fmt(joint_err, 3) + " (<= 1e-10)"};
}

Outcome criterion7() {
  const char* bin = std::getenv("MULTIVIEW_HINT_BINARY");
  const char* cc = std::getenv("MULTIVIEW_HINT_COCOMPLEX");
  if (!bin || !cc) return {Outcome::skip, "set MULTIVIEW_HINT_BINARY and MULTIVIEW_HINT_COCOMPLEX to run"};
  EdgeListFormat f;
  f.delimiter = '\t';
  f.num_columns = 0;
  f.skip_lines = 1;
  if (const char* cols = std::getenv("MULTIVIEW_HINT_COLUMNS")) {
    int a = 1, b = 2;
    if (std::sscanf(cols, "%d,%d", &a, &b) == 2) {
      f.col_a = a - 1;
      f.col_b = b - 1;
    }
  }
  auto aligned = align_views(load_edge_list(std::string(bin), f), load_edge_list(std::string(cc), f));
  const auto& s = aligned.summary;
  bool counts_ok = s.n == 9037 && s.edges_view1 == 43874 && s.edges_view2 == std::optional<std::size_t>(88960);
  TestConfig cfg;
  cfg.threads = thread_count();
  auto r = permutation_test_networks(aligned.view1, aligned.view2, std::nullopt, std::nullopt, 10000, cfg, 707);
  // "near 14": within two of the published count
  bool k_ok = std::abs(r.k1 - 14) <= 2 && std::abs(r.k2 - 14) <= 2;
  bool p_ok = r.p_value <= 0.05;
  bool ok = counts_ok && k_ok && p_ok;
  return {ok ? Outcome::pass : Outcome::fail,
          "n " + std::to_string(s.n) + ", edges " + std::to_string(s.edges_view1) + " / " +
              std::to_string(s.edges_view2.value_or(0)) + "; K " + std::to_string(r.k1) + ", " + std::to_string(r.k2) +
              "; p " + fmt(r.p_value)};
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* o = std::getenv("MULTIVIEW_ACCEPTANCE_ONLY")) {
    std::istringstream in(o);
    for (std::string tok; std::getline(in, tok, ',');) only.insert(std::stoi(tok));
  }
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}};
  const char* names[] = {"",
                         "type I error calibration",
                         "power ordering",
                         "degree-corrected robustness",
                         "network + covariate test",
                         "optimizer correctness",
                         "pseudo-likelihood machinery",
                         "HINT reproduction"};
  std::cout << "threads " << thread_count() << '\n';
  bool any_fail = false;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::skip ? "SKIP" : "FAIL";
    if (o.kind == Outcome::fail) any_fail = true;
    std::cout << tag << " criterion " << id << " (" << names[id] << "): " << o.detail << " [" << fmt(secs, 3) << " s]"
              << std::endl;
  }
  return any_fail ? 1 : 0;
}
