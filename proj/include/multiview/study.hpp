#ifndef MULTIVIEW_STUDY_HPP
#define MULTIVIEW_STUDY_HPP

#include "multiview/common.hpp"
#include "multiview/inference.hpp"
#include "multiview/simgen.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace multiview {

enum class Generator { sbm, dcsbm, dcsbm_shared, netcov, dc_netcov };

inline std::string to_string(Generator g) {
  switch (g) {
    case Generator::sbm: return "sbm";
    case Generator::dcsbm: return "dcsbm";
    case Generator::dcsbm_shared: return "dcsbm-shared-popularity";
    case Generator::netcov: return "netcov";
    case Generator::dc_netcov: return "dc-netcov";
  }
  return "unknown";
}

inline Generator parse_generator(const std::string& s) {
  for (auto g : {Generator::sbm, Generator::dcsbm, Generator::dcsbm_shared, Generator::netcov, Generator::dc_netcov})
    if (to_string(g) == s) return g;
  throw InputError("unknown generator '" + s + "'");
}

inline bool has_covariates(Generator g) { return g == Generator::netcov || g == Generator::dc_netcov; }
inline bool degree_corrected(Generator g) { return g == Generator::dcsbm || g == Generator::dcsbm_shared || g == Generator::dc_netcov; }

/// One simulation setting. theta is either given explicitly or built from
/// (r, s) as a planted partition with uniform memberships.
struct DesignPoint {
  Generator generator = Generator::sbm;
  int n = 1000;
  int K = 6;
  double delta = 0.0;
  double r = 3.0;
  double s = 0.02;
  double sigma = 1.0;
  std::optional<Matrix> theta;
  PopularitySpec popularity;
  Matrix mu = default_covariate_means();

  SbmParams sbm_params() const {
    if (theta) return SbmParams{*theta, Vector::Constant(K, 1.0 / K)};
    return block_matrix(r, s, K);
  }
};

/// Defaults matching the published simulation settings for each generator.
inline DesignPoint default_design(Generator g) {
  DesignPoint p;
  p.generator = g;
  switch (g) {
    case Generator::sbm:
    case Generator::dcsbm:
      p.n = 1000;
      p.K = 6;
      p.s = 0.02;
      break;
    case Generator::dcsbm_shared:
      p.n = 50;
      p.K = 2;
      p.theta = (Matrix(2, 2) << 0.5, 0.25, 0.25, 1.0).finished();
      p.popularity = PopularitySpec::uniform(0.14, 0.84);
      break;
    case Generator::netcov:
    case Generator::dc_netcov:
      p.n = 500;
      p.K = 3;
      p.s = 0.015;
      break;
  }
  return p;
}

struct SimulatedData {
  Labels z1, z2;
  AdjacencyView view1;
  std::optional<AdjacencyView> view2;
  std::optional<Matrix> covariates;
  std::vector<double> popularity1, popularity2;
};

inline SimulatedData simulate(const DesignPoint& p, std::uint64_t seed) {
  SimulatedData d;
  auto coupling = coupling_matrix(p.delta, p.K);
  Rng rz = make_rng(seed, Stream::memberships);
  std::tie(d.z1, d.z2) = sample_joint_memberships(coupling, p.n, rz);
  const SbmParams params = p.sbm_params();
  Rng rp = make_rng(seed, Stream::popularity);
  Rng r1 = make_rng(seed, Stream::view1);
  Rng r2 = make_rng(seed, Stream::view2);

  if (degree_corrected(p.generator)) {
    d.popularity1 = sample_popularities(p.popularity, p.n, rp);
    d.view1 = sample_dcsbm(d.z1, d.popularity1, params, r1);
  } else {
    d.view1 = sample_sbm(d.z1, params, r1);
  }

  if (has_covariates(p.generator)) {
    if (p.mu.cols() != p.K) throw DomainError("covariate mean matrix needs K columns");
    Rng rc = make_rng(seed, Stream::covariates);
    d.covariates = sample_gmm(d.z2, GmmParams{p.mu, p.sigma}, rc);
  } else if (p.generator == Generator::dcsbm_shared) {
    d.popularity2 = sample_popularities(PopularitySpec::shared(), p.n, rp, &d.popularity1);
    d.view2 = sample_dcsbm(d.z2, d.popularity2, params, r2);
  } else if (p.generator == Generator::dcsbm) {
    d.popularity2 = sample_popularities(p.popularity, p.n, rp);
    d.view2 = sample_dcsbm(d.z2, d.popularity2, params, r2);
  } else {
    d.view2 = sample_sbm(d.z2, params, r2);
  }
  return d;
}

enum class StudyTest { p2lrt_true_k, p2lrt_auto_k, gtest_true_k, gtest_auto_k };

inline std::string to_string(StudyTest t) {
  switch (t) {
    case StudyTest::p2lrt_true_k: return "p2lrt-true-K";
    case StudyTest::p2lrt_auto_k: return "p2lrt-auto-K";
    case StudyTest::gtest_true_k: return "gtest-true-K";
    case StudyTest::gtest_auto_k: return "gtest-auto-K";
  }
  return "unknown";
}

inline StudyTest parse_study_test(const std::string& s) {
  for (auto t : {StudyTest::p2lrt_true_k, StudyTest::p2lrt_auto_k, StudyTest::gtest_true_k, StudyTest::gtest_auto_k})
    if (to_string(t) == s) return t;
  throw InputError("unknown test '" + s + "'");
}

struct StudyRow {
  int point = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string test;
  int k_fixed = 0;  // > 0 in K-sweep rows
  double statistic = std::nan("");
  double p_value = std::nan("");
  bool rejected = false;
  int k1_used = 0;
  int k2_used = 0;
  std::string error;
};

struct StudySpec {
  std::vector<DesignPoint> points;
  std::vector<StudyTest> tests{StudyTest::p2lrt_true_k, StudyTest::p2lrt_auto_k, StudyTest::gtest_true_k,
                               StudyTest::gtest_auto_k};
  // When nonempty, also runs the P2LRT with K1 = K2 = k for each k listed.
  std::vector<int> k_sweep;
  int reps = 200;
  int M = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
};

inline std::uint64_t replicate_seed(std::uint64_t master, int point, int rep) {
  return derive_seed(derive_seed(master, Stream::replicate, static_cast<std::uint64_t>(point)), Stream::replicate,
                     static_cast<std::uint64_t>(rep));
}

namespace detail {

struct ViewPair {
  NetworkViewFit v1;
  std::optional<NetworkViewFit> net2;
  std::optional<CovariateViewFit> cov2;
};

inline ViewPair fit_pair(const SimulatedData& d, KChoice k, std::uint64_t seed, const TestConfig& cfg) {
  Rng rng1 = make_rng(seed, Stream::spectral, 1);
  Rng rng2 = make_rng(seed, Stream::spectral, 2);
  ViewPair vp{fit_network_view(d.view1, k, cfg, rng1), std::nullopt, std::nullopt};
  if (d.covariates) {
    TestConfig local = cfg;
    local.em.seed = derive_seed(seed, Stream::gmm_init);
    vp.cov2 = fit_covariate_view(*d.covariates, k, local);
  } else {
    vp.net2 = fit_network_view(*d.view2, k, cfg, rng2);
  }
  return vp;
}

inline TestResult run_p2lrt(const ViewPair& vp, int M, std::uint64_t seed, const TestConfig& cfg) {
  return vp.net2 ? p2lrt_from_fits(vp.v1, *vp.net2, M, seed, cfg) : p2lrt_from_fits(vp.v1, *vp.cov2, M, seed, cfg);
}

inline TestResult run_gtest(const ViewPair& vp, int M, std::uint64_t seed, const TestConfig& cfg) {
  Labels z2 = vp.net2 ? vp.net2->labels() : vp.cov2->labels();
  auto r = g_test(vp.v1.labels(), z2, M, seed, cfg);
  r.k1 = vp.v1.k;
  r.k2 = vp.net2 ? vp.net2->k : vp.cov2->k;
  return r;
}

}  // namespace detail

/// Simulates one dataset and runs every requested test on it. Failures are
/// recorded per row rather than thrown.
inline std::vector<StudyRow> run_replicate(const StudySpec& spec, int point, int rep, const TestConfig& cfg) {
  const DesignPoint& p = spec.points[static_cast<std::size_t>(point)];
  const std::uint64_t seed = replicate_seed(spec.seed, point, rep);
  std::vector<StudyRow> rows;
  auto base_row = [&](const std::string& test, int k_fixed) {
    StudyRow r;
    r.point = point;
    r.replicate = rep;
    r.seed = seed;
    r.test = test;
    r.k_fixed = k_fixed;
    return r;
  };

  SimulatedData data;
  try {
    data = simulate(p, seed);
  } catch (const Error& e) {
    for (auto t : spec.tests) {
      auto r = base_row(to_string(t), 0);
      r.error = std::string("simulate: ") + e.what();
      rows.push_back(r);
    }
    return rows;
  }

  auto record = [&](StudyRow r, const TestResult& res) {
    r.statistic = res.statistic;
    r.p_value = res.p_value;
    r.rejected = res.p_value <= spec.alpha;
    r.k1_used = res.k1;
    r.k2_used = res.k2;
    rows.push_back(r);
  };

  auto run_mode = [&](KChoice k, const std::vector<std::pair<StudyTest, bool>>& tests, int k_fixed) {
    if (tests.empty()) return;
    std::optional<detail::ViewPair> vp;
    std::string fit_error;
    try {
      vp = detail::fit_pair(data, k, seed, cfg);
    } catch (const Error& e) {
      fit_error = std::string("fit: ") + e.what();
    }
    for (auto [t, is_p2lrt] : tests) {
      auto row = base_row(k_fixed > 0 ? "p2lrt-fixed-K" : to_string(t), k_fixed);
      if (!vp) {
        row.error = fit_error;
        rows.push_back(row);
        continue;
      }
      try {
        record(row, is_p2lrt ? detail::run_p2lrt(*vp, spec.M, seed, cfg) : detail::run_gtest(*vp, spec.M, seed, cfg));
      } catch (const Error& e) {
        row.error = e.what();
        rows.push_back(row);
      }
    }
  };

  std::vector<std::pair<StudyTest, bool>> true_k, auto_k;
  for (auto t : spec.tests) {
    switch (t) {
      case StudyTest::p2lrt_true_k: true_k.emplace_back(t, true); break;
      case StudyTest::gtest_true_k: true_k.emplace_back(t, false); break;
      case StudyTest::p2lrt_auto_k: auto_k.emplace_back(t, true); break;
      case StudyTest::gtest_auto_k: auto_k.emplace_back(t, false); break;
    }
  }
  run_mode(p.K, true_k, 0);
  run_mode(std::nullopt, auto_k, 0);
  for (int k : spec.k_sweep) run_mode(k, {{StudyTest::p2lrt_true_k, true}}, k);
  return rows;
}

/// Runs every (point, replicate) task; rows come back in task order.
inline std::vector<StudyRow> run_study(const StudySpec& spec, const TestConfig& cfg, unsigned threads = 1) {
  const std::size_t tasks = spec.points.size() * static_cast<std::size_t>(spec.reps);
  std::vector<std::vector<StudyRow>> out(tasks);
  TestConfig inner = cfg;
  inner.threads = 1;
  parallel_for(tasks, threads, [&](std::size_t t) {
    int point = static_cast<int>(t / static_cast<std::size_t>(spec.reps));
    int rep = static_cast<int>(t % static_cast<std::size_t>(spec.reps));
    out[t] = run_replicate(spec, point, rep, inner);
  });
  std::vector<StudyRow> rows;
  for (auto& v : out)
    for (auto& r : v) rows.push_back(std::move(r));
  return rows;
}

struct AggregateRow {
  int point = 0;
  std::string test;
  int k_fixed = 0;
  int reps = 0;
  int rejections = 0;
  int errors = 0;
  double rate = 0.0;
  double se = 0.0;
};

/// Rejection rate and binomial standard error per (point, test, k_fixed),
/// over rows without errors.
inline std::vector<AggregateRow> aggregate(const std::vector<StudyRow>& rows) {
  std::map<std::tuple<int, std::string, int>, AggregateRow> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.point, r.test, r.k_fixed}];
    g.point = r.point;
    g.test = r.test;
    g.k_fixed = r.k_fixed;
    if (!r.error.empty()) {
      ++g.errors;
      continue;
    }
    ++g.reps;
    if (r.rejected) ++g.rejections;
  }
  std::vector<AggregateRow> out;
  for (auto& [key, g] : groups) {
    if (g.reps > 0) {
      g.rate = static_cast<double>(g.rejections) / g.reps;
      g.se = std::sqrt(g.rate * (1.0 - g.rate) / g.reps);
    }
    out.push_back(g);
  }
  return out;
}

namespace detail {
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline void write_point_fields(std::ostream& out, const DesignPoint& p) {
  out << to_string(p.generator) << ',' << p.n << ',' << p.K << ',' << p.delta << ',' << p.r << ',' << p.s << ','
      << p.sigma;
}
}  // namespace detail

inline void write_tidy_csv(std::ostream& out, const StudySpec& spec, const std::vector<StudyRow>& rows) {
  out.precision(17);
  out << "generator,n,K,delta,r,s,sigma,replicate,seed,test,k_fixed,statistic,p_value,rejected,k1_used,k2_used,error\n";
  for (const auto& r : rows) {
    detail::write_point_fields(out, spec.points[static_cast<std::size_t>(r.point)]);
    out << ',' << r.replicate << ',' << r.seed << ',' << r.test << ',' << r.k_fixed << ',';
    if (r.error.empty()) out << r.statistic << ',' << r.p_value << ',' << (r.rejected ? 1 : 0);
    else out << ",,";
    out << ',' << r.k1_used << ',' << r.k2_used << ',' << detail::csv_field(r.error) << '\n';
  }
}

inline void write_aggregate_csv(std::ostream& out, const StudySpec& spec, const std::vector<AggregateRow>& rows) {
  out.precision(17);
  out << "generator,n,K,delta,r,s,sigma,test,k_fixed,reps,rejections,errors,rejection_rate,se\n";
  for (const auto& g : rows) {
    detail::write_point_fields(out, spec.points[static_cast<std::size_t>(g.point)]);
    out << ',' << g.test << ',' << g.k_fixed << ',' << g.reps << ',' << g.rejections << ',' << g.errors << ','
        << g.rate << ',' << g.se << '\n';
  }
}

}  // namespace multiview

#endif  // MULTIVIEW_STUDY_HPP
