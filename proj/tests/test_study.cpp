#include "support.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace multiview;

namespace {

StudySpec tiny_spec() {
  StudySpec spec;
  DesignPoint a;
  a.n = 120;
  a.K = 2;
  a.s = 0.06;
  a.delta = 0.0;
  DesignPoint b = a;
  b.delta = 0.9;
  spec.points = {a, b};
  spec.reps = 6;
  spec.M = 40;
  spec.seed = 17;
  return spec;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Study, NamesRoundTrip) {
  for (auto g : {Generator::sbm, Generator::dcsbm, Generator::dcsbm_shared, Generator::netcov, Generator::dc_netcov})
    EXPECT_EQ(parse_generator(to_string(g)), g);
  EXPECT_EQ(to_string(Generator::dcsbm_shared), "dcsbm-shared-popularity");
  for (auto t : {StudyTest::p2lrt_true_k, StudyTest::p2lrt_auto_k, StudyTest::gtest_true_k, StudyTest::gtest_auto_k})
    EXPECT_EQ(parse_study_test(to_string(t)), t);
  EXPECT_THROW(parse_generator("nope"), Error);
}

TEST(Study, RowsAreDeterministicAcrossThreadCounts) {
  auto spec = tiny_spec();
  auto a = run_study(spec, TestConfig{}, 1);
  auto b = run_study(spec, TestConfig{}, 4);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), 2u * 6u * 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].test, b[i].test);
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].statistic, b[i].statistic);
    EXPECT_EQ(a[i].p_value, b[i].p_value);
  }
}

TEST(Study, AggregateIsRecomputableFromTidyRows) {
  auto spec = tiny_spec();
  auto rows = run_study(spec, TestConfig{}, 2);
  auto agg = aggregate(rows);
  EXPECT_EQ(agg.size(), 2u * 4u);
  for (const auto& g : agg) {
    int reps = 0, rej = 0;
    for (const auto& r : rows) {
      if (r.point != g.point || r.test != g.test || r.k_fixed != g.k_fixed || !r.error.empty()) continue;
      ++reps;
      EXPECT_EQ(r.rejected, r.p_value <= spec.alpha);
      if (r.rejected) ++rej;
    }
    EXPECT_EQ(g.reps, reps);
    EXPECT_EQ(g.rejections, rej);
    double rate = static_cast<double>(rej) / reps;
    EXPECT_DOUBLE_EQ(g.rate, rate);
    EXPECT_DOUBLE_EQ(g.se, std::sqrt(rate * (1.0 - rate) / reps));
  }
}

TEST(Study, StrongDependenceIsDetected) {
  auto spec = tiny_spec();
  spec.tests = {StudyTest::p2lrt_true_k};
  auto agg = aggregate(run_study(spec, TestConfig{}, 2));
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[1].rate, 1.0);
}

TEST(Study, InfeasibleDesignIsRecordedPerRow) {
  auto spec = tiny_spec();
  spec.points[1].s = 0.9;  // within-block probability above one
  auto rows = run_study(spec, TestConfig{}, 1);
  ASSERT_EQ(rows.size(), 2u * 6u * 4u);
  int errors = 0;
  for (const auto& r : rows) {
    if (r.point == 1) {
      EXPECT_NE(r.error.find("infeasible"), std::string::npos) << r.error;
      ++errors;
    } else {
      EXPECT_TRUE(r.error.empty()) << r.error;
    }
  }
  EXPECT_EQ(errors, 24);
  for (const auto& g : aggregate(rows))
    if (g.point == 1) {
      EXPECT_EQ(g.reps, 0);
      EXPECT_EQ(g.errors, 6);
    }
}

TEST(Study, KSweepAddsFixedKRows) {
  auto spec = tiny_spec();
  spec.points.resize(1);
  spec.reps = 2;
  spec.tests = {StudyTest::p2lrt_true_k};
  spec.k_sweep = {2, 3};
  auto rows = run_study(spec, TestConfig{}, 1);
  ASSERT_EQ(rows.size(), 2u * 3u);
  int sweep = 0;
  for (const auto& r : rows) {
    if (r.test != "p2lrt-fixed-K") continue;
    ++sweep;
    EXPECT_EQ(r.k1_used, r.k_fixed);
    EXPECT_EQ(r.k2_used, r.k_fixed);
  }
  EXPECT_EQ(sweep, 4);
}

TEST(Study, CsvLayouts) {
  auto spec = tiny_spec();
  spec.reps = 2;
  spec.points[1].s = 0.9;  // within-block probability above one
  auto rows = run_study(spec, TestConfig{}, 1);
  std::ostringstream tidy, agg;
  write_tidy_csv(tidy, spec, rows);
  write_aggregate_csv(agg, spec, aggregate(rows));
  auto t = lines(tidy.str());
  auto a = lines(agg.str());
  EXPECT_EQ(t.at(0), "generator,n,K,delta,r,s,sigma,replicate,seed,test,k_fixed,statistic,p_value,rejected,k1_used,"
                     "k2_used,error");
  EXPECT_EQ(a.at(0), "generator,n,K,delta,r,s,sigma,test,k_fixed,reps,rejections,errors,rejection_rate,se");
  EXPECT_EQ(t.size(), rows.size() + 1);
  EXPECT_EQ(a.size(), 2u * 4u + 1);
  EXPECT_EQ(t.at(1).rfind("sbm,120,2,0,3,0.059999999999999998,1,0,", 0), 0u) << t.at(1);
}

TEST(Study, ReplicateSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (int p = 0; p < 10; ++p)
    for (int r = 0; r < 200; ++r) seen.insert(replicate_seed(1, p, r));
  EXPECT_EQ(seen.size(), 2000u);
}

TEST(Study, SimulatedDatasetsMatchTheirGenerator) {
  for (auto g : {Generator::sbm, Generator::dcsbm, Generator::dcsbm_shared, Generator::netcov, Generator::dc_netcov}) {
    auto p = default_design(g);
    p.n = std::min(p.n, 100);
    auto d = simulate(p, 3);
    EXPECT_EQ(d.view1.n(), p.n);
    EXPECT_EQ(d.view2.has_value(), !has_covariates(g)) << to_string(g);
    EXPECT_EQ(d.covariates.has_value(), has_covariates(g)) << to_string(g);
    if (d.covariates) {
      EXPECT_EQ(d.covariates->rows(), p.n);
    }
  }
}
