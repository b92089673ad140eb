// multiview: command-line front end for the two-view community dependence test.

#include "multiview.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace fs = std::filesystem;
using namespace multiview;

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  auto j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(row);
  }
  return j;
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json labels_json(const Labels& z) {
  auto j = nlohmann::json::array();
  for (int v : z) j.push_back(v + 1);
  return j;
}

KChoice parse_k(const std::string& s, const char* flag) {
  if (s == "auto") return std::nullopt;
  try {
    std::size_t pos = 0;
    int k = std::stoi(s, &pos);
    if (pos == s.size() && k >= 1) return k;
  } catch (const std::exception&) {
  }
  throw InputError(std::string(flag) + " must be a positive integer or 'auto', got '" + s + "'");
}

char parse_delimiter(const std::string& s) {
  if (s == "tab" || s == "\\t") return '\t';
  if (s == "space" || s == "whitespace") return ' ';
  if (s == "comma") return ',';
  if (s.size() == 1) return s[0];
  throw InputError("unsupported delimiter '" + s + "'");
}

// Shared edge-list parsing flags.
struct EdgeFlags {
  std::string delimiter = "tab";
  int skip_lines = 0;
  std::vector<int> columns{1, 2};
  int num_columns = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--delimiter", delimiter, "Edge-list field separator: tab, space (runs of blanks), comma, or one character")
        ->capture_default_str();
    cmd->add_option("--skip-header", skip_lines, "Leading lines to skip in each edge list")->capture_default_str();
    cmd->add_option("--columns", columns, "1-based columns holding the two endpoint labels")
        ->expected(2)
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--num-columns", num_columns, "Required number of fields per line (0 = any)")
        ->capture_default_str();
  }

  EdgeListFormat format() const {
    EdgeListFormat f;
    f.delimiter = parse_delimiter(delimiter);
    f.skip_lines = skip_lines;
    if (columns[0] < 1 || columns[1] < 1) throw InputError("--columns are 1-based");
    f.col_a = columns[0] - 1;
    f.col_b = columns[1] - 1;
    f.num_columns = num_columns;
    return f;
  }
};

std::vector<LabelPair> read_edges(const std::string& path, const EdgeListFormat& fmt) {
  auto in = open_input(path);
  try {
    return load_edge_list(in, fmt);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Options common to the two test subcommands.
struct TestFlags {
  std::string k1 = "auto";
  std::string k2 = "auto";
  int perms = 1000;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::string out = "multiview_out";
  unsigned threads = default_threads();
  std::string format = "json";
  bool plus_one = false;
  bool perm_csv = true;

  void add(CLI::App* cmd) {
    cmd->add_option("--k1", k1, "Communities in view 1: integer or auto")->capture_default_str();
    cmd->add_option("--k2", k2, "Components in view 2: integer or auto")->capture_default_str();
    cmd->add_option("--perms", perms, "Number of permutations M")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
    cmd->add_option("--alpha", alpha, "Significance level used for the reported decision")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--out", out, "Output directory")->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--format", format, "Summary printed to stdout")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    cmd->add_flag("--plus-one", plus_one, "Report (1 + count) / (1 + M) instead of count / M");
  }

  TestConfig config() const {
    TestConfig cfg;
    cfg.threads = threads;
    cfg.plus_one_pvalue = plus_one;
    return cfg;
  }
};

void write_outputs(const TestResult& r, const TestFlags& f, const nlohmann::json& ingest) {
  fs::create_directories(f.out);
  const fs::path dir(f.out);
  auto j = r.to_json();
  j["alpha"] = f.alpha;
  j["rejected"] = r.p_value <= f.alpha;
  j["pi1"] = vector_json(r.pi1);
  j["pi2"] = vector_json(r.pi2);
  j["C_hat"] = matrix_json(r.C_hat);
  {
    auto o = open_output(dir / "result.json");
    o << j.dump(2) << '\n';
  }
  {
    auto o = open_output(dir / "C_hat.csv");
    write_matrix_csv(o, r.C_hat);
  }
  {
    auto o = open_output(dir / "pi1.csv");
    write_matrix_csv(o, r.pi1);
  }
  {
    auto o = open_output(dir / "pi2.csv");
    write_matrix_csv(o, r.pi2);
  }
  {
    auto o = open_output(dir / "perm_statistics.csv");
    o << "statistic\n";
    for (double v : r.perm_statistics) o << v << '\n';
  }
  {
    auto o = open_output(dir / "ingest.json");
    o << ingest.dump(2) << '\n';
  }

  std::cout.precision(10);
  if (f.format == "json") {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "test,statistic,p_value,M,seed,k1,k2,k_source,rejected,runtime_ms\n"
              << r.test << ',' << r.statistic << ',' << r.p_value << ',' << r.M << ',' << r.seed << ',' << r.k1
              << ',' << r.k2 << ',' << r.k_source() << ',' << (r.p_value <= f.alpha ? 1 : 0) << ',' << r.runtime_ms
              << '\n';
  }
}

int cmd_test_networks(const std::string& p1, const std::string& p2, const EdgeFlags& ef, const TestFlags& tf) {
  auto fmt = ef.format();
  auto a = read_edges(p1, fmt);
  auto b = read_edges(p2, fmt);
  auto aligned = align_views(a, b);
  std::cerr << "aligned: n=" << aligned.summary.n << ", edges " << aligned.summary.edges_view1 << " / "
            << *aligned.summary.edges_view2 << '\n';
  auto r = permutation_test_networks(aligned.view1, aligned.view2, parse_k(tf.k1, "--k1"), parse_k(tf.k2, "--k2"),
                                     tf.perms, tf.config(), tf.seed);
  write_outputs(r, tf, aligned.summary.to_json());
  return 0;
}

int cmd_test_netcov(const std::string& edges, const std::string& matrix, bool row_labels, bool header,
                    const EdgeFlags& ef, const TestFlags& tf) {
  auto pairs = read_edges(edges, ef.format());
  auto min = open_input(matrix);
  LabeledMatrix lm;
  try {
    lm = read_matrix_csv(min, header, row_labels);
  } catch (const InputError& e) {
    throw InputError(matrix + ": " + e.what());
  }

  SingleView sv;
  Matrix Y;
  if (row_labels) {
    std::unordered_map<std::string, Eigen::Index> row_of;
    for (std::size_t i = 0; i < lm.row_labels.size(); ++i)
      if (!row_of.emplace(lm.row_labels[i], static_cast<Eigen::Index>(i)).second)
        throw InputError(matrix + ": duplicate row label '" + lm.row_labels[i] + "'");
    sv = align_single(pairs, &lm.row_labels);
    Y.resize(sv.universe.size(), lm.values.cols());
    for (int i = 0; i < sv.universe.size(); ++i) Y.row(i) = lm.values.row(row_of.at(sv.universe.label(i)));
  } else {
    // Rows are matched to nodes in sorted label order.
    sv = align_single(pairs);
    Y = std::move(lm.values);
  }
  std::cerr << "aligned: n=" << sv.summary.n << ", edges " << sv.summary.edges_view1 << ", matrix " << Y.rows() << "x"
            << Y.cols() << '\n';
  auto r = permutation_test_net_cov(sv.view, Y, parse_k(tf.k1, "--k1"), parse_k(tf.k2, "--k2"), tf.perms,
                                    tf.config(), tf.seed);
  auto ingest = sv.summary.to_json();
  ingest["matrix_rows"] = lm.values.rows();
  ingest["matrix_columns"] = Y.cols();
  write_outputs(r, tf, ingest);
  return 0;
}

struct SimFlags {
  std::string generator = "sbm";
  std::optional<int> n, K;
  double delta = 0.0;
  std::optional<double> r, s, sigma;
  std::uint64_t seed = 1;
  std::string out = "simulated";
};

DesignPoint design_from(const std::string& generator, std::optional<int> n, std::optional<int> K) {
  DesignPoint p = default_design(parse_generator(generator));
  if (n) p.n = *n;
  if (K) {
    if (p.theta && *K != p.K) throw InputError("this generator has a fixed block matrix with K = 2");
    p.K = *K;
  }
  return p;
}

int cmd_simulate(const SimFlags& f) {
  DesignPoint p = design_from(f.generator, f.n, f.K);
  p.delta = f.delta;
  if (f.r) p.r = *f.r;
  if (f.s) p.s = *f.s;
  if (f.sigma) p.sigma = *f.sigma;
  auto d = simulate(p, f.seed);

  fs::create_directories(f.out);
  const fs::path dir(f.out);
  auto labels = padded_node_labels(p.n);
  {
    auto o = open_output(dir / "view1.tsv");
    write_edge_list(o, d.view1, labels);
  }
  if (d.view2) {
    auto o = open_output(dir / "view2.tsv");
    write_edge_list(o, *d.view2, labels);
  }
  if (d.covariates) {
    auto o = open_output(dir / "covariates.csv");
    write_labeled_rows_csv(o, labels, *d.covariates);
  }

  nlohmann::json truth;
  truth["generator"] = to_string(p.generator);
  truth["seed"] = f.seed;
  truth["n"] = p.n;
  truth["K"] = p.K;
  truth["Delta"] = p.delta;
  const SbmParams sp = p.sbm_params();
  truth["theta"] = matrix_json(sp.theta);
  if (!p.theta) {
    truth["r"] = p.r;
    truth["s"] = p.s;
  }
  if (d.covariates) {
    truth["sigma"] = p.sigma;
    truth["mu"] = matrix_json(p.mu);
  }
  truth["labels"] = labels;
  truth["z1"] = labels_json(d.z1);
  truth["z2"] = labels_json(d.z2);
  if (!d.popularity1.empty()) truth["delta1"] = d.popularity1;
  if (!d.popularity2.empty()) truth["delta2"] = d.popularity2;
  auto o = open_output(dir / "truth.json");
  o << truth.dump(2) << '\n';
  std::cerr << "wrote " << dir.string() << ": view1 " << d.view1.num_edges() << " edges";
  if (d.view2) std::cerr << ", view2 " << d.view2->num_edges() << " edges";
  std::cerr << '\n';
  return 0;
}

std::vector<int> parse_k_sweep(const std::string& s, int n) {
  std::vector<int> out;
  if (s.empty()) return out;
  auto value = [&](const std::string& t) {
    if (t == "n") return n;
    std::size_t pos = 0;
    int v = std::stoi(t, &pos);
    if (pos != t.size() || v < 1) throw InputError("bad --k-sweep entry '" + t + "'");
    return v;
  };
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto colon = tok.find(':');
    try {
      if (colon == std::string::npos) {
        out.push_back(value(tok));
      } else {
        int a = value(tok.substr(0, colon)), b = value(tok.substr(colon + 1));
        for (int k = a; k <= b; ++k) out.push_back(k);
      }
    } catch (const std::logic_error&) {
      throw InputError("bad --k-sweep entry '" + tok + "'");
    }
  }
  return out;
}

struct StudyFlags {
  std::string generator = "sbm";
  std::optional<int> n, K;
  std::vector<double> grid_delta{0.0};
  std::vector<double> grid_r, grid_s, grid_sigma;
  std::vector<std::string> tests{"p2lrt-true-K", "p2lrt-auto-K", "gtest-true-K", "gtest-auto-K"};
  std::string k_sweep;
  int reps = 200;
  int perms = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::string out = "power_study";
  unsigned threads = default_threads();
};

int cmd_power_study(const StudyFlags& f) {
  StudySpec spec;
  spec.reps = f.reps;
  spec.M = f.perms;
  spec.alpha = f.alpha;
  spec.seed = f.seed;
  spec.tests.clear();
  for (const auto& t : f.tests) spec.tests.push_back(parse_study_test(t));
  DesignPoint base = design_from(f.generator, f.n, f.K);
  spec.k_sweep = parse_k_sweep(f.k_sweep, base.n);

  auto or_default = [](const std::vector<double>& v, double d) { return v.empty() ? std::vector<double>{d} : v; };
  for (double delta : f.grid_delta)
    for (double r : or_default(f.grid_r, base.r))
      for (double s : or_default(f.grid_s, base.s))
        for (double sigma : or_default(f.grid_sigma, base.sigma)) {
          DesignPoint p = base;
          p.delta = delta;
          p.r = r;
          p.s = s;
          p.sigma = sigma;
          spec.points.push_back(p);
        }

  std::cerr << "power study: " << spec.points.size() << " grid points x " << spec.reps << " replicates\n";
  auto rows = run_study(spec, TestConfig{}, f.threads);
  fs::create_directories(f.out);
  const fs::path dir(f.out);
  {
    auto o = open_output(dir / "tidy.csv");
    write_tidy_csv(o, spec, rows);
  }
  auto agg = aggregate(rows);
  {
    auto o = open_output(dir / "aggregate.csv");
    write_aggregate_csv(o, spec, agg);
  }
  write_aggregate_csv(std::cout, spec, agg);
  return 0;
}

int cmd_estimate_k(const std::string& edges, const std::string& matrix, bool row_labels, bool header,
                   const EdgeFlags& ef, int k_max, const std::string& format) {
  nlohmann::json j;
  if (!edges.empty()) {
    auto sv = align_single(read_edges(edges, ef.format()));
    j["method"] = "bethe-hessian";
    j["n"] = sv.summary.n;
    j["k"] = estimate_num_communities(sv.view);
  } else {
    auto in = open_input(matrix);
    auto lm = read_matrix_csv(in, header, row_labels);
    auto sel = fit_gaussian_mixture(lm.values, std::nullopt, EmConfig{}, k_max);
    j["method"] = "gaussian-mixture-bic";
    j["n"] = lm.values.rows();
    j["k"] = sel.k;
    j["bic_by_k"] = sel.bic_by_k;
  }
  if (format == "json") std::cout << j.dump(2) << '\n';
  else std::cout << "method,n,k\n" << j["method"].get<std::string>() << ',' << j["n"] << ',' << j["k"] << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation test of dependence between the communities of two data views"};
  app.require_subcommand(1);

  EdgeFlags ef;
  TestFlags tf;

  auto* tn = app.add_subcommand("test-networks", "Test two networks on a common node set");
  std::string tn_a, tn_b;
  tn->add_option("edges1", tn_a, "First edge list")->required();
  tn->add_option("edges2", tn_b, "Second edge list")->required();
  ef.add(tn);
  tf.add(tn);

  auto* tc = app.add_subcommand("test-netcov", "Test a network against a numeric node matrix");
  std::string tc_edges, tc_matrix;
  bool tc_row_labels = false, tc_header = false;
  tc->add_option("edges", tc_edges, "Edge list")->required();
  tc->add_option("matrix", tc_matrix, "Numeric CSV, one row per node")->required();
  tc->add_flag("--row-labels", tc_row_labels, "First matrix column holds node labels");
  tc->add_flag("--header", tc_header, "Matrix file starts with a header line");
  ef.add(tc);
  tf.add(tc);

  SimFlags sf;
  auto* sim = app.add_subcommand("simulate", "Write one synthetic dataset with its ground truth");
  sim->add_option("--generator", sf.generator, "sbm, dcsbm, dcsbm-shared-popularity, netcov or dc-netcov")
      ->capture_default_str();
  sim->add_option("--n", sf.n, "Number of nodes");
  sim->add_option("--K", sf.K, "Number of communities");
  sim->add_option("--delta", sf.delta, "Dependence strength in [0, 1]")->capture_default_str();
  sim->add_option("--r", sf.r, "Within/between block probability ratio");
  sim->add_option("--s", sf.s, "Expected edge density");
  sim->add_option("--sigma", sf.sigma, "Covariate noise standard deviation");
  sim->add_option("--seed", sf.seed, "Seed")->capture_default_str();
  sim->add_option("--out", sf.out, "Output directory")->capture_default_str();

  StudyFlags pf;
  auto* ps = app.add_subcommand("power-study", "Simulate a grid of designs and tabulate rejection rates");
  ps->add_option("--generator", pf.generator, "Data generator")->capture_default_str();
  ps->add_option("--n", pf.n, "Number of nodes");
  ps->add_option("--K", pf.K, "Number of communities");
  ps->add_option("--grid-delta", pf.grid_delta, "Delta values")->delimiter(',')->capture_default_str();
  ps->add_option("--grid-r", pf.grid_r, "r values")->delimiter(',');
  ps->add_option("--grid-s", pf.grid_s, "s values")->delimiter(',');
  ps->add_option("--grid-sigma", pf.grid_sigma, "sigma values")->delimiter(',');
  ps->add_option("--tests", pf.tests, "Tests to run")->delimiter(',')->capture_default_str();
  ps->add_option("--k-sweep", pf.k_sweep, "Also run the P2LRT with each fixed K, e.g. 2:10 or 2,5,n");
  ps->add_option("--reps", pf.reps, "Replicates per grid point")->check(CLI::PositiveNumber)->capture_default_str();
  ps->add_option("--perms", pf.perms, "Permutations per test")->check(CLI::PositiveNumber)->capture_default_str();
  ps->add_option("--alpha", pf.alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  ps->add_option("--seed", pf.seed, "Master seed")->capture_default_str();
  ps->add_option("--out", pf.out, "Output directory")->capture_default_str();
  ps->add_option("--threads", pf.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  auto* ek = app.add_subcommand("estimate-k", "Estimate the number of communities or mixture components");
  std::string ek_edges, ek_matrix, ek_format = "json";
  bool ek_row_labels = false, ek_header = false;
  int ek_kmax = 10;
  auto* ek_e = ek->add_option("--edges", ek_edges, "Edge list (Bethe Hessian)");
  auto* ek_m = ek->add_option("--matrix", ek_matrix, "Numeric CSV (Gaussian mixture BIC)");
  ek_e->excludes(ek_m);
  ek->add_flag("--row-labels", ek_row_labels, "First matrix column holds node labels");
  ek->add_flag("--header", ek_header, "Matrix file starts with a header line");
  ek->add_option("--k-max", ek_kmax, "Largest mixture size tried")->check(CLI::PositiveNumber)->capture_default_str();
  ek->add_option("--format", ek_format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  ef.add(ek);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (tn->parsed()) return cmd_test_networks(tn_a, tn_b, ef, tf);
    if (tc->parsed()) return cmd_test_netcov(tc_edges, tc_matrix, tc_row_labels, tc_header, ef, tf);
    if (sim->parsed()) return cmd_simulate(sf);
    if (ps->parsed()) return cmd_power_study(pf);
    if (ek->parsed()) {
      if (ek_edges.empty() && ek_matrix.empty()) throw InputError("estimate-k needs --edges or --matrix");
      return cmd_estimate_k(ek_edges, ek_matrix, ek_row_labels, ek_header, ef, ek_kmax, ek_format);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
