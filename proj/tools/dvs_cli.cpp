#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvs/dvs.hpp"

namespace {

using nlohmann::ordered_json;

struct Options {
  std::string input;
  std::string format = "csv";
  bool has_header = false;
  std::string orientation = "columns-as-given";
  std::string k_spec;
  std::string method = "dvs-exact";
  std::uint64_t seed = 0;
  std::optional<long> steps;
  double beta = 1.0;
  std::optional<double> eps;
  double delta2 = 0.25;
  std::string criterion = "D";
  int replicates = 1;
  std::string response_column;
  bool standardize = false;
  std::string output;
  std::string output_format = "json";
  double rank_tol_scale = dvs::kDefaultRankTolScale;
};

dvs::TableFormat parse_format(const std::string& name) {
  if (name == "csv") return dvs::TableFormat::kCsv;
  if (name == "tsv") return dvs::TableFormat::kTsv;
  if (name == "whitespace") return dvs::TableFormat::kWhitespace;
  throw std::domain_error("unknown format '" + name + "'");
}

dvs::Orientation parse_orientation(const std::string& name) {
  if (name == "samples-as-rows") return dvs::Orientation::kSamplesAsRows;
  if (name == "columns-as-given") return dvs::Orientation::kColumnsAsGiven;
  throw std::domain_error("unknown orientation '" + name + "'");
}

dvs::Criterion parse_criterion(const std::string& name) {
  if (name == "A") return dvs::Criterion::kA;
  if (name == "E") return dvs::Criterion::kE;
  if (name == "D") return dvs::Criterion::kD;
  throw std::domain_error("unknown criterion '" + name + "' (expected A, E, or D)");
}

std::vector<int> parse_k_list(const std::string& spec) {
  std::vector<int> out;
  std::stringstream stream(spec);
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (token.empty()) continue;
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) throw std::domain_error("bad k value '" + token + "'");
    out.push_back(value);
  }
  if (out.empty()) throw std::domain_error("--k requires at least one value");
  return out;
}

int single_k(const Options& opt) {
  const auto ks = parse_k_list(opt.k_spec);
  if (ks.size() != 1)
    throw std::domain_error("this command takes a single --k value");
  return ks[0];
}

void write_output(const Options& opt, const std::string& content) {
  if (opt.output.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(opt.output, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file '" + opt.output + "'");
  out << content;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

/// Runs one selection method; fills method-specific diagnostics.
dvs::SubsetSelection run_method(const std::string& method, const dvs::DesignMatrix& A, int k,
                                const Options& opt, std::uint64_t seed, ordered_json& diag) {
  dvs::Rng rng(seed);
  if (method == "dvs-exact") {
    const dvs::DvsProblem problem(A, k);
    const dvs::OrderedSample draw = dvs::sample_exact(problem, rng);
    dvs::SubsetSelection out;
    out.indices.assign(draw.tuple.begin(), draw.tuple.end());
    std::sort(out.indices.begin(), out.indices.end());
    out.logdet = dvs::log_det_gram(A, out.indices);
    diag["log_partition"] = problem.log_partition();
    return out;
  }
  if (method == "dvs-mcmc") {
    const dvs::DvsProblem problem(A, k);
    dvs::ChainConfig config;
    config.k = k;
    config.steps = opt.steps;
    if (opt.eps.has_value()) config.eps_tv = *opt.eps;
    config.beta = opt.beta;
    config.seed = seed;
    const dvs::McmcResult result = dvs::sample_mcmc(problem, config);
    diag["log_partition"] = problem.log_partition();
    diag["steps"] = result.diagnostics.steps;
    diag["accepted"] = result.diagnostics.accepted;
    diag["acceptance_rate"] = result.diagnostics.acceptance_rate;
    diag["final_logdet"] = result.diagnostics.final_logdet;
    return result.selection;
  }
  if (method == "dvs-approx") {
    const double eps = opt.eps.value_or(1e-6);
    const dvs::ApproxReport result = dvs::sample_approx(A, k, eps, opt.delta2, rng);
    diag["eps"] = result.eps;
    diag["delta2"] = result.delta2;
    diag["projected_dimension"] = result.d_used;
    diag["projection_bypassed"] = result.bypassed;
    diag["delta1_estimate"] = result.delta1_estimate;
    return result.selection;
  }
  if (method == "unif") {
    dvs::SubsetSelection out = dvs::sample_uniform(A.m(), k, rng);
    out.logdet = dvs::log_det_gram(A, out.indices);
    return out;
  }
  if (method == "lev") return dvs::sample_leverage(A, k, rng);
  if (method == "pl") return dvs::sample_predictive_length(A, k, rng);
  if (method == "fedorov") {
    const dvs::SubsetSelection init = dvs::greedy_init(A, k);
    const dvs::FedorovResult result =
        dvs::fedorov_exchange(A, k, parse_criterion(opt.criterion), init);
    diag["criterion"] = opt.criterion;
    diag["sweeps"] = result.sweeps;
    diag["final_objective"] = result.objective_trace.back();
    return result.selection;
  }
  if (method == "derand") {
    const dvs::DerandTrace trace = dvs::derandomized_select(A, k);
    dvs::SubsetSelection out;
    out.indices = trace.chosen;
    std::sort(out.indices.begin(), out.indices.end());
    out.logdet = dvs::log_det_gram(A, out.indices);
    diag["expected_fro_bound"] = trace.bound_fro;
    diag["final_fro_sq"] = trace.final_fro_sq;
    return out;
  }
  throw std::domain_error("unknown method '" + method + "'");
}

void base_diagnostics(ordered_json& diag, const dvs::DesignMatrix& A, const Options& opt,
                      std::uint64_t fingerprint) {
  diag["library_version"] = dvs::kVersion;
  diag["input"] = opt.input;
  diag["dataset_fingerprint"] = dvs::detail::format_fingerprint(fingerprint);
  diag["rank_tol_scale"] = opt.rank_tol_scale;
  diag["singular_value_max"] = A.singular_values()[0];
  diag["singular_value_min"] = A.singular_values()[A.n() - 1];
}

int cmd_select(const Options& opt, const std::string& method) {
  const int k = single_k(opt);
  std::uint64_t fingerprint = 0;
  const dvs::DesignMatrix A =
      dvs::load_design_matrix(opt.input, parse_format(opt.format), opt.has_header,
                              parse_orientation(opt.orientation), opt.rank_tol_scale,
                              &fingerprint);
  const auto start = std::chrono::steady_clock::now();
  ordered_json diag = ordered_json::object();
  const dvs::SubsetSelection pick = run_method(method, A, k, opt, opt.seed, diag);
  dvs::SelectionReport report =
      dvs::make_selection_report(A, k, method, opt.seed, pick.indices, method == "derand");
  base_diagnostics(report.diagnostics, A, opt, fingerprint);
  for (auto it = diag.begin(); it != diag.end(); ++it) report.diagnostics[it.key()] = it.value();
  report.wall_time_ms = elapsed_ms(start);

  if (opt.output_format == "json")
    write_output(opt, dvs::to_json(report).dump(2) + "\n");
  else if (opt.output_format == "csv")
    write_output(opt, dvs::to_csv(report));
  else
    throw std::domain_error("unknown output format '" + opt.output_format + "'");
  return 0;
}

int cmd_design(const Options& opt) {
  const std::vector<int> ks = parse_k_list(opt.k_spec);
  std::uint64_t fingerprint = 0;
  const dvs::RegressionDataset data =
      dvs::load_regression_dataset(opt.input, parse_format(opt.format), opt.has_header,
                                   opt.response_column, opt.standardize, &fingerprint);
  const dvs::DesignMatrix A = dvs::design_from(data, opt.rank_tol_scale);
  if (opt.replicates < 1) throw std::domain_error("--replicates must be positive");

  if (opt.output_format == "json") {
    if (ks.size() != 1 || opt.replicates != 1)
      throw std::domain_error(
          "design with multiple k values or replicates emits curves; use --output-format csv");
    const int k = ks[0];
    const auto start = std::chrono::steady_clock::now();
    ordered_json diag = ordered_json::object();
    const dvs::SubsetSelection pick = run_method(opt.method, A, k, opt, opt.seed, diag);
    dvs::SelectionReport report = dvs::make_selection_report(A, k, opt.method, opt.seed,
                                                             pick.indices, opt.method == "derand");
    base_diagnostics(report.diagnostics, A, opt, fingerprint);
    for (auto it = diag.begin(); it != diag.end(); ++it)
      report.diagnostics[it.key()] = it.value();
    report.prediction_error = dvs::regression_eval(data, pick.indices).prediction_error;
    report.wall_time_ms = elapsed_ms(start);
    write_output(opt, dvs::to_json(report).dump(2) + "\n");
    return 0;
  }
  if (opt.output_format != "csv")
    throw std::domain_error("unknown output format '" + opt.output_format + "'");

  std::string csv =
      "method,k,replicate,seed,prediction_error,objective_A,objective_E,objective_D,subset,"
      "wall_time_ms\n";
  for (const int k : ks) {
    for (int rep = 0; rep < opt.replicates; ++rep) {
      const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(rep);
      const auto start = std::chrono::steady_clock::now();
      ordered_json diag = ordered_json::object();
      const dvs::SubsetSelection pick = run_method(opt.method, A, k, opt, seed, diag);
      const double wall = elapsed_ms(start);
      std::vector<int> subset = pick.indices;
      std::sort(subset.begin(), subset.end());
      const double error = dvs::regression_eval(data, subset).prediction_error;
      std::string subset_cell;
      for (std::size_t i = 0; i < subset.size(); ++i) {
        if (i > 0) subset_cell += ' ';
        subset_cell += std::to_string(subset[i] + 1);
      }
      csv += opt.method;
      csv += ',' + std::to_string(k) + ',' + std::to_string(rep) + ',' + std::to_string(seed);
      csv += ',' + dvs::detail::format_double(error);
      csv += ',' + dvs::detail::format_double(dvs::objective(A, subset, dvs::Criterion::kA).value);
      csv += ',' + dvs::detail::format_double(dvs::objective(A, subset, dvs::Criterion::kE).value);
      csv += ',' + dvs::detail::format_double(dvs::objective(A, subset, dvs::Criterion::kD).value);
      csv += ",\"" + subset_cell + "\"";
      csv += ',' + dvs::detail::format_double(wall) + '\n';
    }
  }
  write_output(opt, csv);
  return 0;
}

struct ValidationCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

int cmd_validate(const Options& opt) {
  const int k = single_k(opt);
  std::uint64_t fingerprint = 0;
  const dvs::DesignMatrix A =
      dvs::load_design_matrix(opt.input, parse_format(opt.format), opt.has_header,
                              parse_orientation(opt.orientation), opt.rank_tol_scale,
                              &fingerprint);
  const dvs::DvsProblem problem(A, k);
  std::vector<ValidationCheck> checks;
  const auto rel_close = [](double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
  };

  const dvs::ExactDistribution dist = dvs::enumerate_distribution(A, k);
  {
    ValidationCheck c{"partition-function-identity"};
    c.pass = rel_close(dist.logZ, problem.log_partition(), 1e-9);
    c.detail = "enumerated " + dvs::detail::format_double(dist.logZ) + ", closed form " +
               dvs::detail::format_double(problem.log_partition());
    checks.push_back(c);
  }
  {
    ValidationCheck c{"marginals-vs-enumeration"};
    c.pass = true;
    int checked = 0;
    for (int t = 1; t <= std::min(2, k); ++t) {
      dvs::for_each_subset(A.m(), t, [&](std::span<const int> T) {
        double brute = 0.0;
        for (const auto& [S, p] : dist.table) {
          bool contains = true;
          for (const int i : T)
            contains = contains && std::find(S.begin(), S.end(), i) != S.end();
          if (contains) brute += p;
        }
        const auto result = dvs::marginal(problem, T);
        if (!rel_close(result.probability, brute, 1e-6)) c.pass = false;
        ++checked;
      });
    }
    c.detail = std::to_string(checked) + " index sets";
    checks.push_back(c);
  }
  {
    ValidationCheck c{"sequential-sampler-gof"};
    dvs::Rng rng(opt.seed);
    std::map<std::vector<int>, double> counts;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
      const auto s = dvs::sample_exact(problem, rng);
      std::vector<int> key(s.tuple.begin(), s.tuple.end());
      std::sort(key.begin(), key.end());
      counts[key] += 1.0;
    }
    const auto gof = dvs::chi_square_gof(counts, dist, 0.01);
    const double tv = dvs::tv_distance(counts, dist);
    c.pass = gof.conclusive ? gof.pass : tv < 0.05;
    c.detail = "chi-square " + dvs::detail::format_double(gof.statistic) + " vs threshold " +
               dvs::detail::format_double(gof.threshold) + ", tv " +
               dvs::detail::format_double(tv);
    checks.push_back(c);
  }
  {
    ValidationCheck c{"pairwise-negative-correlation"};
    const auto report = dvs::negative_correlation_check(A, k);
    c.pass = report.all_hold;
    c.detail = "worst excess " + dvs::detail::format_double(report.worst_excess);
    checks.push_back(c);
  }
  {
    ValidationCheck c{"gram-symmetric-function-identity"};
    c.pass = true;
    int checked = 0;
    for (const auto& [S, p] : dist.table) {
      if (checked >= 50) break;
      if (!dvs::en_identity_check(A, S, 1e-9)) c.pass = false;
      ++checked;
    }
    c.detail = std::to_string(checked) + " subsets";
    checks.push_back(c);
  }
  {
    ValidationCheck c{"conditional-expectation-identity"};
    double brute = 0.0;
    for (const auto& [S, p] : dist.table)
      brute += p * dvs::pinv_fro_sq(A, S);
    const double value = dvs::conditional_expectation_fro(A, k, {});
    c.pass = rel_close(value, brute, 1e-6);
    c.detail = "value " + dvs::detail::format_double(value) + ", enumerated " +
               dvs::detail::format_double(brute);
    checks.push_back(c);
  }
  {
    ValidationCheck c{"derandomized-selection-bounds"};
    const auto trace = dvs::derandomized_select(A, k);
    const double fro_bound =
        static_cast<double>(A.m() - A.n() + 1) / (k - A.n() + 1) *
        dvs::pinv_fro_sq(A.matrix(), A.rank_tol_scale());
    std::vector<int> sorted = trace.chosen;
    std::sort(sorted.begin(), sorted.end());
    const double spec_bound = static_cast<double>(A.n()) *
                              (A.m() - A.n() + 1) / (k - A.n() + 1) *
                              dvs::pinv_spec_sq(A.matrix(), A.rank_tol_scale());
    c.pass = trace.final_fro_sq <= fro_bound &&
             dvs::pinv_spec_sq(A, sorted) <= spec_bound;
    c.detail = dvs::detail::format_double(trace.final_fro_sq) + " <= " +
               dvs::detail::format_double(fro_bound);
    checks.push_back(c);
  }

  int passed = 0;
  std::string out;
  for (const auto& c : checks) {
    passed += c.pass ? 1 : 0;
    out += (c.pass ? "ok   " : "FAIL ") + c.name + " (" + c.detail + ")\n";
  }
  out += std::to_string(passed) + "/" + std::to_string(checks.size()) + " checks passed\n";
  write_output(opt, out);
  return passed == static_cast<int>(checks.size()) ? 0 : 1;
}

ordered_json error_object(const std::string& type, const std::string& message) {
  ordered_json j;
  j["error"] = {{"type", type}, {"message", message}};
  return j;
}

void attach_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--input", opt.input, "path to the input table")->required();
  cmd->add_option("--format", opt.format, "input format: csv, tsv, whitespace");
  cmd->add_flag("--header", opt.has_header, "first row is a header");
  cmd->add_option("--orientation", opt.orientation,
                  "samples-as-rows or columns-as-given");
  cmd->add_option("--k", opt.k_spec, "subset size (design accepts a comma list)")->required();
  cmd->add_option("--seed", opt.seed, "random seed, recorded in the report");
  cmd->add_option("--steps", opt.steps, "chain steps (default: mixing budget)");
  cmd->add_option("--beta", opt.beta, "chain inverse-temperature scaling");
  cmd->add_option("--eps", opt.eps,
                  "dvs-approx perturbation, or chain target total-variation");
  cmd->add_option("--delta2", opt.delta2, "projection distortion target");
  cmd->add_option("--criterion", opt.criterion, "design criterion: A, E, or D");
  cmd->add_option("--replicates", opt.replicates, "replicate runs (design command)");
  cmd->add_option("--output", opt.output, "output path (default: stdout)");
  cmd->add_option("--output-format", opt.output_format, "json or csv");
  cmd->add_option("--response-column", opt.response_column,
                  "response column name or 1-based index (design command)");
  cmd->add_flag("--standardize", opt.standardize,
                "standardize features before fitting (design command)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Determinantal column subset selection toolkit"};
  app.require_subcommand(1);
  Options opt;

  if (const char* env = std::getenv("DVS_RANK_TOL")) {
    try {
      opt.rank_tol_scale = std::stod(env);
    } catch (const std::exception&) {
      std::cerr << error_object("config", "DVS_RANK_TOL is not a number").dump(2) << "\n";
      return 1;
    }
  }

  CLI::App* sample = app.add_subcommand("sample", "draw one subset with a sampling method");
  attach_common(sample, opt);
  sample->add_option("--method", opt.method,
                     "dvs-exact, dvs-mcmc, dvs-approx, unif, lev, pl, fedorov, derand");

  CLI::App* derand = app.add_subcommand("derandomize", "deterministic greedy selection");
  attach_common(derand, opt);

  CLI::App* design = app.add_subcommand("design", "regression subset benchmark");
  attach_common(design, opt);
  design->add_option("--method", opt.method,
                     "dvs-exact, dvs-mcmc, dvs-approx, unif, lev, pl, fedorov, derand");

  CLI::App* validate = app.add_subcommand("validate", "run the oracle suite on an input");
  attach_common(validate, opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) return cmd_select(opt, opt.method);
    if (derand->parsed()) return cmd_select(opt, "derand");
    if (design->parsed()) return cmd_design(opt);
    if (validate->parsed()) return cmd_validate(opt);
    return 1;
  } catch (const dvs::ParseError& e) {
    ordered_json j = error_object("parse", e.what());
    j["error"]["row"] = e.row;
    j["error"]["col"] = e.col;
    std::cerr << j.dump(2) << "\n";
    return 1;
  } catch (const dvs::SingularMatrixError& e) {
    std::cerr << error_object("singular-matrix", e.what()).dump(2) << "\n";
    return 1;
  } catch (const dvs::EnumerationLimitError& e) {
    std::cerr << error_object("enumeration-limit", e.what()).dump(2) << "\n";
    return 1;
  } catch (const dvs::InfeasibleError& e) {
    std::cerr << error_object("infeasible", e.what()).dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << error_object("invalid-request", e.what()).dump(2) << "\n";
    return 1;
  }
}
