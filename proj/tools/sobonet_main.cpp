// Command-line surface: build the explicit networks, run approximant builds
// and sweeps, evaluate and audit networks, estimate Sobolev errors, and run
// the bit-pattern probe. Exit codes: 0 success, 1 usage or validation error,
// 2 tolerance failure (a build or probe that misses its accuracy target).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <sobonet/calculus.hpp>
#include <sobonet/constructions.hpp>
#include <sobonet/functions.hpp>
#include <sobonet/io.hpp>
#include <sobonet/lb_probe.hpp>
#include <sobonet/network.hpp>
#include <sobonet/sobolev.hpp>

using namespace sobonet;

namespace {

// Registry of named reference functions: the analytic entries plus two local
// ones used in documented workflows (the square chain and a single planted
// bump on [0,1]).
DifferentiableFunction named_function(const std::string& name, unsigned n) {
  if (name == "square1") {
    DifferentiableFunction f;
    f.dimension = 1;
    f.order = n;
    f.norm_bound = 4.0;  // sup over [-1,2] of max(|x^2|, |2x|, 2)
    f.derivative = [](const MultiIndex& alpha, std::span<const double> x) {
      switch (alpha[0]) {
        case 0: return x[0] * x[0];
        case 1: return 2.0 * x[0];
        case 2: return 2.0;
        default: return 0.0;
      }
    };
    return f;
  }
  if (name == "bump1") {
    if (n != 2 && n != 3)
      throw std::invalid_argument("bump1 supports smoothness n in {2,3}");
    return bump_family(1, n, 1, 1.0, {1});
  }
  return make_function(name, n);
}

constexpr const char* kFunctionList =
    "sin1, sincos2, gauss1, linear1, poly1, square1, bump1";

double parse_order(const std::string& text) {
  if (text == "inf" || text == "Inf" || text == "INF") return kInfiniteOrder;
  const double p = std::stod(text);
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1 or 'inf'");
  return p;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string piece =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!piece.empty()) values.push_back(std::stod(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.empty()) throw std::invalid_argument("expected a comma-separated list");
  return values;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw NetworkError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw NetworkError("write to '" + path + "' failed");
}

void emit_network(const Network& net, const std::string& path) {
  emit(to_json(net).dump(2) + "\n", path);
}

// Shared build knobs. threads = 0 means all available cores; 1 is the
// canonical deterministic order.
struct BuildFlags {
  std::string mode = "calibrated";
  std::optional<double> C_theoretical;
  std::optional<double> C_hat;
  std::size_t norm_budget = kDefaultNormBudget;
  std::size_t search_budget = 20000;
  std::uint64_t seed = 0;
  unsigned quadrature = 0;
  unsigned threads = 0;
};

void add_build_flags(CLI::App* cmd, BuildFlags* flags) {
  cmd->add_option("--mode", flags->mode, "'calibrated' or 'theoretical'")
      ->check(CLI::IsMember({"calibrated", "theoretical"}));
  cmd->add_option("--C", flags->C_theoretical,
                  "constant C for theoretical mode's grid formula");
  cmd->add_option("--C-hat", flags->C_hat,
                  "calibration constant override for the inner tolerance");
  cmd->add_option("--norm-budget", flags->norm_budget,
                  "sample budget per norm estimate");
  cmd->add_option("--search-budget", flags->search_budget,
                  "sample budget during grid density search");
  cmd->add_option("--seed", flags->seed, "seed for norm estimation sampling");
  cmd->add_option("--quadrature", flags->quadrature,
                  "Gauss-Legendre points per axis (0 = per-dimension default)");
  cmd->add_option("--threads", flags->threads,
                  "worker threads for patch building (0 = all cores, 1 = "
                  "canonical order)");
}

// SOBONET_CALIBRATION points at a calibration JSON; a matching (d, n) entry
// overrides the built-in constant unless --C-hat was given explicitly.
BuildOptions to_options(const BuildFlags& flags, std::size_t d, unsigned n) {
  BuildOptions opts;
  opts.mode = flags.mode;
  opts.C_theoretical = flags.C_theoretical;
  opts.C_hat = flags.C_hat;
  opts.norm_budget = flags.norm_budget;
  opts.search_budget = flags.search_budget;
  opts.seed = flags.seed;
  opts.quadrature = flags.quadrature;
  opts.threads =
      flags.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                         : flags.threads;
  if (!opts.C_hat) {
    if (const char* path = std::getenv("SOBONET_CALIBRATION")) {
      const CalibrationTable table = load_calibration(path);
      const auto it = table.find({d, n});
      if (it != table.end()) opts.C_hat = it->second;
    }
  }
  return opts;
}

int run_build_square(unsigned m, const std::string& out) {
  emit_network(squaring_network(m), out);
  return 0;
}

int run_build_mult(double box, double eps, const std::string& out) {
  emit_network(multiplication_network(box, eps), out);
  return 0;
}

int run_build_approx(const std::string& fn, unsigned n, double s, double eps,
                     const std::string& p_text, std::optional<double> B,
                     const BuildFlags& flags, const std::string& out) {
  const DifferentiableFunction f = named_function(fn, n);
  const double p = parse_order(p_text);
  const double bound = B.value_or(f.norm_bound.value_or(1.0));
  const BuildOptions opts = to_options(flags, f.dimension, n);
  const ApproximantBuild build = build_approximant(f, n, p, s, bound, eps, opts);
  emit_network(build.net, out);
  std::fprintf(stderr,
               "achieved=%.6g eps=%.6g eps_prime=%.6g N_grid=%u L=%zu M=%zu N=%zu\n",
               build.achieved, eps, build.eps_prime, build.audit.N_grid,
               build.audit.L, build.audit.M, build.audit.N);
  return build.achieved <= eps ? 0 : 2;
}

int run_eval(const std::string& net_path, const std::string& x_text) {
  const Network net = load_network(net_path);
  const std::vector<double> x = parse_list(x_text);
  const std::vector<double> y = realize(net, x);
  std::string line;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i) line += ',';
    std::string piece = format_double(y[i]);
    if (piece.size() > 2 && piece.ends_with(".0"))
      piece.resize(piece.size() - 2);
    line += piece;
  }
  std::cout << line << '\n';
  return 0;
}

int run_norms(const std::string& net_path, const std::string& fn, unsigned n,
              double s, const std::string& p_text, std::size_t budget,
              std::uint64_t seed, const std::string& out) {
  const Network net = load_network(net_path);
  const DifferentiableFunction f = named_function(fn, n);
  const NormReport report = wsp_error(net, f, s, parse_order(p_text), budget, seed);
  emit(norms_csv({report}), out);
  return 0;
}

int run_sweep(const std::string& fn, unsigned n, double s,
              const std::string& eps_list, const std::string& timing,
              const BuildFlags& flags, const std::string& out) {
  const DifferentiableFunction f = named_function(fn, n);
  const std::vector<double> eps_values = parse_list(eps_list);
  const BuildOptions opts = to_options(flags, f.dimension, n);
  std::vector<SweepRow> rows = scaling_sweep(f, n, s, eps_values, opts);
  if (timing == "zero")
    for (SweepRow& row : rows) row.seconds = 0.0;
  emit(sweep_csv(rows), out);
  if (rows.size() >= 2)
    std::fprintf(stderr, "log-corrected M exponent: %.4f (d/(n-s) = %.4f)\n",
                 fit_m_exponent(rows, n, s),
                 static_cast<double>(f.dimension) / (static_cast<double>(n) - s));
  return 0;
}

int run_to_standard(const std::string& net_path, const std::string& out) {
  emit_network(to_standard(load_network(net_path)), out);
  return 0;
}

int run_audit(const std::string& net_path) {
  const Network net = load_network(net_path);
  nlohmann::json j = to_json(audit_network(net, 0.0, 0, "audit"));
  j.erase("eps");
  j.erase("N_grid");
  j["input_dim"] = net.input_dim;
  j["output_dim"] = net.output_dim();
  j["standard"] = is_standard(net);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_probe(std::size_t d, unsigned N, unsigned n, double B,
              const BuildFlags& flags, const std::string& out) {
  const BuildOptions opts = to_options(flags, d, n);
  const ProbeReport report = probe_patterns(d, n, N, B, opts);
  emit(probe_csv(report), out);
  std::fprintf(stderr,
               "patterns=%zu all_ok=%d min_margin=%.6g threshold=%.6g eps=%.6g "
               "N_grid=%u\n",
               report.patterns.size(), report.all_ok ? 1 : 0, report.min_margin,
               report.threshold, report.eps, report.N_grid);
  return report.all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sobonet: ReLU networks with Sobolev-norm error guarantees"};
  app.require_subcommand(1);

  unsigned square_m = 1;
  std::string square_out;
  CLI::App* square = app.add_subcommand(
      "build-square", "Piecewise-linear interpolant of x^2 on [0,1]");
  square->add_option("--m", square_m, "interpolation levels (2^m segments)")
      ->required()
      ->check(CLI::Range(1u, 31u));
  square->add_option("--out", square_out, "output network JSON path (default stdout)");

  double mult_box = 1.0, mult_eps = 1e-2;
  std::string mult_out;
  CLI::App* mult = app.add_subcommand(
      "build-mult", "Approximate multiplication on [-M, M]^2");
  mult->add_option("--M", mult_box, "box half-width M")->required();
  mult->add_option("--eps", mult_eps, "target sup error")->required();
  mult->add_option("--out", mult_out, "output network JSON path (default stdout)");

  std::string approx_fn, approx_p = "inf", approx_out;
  unsigned approx_n = 2;
  double approx_s = 0.0, approx_eps = 1e-2;
  std::optional<double> approx_B;
  BuildFlags approx_flags;
  CLI::App* approx = app.add_subcommand(
      "build-approx", std::string("Build a W^{s,p} approximant of a registry "
                                  "function (") + kFunctionList + ")");
  approx->add_option("--fn", approx_fn, "function name")->required();
  approx->add_option("--n", approx_n, "smoothness order (>= 2)")->required();
  approx->add_option("--s", approx_s, "error norm smoothness s in [0,1]")->required();
  approx->add_option("--eps", approx_eps, "target error")->required();
  approx->add_option("--p", approx_p, "integrability order (default inf)");
  approx->add_option("--B", approx_B, "norm bound B (default: function metadata)");
  approx->add_option("--out", approx_out, "output network JSON path (default stdout)");
  add_build_flags(approx, &approx_flags);

  std::string eval_net, eval_x;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a network at a point");
  eval->add_option("--net", eval_net, "network JSON path")->required();
  eval->add_option("--x", eval_x, "comma-separated input coordinates")->required();

  std::string norms_net, norms_fn, norms_p = "inf", norms_out;
  unsigned norms_n = 2;
  double norms_s = 0.0;
  std::size_t norms_budget = kDefaultNormBudget;
  std::uint64_t norms_seed = 0;
  CLI::App* norms = app.add_subcommand(
      "norms", "Estimate the W^{s,p} error of a network against a registry function");
  norms->add_option("--net", norms_net, "network JSON path")->required();
  norms->add_option("--fn", norms_fn, "reference function name")->required();
  norms->add_option("--s", norms_s, "smoothness s in [0,1]")->required();
  norms->add_option("--p", norms_p, "integrability order (default inf)");
  norms->add_option("--n", norms_n, "derivative order metadata for the reference");
  norms->add_option("--budget", norms_budget, "sample budget");
  norms->add_option("--seed", norms_seed, "sampling seed");
  norms->add_option("--out", norms_out, "output CSV path (default stdout)");

  std::string sweep_fn, sweep_eps_list, sweep_timing = "zero", sweep_out;
  unsigned sweep_n = 2;
  double sweep_s = 0.0;
  BuildFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Build approximants across an eps list and report scaling");
  sweep->add_option("--fn", sweep_fn, "function name")->required();
  sweep->add_option("--n", sweep_n, "smoothness order (>= 2)")->required();
  sweep->add_option("--s", sweep_s, "error norm smoothness s in [0,1]")->required();
  sweep->add_option("--eps-list", sweep_eps_list, "comma-separated eps values")
      ->required();
  sweep->add_option("--timing", sweep_timing,
                    "'zero' for byte-reproducible CSV, 'wall' for real seconds")
      ->check(CLI::IsMember({"zero", "wall"}));
  sweep->add_option("--out", sweep_out, "output CSV path (default stdout)");
  add_build_flags(sweep, &sweep_flags);

  std::string std_net, std_out;
  CLI::App* standard = app.add_subcommand(
      "to-standard", "Rewrite a skip network into standard form");
  standard->add_option("--net", std_net, "network JSON path")->required();
  standard->add_option("--out", std_out, "output network JSON path (default stdout)");

  std::string audit_net;
  CLI::App* audit = app.add_subcommand("audit", "Print exact complexity counts");
  audit->add_option("--net", audit_net, "network JSON path")->required();

  std::size_t probe_d = 1;
  unsigned probe_N = 2, probe_n = 2;
  double probe_B = 1.0;
  std::string probe_out;
  BuildFlags probe_flags;
  CLI::App* probe = app.add_subcommand(
      "probe-lb", "Decode every bit pattern of a planted bump family");
  probe->add_option("--d", probe_d, "dimension (1 or 2)")->required();
  probe->add_option("--N", probe_N, "grid density (N^d <= 10 points)")->required();
  probe->add_option("--n", probe_n, "smoothness order")->required();
  probe->add_option("--B", probe_B, "family norm bound");
  probe->add_option("--out", probe_out, "output CSV path (default stdout)");
  add_build_flags(probe, &probe_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  // Precondition violations (invalid_argument, NetworkError) are usage
  // errors; a plain runtime_error is a build that exhausted its retry budget
  // without reaching tolerance.
  try {
    if (square->parsed()) return run_build_square(square_m, square_out);
    if (mult->parsed()) return run_build_mult(mult_box, mult_eps, mult_out);
    if (approx->parsed())
      return run_build_approx(approx_fn, approx_n, approx_s, approx_eps, approx_p,
                              approx_B, approx_flags, approx_out);
    if (eval->parsed()) return run_eval(eval_net, eval_x);
    if (norms->parsed())
      return run_norms(norms_net, norms_fn, norms_n, norms_s, norms_p, norms_budget,
                       norms_seed, norms_out);
    if (sweep->parsed())
      return run_sweep(sweep_fn, sweep_n, sweep_s, sweep_eps_list, sweep_timing,
                       sweep_flags, sweep_out);
    if (standard->parsed()) return run_to_standard(std_net, std_out);
    if (audit->parsed()) return run_audit(audit_net);
    if (probe->parsed())
      return run_probe(probe_d, probe_N, probe_n, probe_B, probe_flags, probe_out);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NetworkError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
