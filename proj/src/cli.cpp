#include "mmot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mmot/column_generation.hpp"
#include "mmot/mmot.hpp"
#include "mmot/plan.hpp"
#include "mmot/text_format.hpp"

namespace mmot {

namespace {

Point parse_point(std::string_view text, int dim) {
  Point p;
  for (auto part : split(text, ',')) p.push_back(parse_double(trim(part)));
  if (static_cast<int>(p.size()) != dim) {
    fail(ErrorKind::DimensionMismatch,
         "point '" + std::string(text) + "' has " + std::to_string(p.size()) + " coordinates, expected " +
             std::to_string(dim));
  }
  return p;
}

/// `key=value` fields separated by ':'.
std::map<std::string, std::string> parse_fields(std::string_view text) {
  std::map<std::string, std::string> fields;
  for (auto part : split(text, ':')) {
    part = trim(part);
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::ParseError, "expected key=value in '" + std::string(part) + "'");
    fields[std::string(trim(part.substr(0, eq)))] = std::string(trim(part.substr(eq + 1)));
  }
  return fields;
}

const std::string& required(const std::map<std::string, std::string>& fields, const std::string& key,
                            std::string_view kind) {
  auto it = fields.find(key);
  if (it == fields.end()) fail(ErrorKind::ParseError, std::string(kind) + " density needs '" + key + "='");
  return it->second;
}

}  // namespace

DensitySpec parse_density(std::string_view text, int dim) {
  text = trim(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) fail(ErrorKind::ParseError, "density must start with a kind and ':'");
  const std::string_view kind = text.substr(0, colon);
  const std::string_view body = text.substr(colon + 1);

  if (kind == "atoms") {
    FiniteAtomic atoms;
    for (auto entry : split(body, ';')) {
      entry = trim(entry);
      if (entry.empty()) continue;
      // <label>=x,y,z:w=<weight>; the label only names the atom.
      const auto eq = entry.find('=');
      const auto sep = entry.find(':');
      if (eq == std::string_view::npos || sep == std::string_view::npos || sep < eq) {
        fail(ErrorKind::ParseError, "atom entry '" + std::string(entry) + "' is not <label>=<point>:w=<weight>");
      }
      atoms.points.push_back(parse_point(entry.substr(eq + 1, sep - eq - 1), dim));
      atoms.weights.push_back(parse_double(required(parse_fields(entry.substr(sep + 1)), "w", "atom")));
    }
    if (atoms.points.empty()) fail(ErrorKind::ParseError, "atoms density lists no atoms");
    return atoms;
  }
  if (kind == "ball") {
    auto f = parse_fields(body);
    return UniformBall{parse_point(required(f, "center", kind), dim), parse_double(required(f, "radius", kind))};
  }
  if (kind == "gaussian") {
    auto f = parse_fields(body);
    return TruncatedGaussian{parse_point(required(f, "center", kind), dim),
                             parse_double(required(f, "sigma", kind))};
  }
  if (kind == "file") {
    const DiscreteMeasure m = load_measure(std::string(body));
    if (m.grid().dim() != dim) fail(ErrorKind::DimensionMismatch, "measure file dimension differs from --dim");
    FiniteAtomic atoms;
    for (const auto& [cell, w] : m.atoms()) {
      atoms.points.push_back(cell_center(cell, m.grid()));
      atoms.weights.push_back(w);
    }
    return atoms;
  }
  fail(ErrorKind::ParseError, "unknown density kind '" + std::string(kind) + "'");
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericalBreakdown:
    case ErrorKind::InsufficientSupport:
    case ErrorKind::Infeasible:
    case ErrorKind::OverlappingNeighborhoods:
    case ErrorKind::EmptyRestriction:
    case ErrorKind::NoOffDiagonalSupport:
      return exit_solver_error;
    default:
      return exit_invalid_config;
  }
}

namespace {

struct RunConfig {
  std::string density = "ball:center=0,0,0:radius=1";
  int marginals = 2;
  std::string cost = "coulomb";
  double s = 1.0;
  int level = 3;
  std::string levels = "1..4";
  double R = 1.0;
  int dim = 3;
  std::string mode = "auto";
  int samples = 4;
  std::string out;
  std::string plan;
  std::string potentials;
  std::string format;
  double gap_tol = 1e-8;
  double feas_tol = 1e-9;
  double m_fraction = 0.1;
  int threads = 0;
  unsigned long seed = 0;
  int rounds = 10;
  bool no_timing = false;
};

void validate(const RunConfig& c) {
  if (c.marginals < 2) fail(ErrorKind::InvalidConfig, "--N must be at least 2");
  if (c.cost != "coulomb" && c.cost != "power") fail(ErrorKind::InvalidConfig, "--cost must be coulomb or power");
  if (!(c.s > 0) || !std::isfinite(c.s)) fail(ErrorKind::InvalidConfig, "--s must be positive");
  if (c.cost == "coulomb" && c.s != 1.0) fail(ErrorKind::InvalidConfig, "--s applies only to --cost power");
  if (!(c.gap_tol > 0) || !(c.feas_tol > 0)) fail(ErrorKind::InvalidConfig, "tolerances must be positive");
  if (!(c.m_fraction > 0 && c.m_fraction < 1)) fail(ErrorKind::InvalidConfig, "--m-fraction must lie in (0, 1)");
  if (c.mode != "auto" && c.mode != "lower" && c.mode != "pointwise") {
    fail(ErrorKind::InvalidConfig, "--mode must be auto, lower or pointwise");
  }
  if (c.samples < 1) fail(ErrorKind::InvalidConfig, "--samples must be positive");
  if (c.dim < 1) fail(ErrorKind::InvalidConfig, "--dim must be positive");
  if (c.threads < 0) fail(ErrorKind::InvalidConfig, "--threads must be nonnegative");
  if (c.rounds < 0) fail(ErrorKind::InvalidConfig, "--rounds must be nonnegative");
}

std::optional<CostMode> mode_of(const RunConfig& c) {
  if (c.mode == "lower") return CostMode::cell_lower;
  if (c.mode == "pointwise") return CostMode::pointwise;
  return std::nullopt;
}

std::pair<int, int> parse_levels(const std::string& text) {
  const auto dots = text.find("..");
  long long a, b;
  if (dots == std::string::npos) {
    a = b = parse_integer(trim(text));
  } else {
    a = parse_integer(trim(std::string_view(text).substr(0, dots)));
    b = parse_integer(trim(std::string_view(text).substr(dots + 2)));
  }
  if (a < 0 || b < a) fail(ErrorKind::InvalidConfig, "--levels must be a nonempty range a..b with 0 <= a");
  return {static_cast<int>(a), static_cast<int>(b)};
}

ColumnGenerationOptions solver_options(const RunConfig& c) {
  ColumnGenerationOptions o;
  o.threads = c.threads;
  o.simplex.feasibility_tolerance = c.feas_tol;
  return o;
}

/// Writes to --out when given, otherwise to the machine-output stream.
void emit(const RunConfig& c, std::ostream& out, const std::string& text) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(c.out);
  if (!file) fail(ErrorKind::InvalidConfig, "cannot write '" + c.out + "'");
  file << text;
}

std::string render_report(const RunConfig& c, const DualityReport& report) {
  if (c.format.empty() || c.format == "kv") return to_key_value(report);
  if (c.format == "json") return to_json(report) + "\n";
  fail(ErrorKind::InvalidConfig, "--format must be kv or json for this subcommand");
}

/// Report checks shared by solve and verify; returns the failed ones.
std::vector<std::string> report_failures(const RunConfig& c, const DualityReport& r) {
  std::vector<std::string> issues;
  if (!(r.relative_gap <= c.gap_tol)) issues.push_back("relative gap " + format_double(r.relative_gap) + " above --gap-tol");
  if (!(r.max_dual_violation <= c.feas_tol * r.cost_scale)) {
    issues.push_back("dual violation " + format_double(r.max_dual_violation) + " above --feas-tol");
  }
  if (!(r.max_slackness_violation <= 1e-7 * (1 + std::abs(r.primal_value)))) {
    issues.push_back("slackness violation " + format_double(r.max_slackness_violation));
  }
  if (r.bound_params && !r.potential_bound_satisfied) issues.push_back("potential bound violated");
  return issues;
}

int finish(const std::vector<std::string>& issues, std::ostream& err) {
  for (const auto& issue : issues) err << "mmot-error: VerificationFailure: " << issue << '\n';
  return issues.empty() ? exit_ok : exit_verification_failed;
}

void summarize(std::ostream& err, const std::string& what, const DualityReport& r) {
  err << what << ": primal " << format_double(r.primal_value) << ", dual " << format_double(r.dual_value)
      << ", gap " << format_double(r.relative_gap) << ", alpha " << format_double(r.diagonal_clearance_alpha)
      << ", |u| " << format_double(r.potential_sup) << " <= " << format_double(r.potential_bound) << '\n';
}

int run_solve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const DensitySpec density = parse_density(c.density, c.dim);
  const GridSpec grid(c.level, c.R, c.dim);
  const DiscreteMeasure measure = discretize(density, grid, c.samples);
  const CostModel model = make_cost_model(c.marginals, c.s);
  const CostEvaluator cost(model, measure, resolve_mode(mode_of(c), density));
  const MMOTSolution sol = solve_mmot(measure, cost, solver_options(c));
  if (!c.plan.empty()) save_plan(c.plan, sol.plan);
  if (!c.potentials.empty()) save_potentials(c.potentials, sol.potentials);
  const DualityReport report =
      verify_duality(sol.plan, sol.potentials, cost, {c.R, c.m_fraction, c.threads}, &measure);
  emit(c, out, render_report(c, report));
  err << "solve: level " << c.level << ", " << measure.size() << " cells, " << sol.plan.size()
      << " plan atoms, " << sol.stats.columns << " columns, " << sol.stats.rounds << " pricing rounds, " << sol.stats.simplex_iterations
      << " pivots\n";
  summarize(err, "solve", report);
  return finish(report_failures(c, report), err);
}

DiscreteMeasure measure_for(const RunConfig& c, const TransportPlan& plan, bool density_given,
                            std::optional<DensitySpec>& density) {
  if (!density_given) return plan.marginal_measure();
  density = parse_density(c.density, plan.grid().dim());
  return discretize(*density, plan.grid(), c.samples);
}

CostMode verify_mode(const RunConfig& c, const std::optional<DensitySpec>& density) {
  if (auto m = mode_of(c)) return *m;
  return density && is_atomic(*density) ? CostMode::pointwise : CostMode::cell_lower;
}

int run_verify(const RunConfig& c, bool density_given, std::ostream& out, std::ostream& err) {
  if (c.plan.empty() || c.potentials.empty()) {
    fail(ErrorKind::InvalidConfig, "verify needs --plan and --potentials");
  }
  const TransportPlan plan = load_plan(c.plan);
  const PotentialVector u = load_potentials(c.potentials);
  std::optional<DensitySpec> density;
  const DiscreteMeasure measure = measure_for(c, plan, density_given, density);
  if (max_abs_difference(plan.marginal(0), measure.atoms()) > 1e-10) {
    fail(ErrorKind::DimensionMismatch, "plan marginals differ from the density");
  }
  const CostEvaluator cost(make_cost_model(plan.marginals(), c.s), measure, verify_mode(c, density));
  const double R = std::min(c.R, plan.grid().halfwidth());
  const DualityReport report = verify_duality(plan, u, cost, {R, c.m_fraction, c.threads}, &measure);
  emit(c, out, render_report(c, report));
  summarize(err, "verify", report);
  return finish(report_failures(c, report), err);
}

int run_improve(const RunConfig& c, bool density_given, std::ostream& out, std::ostream& err) {
  if (c.plan.empty()) fail(ErrorKind::InvalidConfig, "improve needs --plan");
  const TransportPlan plan = load_plan(c.plan);
  std::optional<DensitySpec> density;
  const DiscreteMeasure measure = measure_for(c, plan, density_given, density);
  const CostEvaluator cost(make_cost_model(plan.marginals(), c.s), measure, verify_mode(c, density));
  const auto result = swap_search(plan, cost, c.rounds);
  std::ostringstream text;
  write_plan(text, result.plan);
  emit(c, out, text.str());
  for (const auto& e : result.log) {
    err << "round=" << e.round << " radius=" << format_double(e.radius)
        << " before=" << format_double(e.cost_before) << " after=" << format_double(e.cost_after) << '\n';
  }
  err << "improve: " << result.log.size() << " improvements, cost " << format_double(plan.cost(cost))
      << " -> " << format_double(result.cost) << '\n';
  return exit_ok;
}

int run_converge(const RunConfig& c, const CliHooks& hooks, std::ostream& out, std::ostream& err) {
  ConvergeConfig cc;
  cc.density = parse_density(c.density, c.dim);
  cc.marginals = c.marginals;
  cc.exponent = c.s;
  std::tie(cc.first_level, cc.last_level) = parse_levels(c.levels);
  cc.R = c.R;
  cc.dim = c.dim;
  cc.mode = mode_of(c);
  cc.samples = c.samples;
  cc.m_fraction = c.m_fraction;
  cc.timing = !c.no_timing;
  cc.solver = solver_options(c);
  make_cost_model(c.marginals, c.s);

  ConvergenceTable table = converge(cc);
  if (hooks.after_converge) hooks.after_converge(table);
  std::ostringstream text;
  if (c.format.empty() || c.format == "csv") {
    write_csv(text, table);
  } else if (c.format == "kv") {
    write_key_value(text, table);
  } else {
    fail(ErrorKind::InvalidConfig, "--format must be csv or kv for converge");
  }
  emit(c, out, text.str());

  for (const auto& row : table.rows) {
    err << "level " << row.level << ": ";
    if (row.ok) {
      err << "primal " << format_double(row.primal) << ", gap " << format_double(row.gap) << ", alpha "
          << format_double(row.alpha) << ", r " << format_double(row.r) << ", k " << format_double(row.k) << '\n';
    } else {
      err << "failed\n";
    }
  }
  err << "converge: product-plan bracket " << format_double(table.reference_upper) << ", r variation "
      << format_double(r_variation(table)) << '\n';

  bool solver_failed = false;
  for (const auto& row : table.rows) {
    if (!row.ok) {
      solver_failed = true;
      err << "mmot-error: " << row.error << " (level " << row.level << ")\n";
    }
  }
  if (solver_failed) return exit_solver_error;
  return finish(check_table(table, c.gap_tol), err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliHooks& hooks) {
  RunConfig c;
  CLI::App app{"Multimarginal optimal transport with repulsive costs", "mmot"};
  app.set_config("--config", "", "Read `key = value` settings; flags override");
  // Values are taken whole: density specs contain commas.
  app.get_config_formatter_base()->arrayDelimiter('\x1f');
  app.require_subcommand(1);
  auto* solve = app.add_subcommand("solve", "Solve one level; write plan, potentials and a duality report");
  auto* conv = app.add_subcommand("converge", "Solve a range of levels; write the convergence table");
  auto* verify = app.add_subcommand("verify", "Check a plan and potentials; write a duality report");
  auto* improve = app.add_subcommand("improve", "Run the swap search on a plan file");
  for (auto* sub : {solve, conv, verify, improve}) sub->fallthrough();

  auto* density_opt = app.add_option("--density", c.density, "Density spec (atoms:, ball:, gaussian:, file:)");
  app.add_option("--N", c.marginals, "Number of marginals");
  app.add_option("--cost", c.cost, "coulomb or power");
  app.add_option("--s", c.s, "Exponent of the power cost");
  app.add_option("--level", c.level, "Dyadic level for solve");
  app.add_option("--levels", c.levels, "Level range a..b for converge");
  app.add_option("--R", c.R, "Window halfwidth");
  app.add_option("--dim", c.dim, "Space dimension");
  app.add_option("--mode", c.mode, "Cost mode: auto, lower or pointwise");
  app.add_option("--samples", c.samples, "Quadrature samples per cell axis");
  app.add_option("--out", c.out, "Machine output file (default: stdout)");
  app.add_option("--plan", c.plan, "Plan file (written by solve, read by verify and improve)");
  app.add_option("--potentials", c.potentials, "Potentials file");
  app.add_option("--format", c.format, "kv or json (solve, verify); csv or kv (converge)");
  app.add_option("--gap-tol", c.gap_tol, "Relative duality gap tolerance");
  app.add_option("--feas-tol", c.feas_tol, "Feasibility tolerance");
  app.add_option("--m-fraction", c.m_fraction, "Mass fraction for the bound radius");
  app.add_option("--threads", c.threads, "Worker threads (0: available parallelism)");
  app.add_option("--seed", c.seed, "Seed recorded for reproducible scripts");
  app.add_option("--rounds", c.rounds, "Swap search rounds for improve");
  app.add_flag("--no-timing", c.no_timing, "Write 0 in the ms column");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "mmot-error: InvalidConfig: " << e.what() << '\n';
    return exit_invalid_config;
  }

  try {
    validate(c);
    const bool density_given = density_opt->count() > 0;
    if (solve->parsed()) return run_solve(c, out, err);
    if (conv->parsed()) return run_converge(c, hooks, out, err);
    if (verify->parsed()) return run_verify(c, density_given, out, err);
    return run_improve(c, density_given, out, err);
  } catch (const Error& e) {
    err << "mmot-error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
}

}  // namespace mmot
