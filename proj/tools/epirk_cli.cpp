#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "epirk/errors.hpp"
#include "epirk/experiments.hpp"
#include "json.hpp"

using namespace epirk;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kThreshold = 2;
constexpr int kNumeric = 3;

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path, std::ios::binary);
    if (!file) throw InvalidArgument("cannot open " + path);
    os = &file;
  }
};

void write_json(const std::string& path, const json& j) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot open " + path);
  f << j.dump(2) << "\n";
}

double band_for(const ExperimentConfig& c, double order) {
  if (c.order_band > 0.0) return c.order_band;
  return order >= 5.0 ? 0.4 : 0.3;
}

int single_run(const ExperimentConfig& c, const std::string& out, const std::string& report) {
  const MethodDefinition m = resolve_method(c);
  const Problem p = resolve_problem(c);
  const std::pair<double, double> span{p.t0, p.t1};
  RunReport r = c.h_list.size() == 1
                    ? integrate_fixed(p, m, c.strategy, span, c.h_list[0], c.krylov_tol)
                    : integrate_adaptive(p, m, c.strategy, span, c.tol_list[0], c.tol_list[0],
                                         1e-3 * (p.t1 - p.t0));
  if (p.exact_state && r.completed) r.final_error = p.distance(r.final_state, p.exact_state(r.t_final));
  Output o(out);
  *o.os << "t,h,accepted,err_weighted,projections,matvecs,substeps\r\n";
  char buf[256], err[32];
  for (const auto& s : r.steps) {
    err[0] = '\0';
    if (s.err_weighted) std::snprintf(err, sizeof err, "%.6e", *s.err_weighted);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%s,%d,%ld,%d\r\n", s.t, s.h, s.accepted ? "true" : "false", err,
                  s.projections, s.matvecs, s.substeps);
    *o.os << buf;
  }
  if (!report.empty()) {
    std::ofstream f(report);
    if (!f) throw InvalidArgument("cannot open " + report);
    f << r.to_json(2) << "\n";
  }
  if (r.numeric_failure) return kNumeric;
  if (!r.completed) return kNumeric;
  if (!r.projection_contract_ok) return kThreshold;
  return kOk;
}

int fixed_sweep(const ExperimentConfig& c, const std::string& out, const std::string& report) {
  const ConvergenceResult r = run_convergence(c);
  Output o(out);
  write_csv(*o.os, r);
  json j = {{"method", r.method}, {"problem", r.problem}, {"strategy", r.strategy}, {"reference", r.reference},
            {"completed", r.completed}, {"failure", r.failure}};
  j["slope"] = r.slope ? json(*r.slope) : json(nullptr);
  write_json(report, j);
  if (!r.completed) return kNumeric;
  if (r.slope) {
    const double expect = c.expect_order ? *c.expect_order : resolve_method(c).stiff_order;
    if (expect > 0.0 && std::abs(*r.slope - expect) > band_for(c, expect)) {
      std::cerr << "slope " << *r.slope << " outside " << expect << " +- " << band_for(c, expect) << "\n";
      return kThreshold;
    }
  }
  return kOk;
}

int adaptive_sweep(const ExperimentConfig& c, const std::string& out, const std::string& report) {
  const AdaptiveSweep r = run_adaptive_sweep(c);
  Output o(out);
  write_csv(*o.os, r);
  write_json(report, {{"method", r.method},
                      {"problem", r.problem},
                      {"strategy", r.strategy},
                      {"monotone", r.monotone},
                      {"estimator_slope", r.estimator_slope}});
  bool ok = r.monotone;
  for (const auto& row : r.rows) ok = ok && row.error <= 100.0 * row.tol;
  return ok ? kOk : kThreshold;
}

int strategy_compare(const ExperimentConfig& c, const std::string& out, const std::string& report) {
  const StrategyComparison r = run_strategy_compare(c);
  Output o(out);
  write_csv(*o.os, r);
  json j = {{"method", r.method}, {"problem", r.problem}, {"h", r.h}, {"steps", r.steps},
            {"krylov_tol", r.krylov_tol}, {"contract_ok", r.contract_ok}, {"infeasible", r.infeasible}};
  write_json(report, j);
  bool ok = r.contract_ok;
  for (const auto& row : r.rows) ok = ok && row.max_step_difference <= 100.0 * r.krylov_tol;
  return ok ? kOk : kThreshold;
}

int order_reduction(const ExperimentConfig& c, const std::string& out, const std::string& report) {
  const auto rows = run_order_reduction(c);
  Output o(out);
  write_csv(*o.os, rows);
  json j = json::array();
  for (const auto& r : rows)
    j.push_back({{"problem", r.problem}, {"method", r.method}, {"nominal", r.nominal}, {"slope", r.slope}});
  write_json(report, j);
  for (const auto& r : rows)
    if (!r.detail.completed) return kNumeric;
  return kOk;
}

int check_order(const ExperimentConfig& c, const std::string& out, const std::string& report) {
  const MethodDefinition m = resolve_method(c);
  ConditionOptions opts;
  opts.seed = c.seed;
  const ConditionReport r = check_conditions(m, opts);
  Output o(out);
  *o.os << format_report(r);
  json conds = json::array();
  for (const auto& cr : r.conditions)
    conds.push_back({{"label", cr.label}, {"order", cr.order}, {"residual", cr.residual}, {"satisfied", cr.satisfied}});
  write_json(report, {{"method", r.method}, {"certified_order", r.certified_order},
                      {"declared_order", m.stiff_order}, {"conditions", conds}});
  return r.certified_order < m.stiff_order ? kThreshold : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EPIRK exponential integrators"};
  ExperimentConfig c;
  std::string mode = "single_run", strategy, out, report;
  double band = 0.0;
  bool no_check = false;
  app.add_option("--problem", c.problem, "problem name")->capture_default_str();
  app.add_option("--n", c.n, "grid points per side")->capture_default_str();
  app.add_option("--method", c.method, "builtin scheme")->capture_default_str();
  app.add_option("--tableau-file", c.tableau_file, "tableau file (overrides --method)");
  app.add_option("--strategy", strategy, "vertical | horizontal | mixed (default: method hint)");
  app.add_option("--mode", mode,
                 "fixed_sweep | adaptive_sweep | single_run | check_order | strategy_compare | order_reduction")
      ->capture_default_str();
  app.add_option("--h-list", c.h_list, "step sizes, comma separated")->delimiter(',');
  app.add_option("--tol-list", c.tol_list, "tolerances, comma separated")->delimiter(',');
  app.add_option("--krylov-tol", c.krylov_tol, "Krylov tolerance")->capture_default_str();
  app.add_option("--t-end", c.t_end, "final time");
  app.add_option("--seed", c.seed, "probe seed for check_order")->capture_default_str();
  app.add_option("--steps", c.steps, "steps for strategy_compare")->capture_default_str();
  app.add_option("--expect-order", c.expect_order, "slope target for fixed_sweep (default: declared order)");
  app.add_option("--order-band", band, "allowed slope deviation (default 0.3, 0.4 from order 5)");
  app.add_flag("--no-check", no_check, "report slopes without a threshold");
  app.add_option("--out", out, "CSV output (default stdout)");
  app.add_option("--report-json", report, "JSON summary path");
  app.add_flag_callback("--list", [] {
    for (const auto& n : builtin_names()) std::cout << "method  " << n << "\n";
    for (const auto& n : problem_names()) std::cout << "problem " << n << "\n";
    std::exit(0);
  }, "list methods and problems");
  CLI11_PARSE(app, argc, argv);

  try {
    c.mode = parse_mode(mode);
    c.order_band = band;
    if (no_check) c.expect_order = 0.0;
    const MethodDefinition m = resolve_method(c);
    if (strategy.empty()) {
      c.strategy = m.strategy_hint;
    } else {
      c.strategy = parse_strategy(strategy);
      c.strategy_given = true;
    }
    if (c.mode != Mode::check_order) c.validate();
    switch (c.mode) {
      case Mode::single_run: return single_run(c, out, report);
      case Mode::fixed_sweep: return fixed_sweep(c, out, report);
      case Mode::adaptive_sweep: return adaptive_sweep(c, out, report);
      case Mode::strategy_compare: return strategy_compare(c, out, report);
      case Mode::order_reduction: return order_reduction(c, out, report);
      case Mode::check_order: return check_order(c, out, report);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const PlanInfeasible& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NotAvailable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
