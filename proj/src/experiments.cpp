#include "epirk/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "epirk/errors.hpp"
#include "epirk/tableau_io.hpp"

namespace epirk {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::fixed_sweep: return "fixed_sweep";
    case Mode::adaptive_sweep: return "adaptive_sweep";
    case Mode::single_run: return "single_run";
    case Mode::check_order: return "check_order";
    case Mode::strategy_compare: return "strategy_compare";
    case Mode::order_reduction: return "order_reduction";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::fixed_sweep, Mode::adaptive_sweep, Mode::single_run, Mode::check_order, Mode::strategy_compare,
                 Mode::order_reduction})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown mode " + name);
}

void ExperimentConfig::validate() const {
  for (std::size_t q = 1; q < h_list.size(); ++q)
    if (!(h_list[q] < h_list[q - 1])) throw InvalidArgument("h list must be strictly decreasing");
  for (double h : h_list)
    if (!(h > 0.0)) throw InvalidArgument("step sizes must be positive");
  for (double t : tol_list)
    if (!(t > 0.0)) throw InvalidArgument("tolerances must be positive");
  if ((mode == Mode::fixed_sweep || mode == Mode::order_reduction) && h_list.empty())
    throw InvalidArgument(to_string(mode) + " needs an h list");
  if (mode == Mode::single_run && h_list.size() != 1 && tol_list.size() != 1)
    throw InvalidArgument("single_run needs exactly one h or one tolerance");
  if (mode == Mode::strategy_compare && h_list.size() != 1) throw InvalidArgument("strategy_compare needs one h");
  if (mode == Mode::adaptive_sweep && tol_list.empty()) throw InvalidArgument("adaptive_sweep needs a tolerance list");
  if (!(krylov_tol > 0.0)) throw InvalidArgument("krylov tolerance must be positive");
  if (n < 4) throw InvalidArgument("grid size must be at least 4");
}

MethodDefinition resolve_method(const ExperimentConfig& c) {
  if (!c.tableau_file.empty()) return load_tableau(c.tableau_file);
  return builtin(c.method);
}

Problem resolve_problem(const ExperimentConfig& c) {
  Problem p = make_problem(c.problem, c.n);
  if (c.t_end) p.t1 = *c.t_end;
  return p;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t q = 0; q < x.size(); ++q) {
    if (!(x[q] > 0.0) || !(y[q] > 0.0)) throw InvalidArgument("slope needs positive data");
    const double lx = std::log(x[q]), ly = std::log(y[q]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EPIRK_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) n = v;
  }
  return std::max(1, n);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& f) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(worker_count()));
  if (workers <= 1) {
    for (std::size_t q = 0; q < count; ++q) f(q);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t q = next++; q < count; q = next++) {
        try {
          f(q);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ConvergenceResult run_convergence(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                                  std::vector<double> h_list, double krylov_tol, double t_end) {
  if (h_list.empty()) throw InvalidArgument("empty h list");
  ConvergenceResult out;
  out.method = method.name;
  out.problem = problem.name;
  out.strategy = to_string(strategy);
  const std::pair<double, double> span{problem.t0, t_end};
  Vector reference;
  const bool exact = static_cast<bool>(problem.exact_state);
  if (exact) {
    out.reference = "exact";
    reference = problem.exact_state(t_end);
  }
  std::vector<RunReport> reps(h_list.size() + (exact ? 0 : 1));
  const double h_ref = *std::min_element(h_list.begin(), h_list.end()) / 8.0;
  parallel_for(reps.size(), [&](std::size_t q) {
    if (q < h_list.size()) reps[q] = integrate_fixed(problem, method, strategy, span, h_list[q], krylov_tol);
    else reps[q] = integrate_fixed(problem, method, strategy, span, h_ref, 1e-13);
  });
  if (!exact) {
    const RunReport& ref = reps.back();
    if (!ref.completed) {
      out.completed = false;
      out.failure = "reference run failed: " + ref.failure;
      return out;
    }
    out.reference = "self h=" + std::to_string(h_ref);
    reference = ref.final_state;
  }
  std::vector<double> hs, es;
  for (std::size_t q = 0; q < h_list.size(); ++q) {
    const RunReport& r = reps[q];
    if (!r.completed) {
      out.completed = false;
      out.failure = r.failure;
      continue;
    }
    ConvergenceRow row;
    row.h = h_list[q];
    row.error = problem.distance(r.final_state, reference);
    row.matvecs = r.total_matvecs;
    for (const auto& s : r.steps) row.projections += s.projections;
    row.wall_s = r.wall_time_s;
    out.rows.push_back(row);
    hs.push_back(row.h);
    es.push_back(std::max(row.error, 1e-300));
  }
  if (hs.size() >= 2) out.slope = loglog_slope(hs, es);
  return out;
}

ConvergenceResult run_convergence(const ExperimentConfig& c) {
  c.validate();
  Problem p = resolve_problem(c);
  return run_convergence(p, resolve_method(c), c.strategy, c.h_list, c.krylov_tol, p.t1);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& os, const ConvergenceResult& r) {
  os << "h,error,matvecs,projections,wall_s\r\n";
  for (const auto& row : r.rows)
    os << num(row.h) << "," << num(row.error) << "," << row.matvecs << "," << row.projections << ","
       << num(row.wall_s) << "\r\n";
}

std::optional<int> published_projection_count(const std::string& method, Strategy s) {
  if (method == "EPIRK4s3A") return s == Strategy::mixed ? 2 : 3;
  if (method == "EPIRK4s3B" && s == Strategy::mixed) return 2;
  return std::nullopt;
}

StrategyComparison run_strategy_compare(const Problem& problem, const MethodDefinition& method, double h, int steps,
                                        double krylov_tol) {
  StrategyComparison out;
  out.method = method.name;
  out.problem = problem.name;
  out.h = h;
  out.steps = steps;
  out.krylov_tol = krylov_tol;
  std::vector<std::pair<Strategy, ExecutionPlan>> plans;
  for (Strategy s : {Strategy::vertical, Strategy::horizontal, Strategy::mixed}) {
    try {
      plans.push_back({s, plan(method, s)});
    } catch (const PlanInfeasible& e) {
      out.infeasible.push_back(to_string(s) + ": " + e.what());
    }
  }
  out.rows.resize(plans.size());
  for (std::size_t q = 0; q < plans.size(); ++q) {
    out.rows[q].strategy = plans[q].first;
    out.rows[q].expected_projections = plans[q].second.expected_projection_count;
  }
  // one step under every strategy from the same state, advancing along the first
  Vector u = problem.initial;
  for (int k = 0; k < steps; ++k) {
    std::vector<Vector> next(plans.size());
    for (std::size_t q = 0; q < plans.size(); ++q) {
      auto& row = out.rows[q];
      const auto t0 = std::chrono::steady_clock::now();
      StepResult r = step(make_context(problem, u, h), method, plans[q].second, krylov_tol);
      row.wall_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.total_matvecs += r.jacobian_applies;
      row.projections_per_step = r.projections;
      if (r.projections != row.expected_projections) row.contract_ok = false;
      if (auto pub = published_projection_count(method.name, row.strategy); pub && r.projections != *pub)
        row.contract_ok = false;
      next[q] = std::move(r.u_next);
    }
    for (std::size_t q = 1; q < plans.size(); ++q)
      out.rows[q].max_step_difference =
          std::max(out.rows[q].max_step_difference, (next[q] - next[0]).lpNorm<Eigen::Infinity>());
    u = next[0];
  }
  for (const auto& r : out.rows) out.contract_ok = out.contract_ok && r.contract_ok;
  return out;
}

StrategyComparison run_strategy_compare(const ExperimentConfig& c) {
  c.validate();
  return run_strategy_compare(resolve_problem(c), resolve_method(c), c.h_list.front(), c.steps, c.krylov_tol);
}

void write_csv(std::ostream& os, const StrategyComparison& r) {
  os << "strategy,projections_per_step,expected_projections,total_matvecs,wall_s,max_step_difference,contract_ok\r\n";
  for (const auto& row : r.rows)
    os << to_string(row.strategy) << "," << row.projections_per_step << "," << row.expected_projections << ","
       << row.total_matvecs << "," << num(row.wall_s) << "," << num(row.max_step_difference) << ","
       << (row.contract_ok ? "true" : "false") << "\r\n";
}

std::vector<OrderReductionRow> run_order_reduction(const ExperimentConfig& c) {
  c.validate();
  const MethodDefinition m = resolve_method(c);
  const Strategy s = c.strategy_given ? c.strategy : m.strategy_hint;
  std::vector<std::string> names;
  if (c.problem.find("_nonhomog") != std::string::npos) {
    names = {c.problem.substr(0, c.problem.size() - 9), c.problem};
  } else if (c.problem == "degenerate_diffusion_1d") {
    names = {c.problem};
  } else {
    names = {c.problem, c.problem + "_nonhomog"};
  }
  std::vector<OrderReductionRow> rows;
  for (const auto& name : names) {
    Problem p = make_problem(name, c.n);
    if (c.t_end) p.t1 = *c.t_end;
    OrderReductionRow row;
    row.problem = name;
    row.method = m.name;
    row.nominal = m.stiff_order;
    row.detail = run_convergence(p, m, s, c.h_list, c.krylov_tol, p.t1);
    row.slope = row.detail.slope.value_or(0.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_csv(std::ostream& os, const std::vector<OrderReductionRow>& rows) {
  os << "problem,method,nominal_order,observed_slope,reduction\r\n";
  for (const auto& r : rows)
    os << csv_field(r.problem) << "," << csv_field(r.method) << "," << num(r.nominal) << "," << num(r.slope) << ","
       << num(r.nominal - r.slope) << "\r\n";
}

double estimator_order(const Problem& problem, const MethodDefinition& method, Strategy strategy, const Vector& u,
                       const std::vector<double>& hs, double krylov_tol) {
  const ExecutionPlan pl = plan(method, strategy, true);
  std::vector<double> est;
  for (double h : hs) {
    StepResult r = step(make_context(problem, u, h), method, pl, krylov_tol);
    est.push_back(r.err_estimate.value_or(0.0));
  }
  return loglog_slope(hs, est);
}

AdaptiveSweep run_adaptive_sweep(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                                 const std::vector<double>& tols, double t_end) {
  AdaptiveSweep out;
  out.method = method.name;
  out.problem = problem.name;
  out.strategy = to_string(strategy);
  const std::pair<double, double> span{problem.t0, t_end};
  const double tmin = *std::min_element(tols.begin(), tols.end());
  std::vector<RunReport> reps(tols.size() + 1);
  parallel_for(reps.size(), [&](std::size_t q) {
    if (q < tols.size()) reps[q] = integrate_adaptive(problem, method, strategy, span, tols[q], tols[q], 1e-3 * (t_end - problem.t0));
    else if (!problem.exact_state) {
      // tight fixed-step reference well below the smallest tolerance
      const double h = std::min(0.005, (t_end - problem.t0) / 200.0) * std::pow(std::max(tmin / 1e-6, 1e-3), 0.25);
      reps[q] = integrate_fixed(problem, method, strategy, span, h, 1e-13);
    }
  });
  const Vector reference = problem.exact_state ? problem.exact_state(t_end) : reps.back().final_state;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < tols.size(); ++q) {
    AdaptiveRow row;
    row.tol = tols[q];
    row.error = problem.distance(reps[q].final_state, reference);
    row.steps = reps[q].accepted;
    row.rejections = reps[q].rejected;
    row.matvecs = reps[q].total_matvecs;
    row.wall_s = reps[q].wall_time_s;
    if (!(row.error < prev)) out.monotone = false;
    prev = row.error;
    out.rows.push_back(row);
  }
  std::vector<double> hs;
  for (int k = 0; k < 5; ++k) hs.push_back(0.05 * (t_end - problem.t0) * std::ldexp(1.0, -k));
  out.estimator_slope = estimator_order(problem, method, strategy, problem.initial, hs);
  return out;
}

AdaptiveSweep run_adaptive_sweep(const ExperimentConfig& c) {
  c.validate();
  Problem p = resolve_problem(c);
  return run_adaptive_sweep(p, resolve_method(c), c.strategy, c.tol_list, p.t1);
}

void write_csv(std::ostream& os, const AdaptiveSweep& r) {
  os << "tol,error,steps,rejections,matvecs,wall_s\r\n";
  for (const auto& row : r.rows)
    os << num(row.tol) << "," << num(row.error) << "," << row.steps << "," << row.rejections << "," << row.matvecs
       << "," << num(row.wall_s) << "\r\n";
}

}  // namespace epirk
