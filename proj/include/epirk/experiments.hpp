#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "epirk/integrator.hpp"
#include "epirk/order_conditions.hpp"
#include "epirk/problems.hpp"

namespace epirk {

enum class Mode { fixed_sweep, adaptive_sweep, single_run, check_order, strategy_compare, order_reduction };

std::string to_string(Mode m);
Mode parse_mode(const std::string& name);

struct ExperimentConfig {
  std::string problem = "allen_cahn_2d";
  int n = 32;
  std::string method = "EPIRK4s3A";
  std::string tableau_file;
  Strategy strategy = Strategy::mixed;
  bool strategy_given = false;
  Mode mode = Mode::single_run;
  std::vector<double> h_list;
  std::vector<double> tol_list;
  double krylov_tol = 1e-12;
  std::optional<double> t_end;
  std::uint64_t seed = 0;
  int steps = 10;  // strategy_compare
  std::optional<double> expect_order;
  double order_band = 0.0;  // 0: 0.3, or 0.4 from order 5

  void validate() const;
};

MethodDefinition resolve_method(const ExperimentConfig& c);
Problem resolve_problem(const ExperimentConfig& c);

// least-squares slope of log(y) against log(x)
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Runs f(0..count-1) on a pool sized by EPIRK_THREADS (default: hardware threads).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& f);
int worker_count();

struct ConvergenceRow {
  double h = 0.0;
  double error = 0.0;
  long matvecs = 0;
  long projections = 0;
  double wall_s = 0.0;
};

struct ConvergenceResult {
  std::string method, problem, strategy, reference;
  std::vector<ConvergenceRow> rows;
  std::optional<double> slope;
  bool completed = true;
  std::string failure;
};

// Errors against the exact solution when available, otherwise against a tight-step run at h_min / 8.
ConvergenceResult run_convergence(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                                  std::vector<double> h_list, double krylov_tol, double t_end);
ConvergenceResult run_convergence(const ExperimentConfig& config);
void write_csv(std::ostream& os, const ConvergenceResult& r);

struct StrategyRow {
  Strategy strategy = Strategy::vertical;
  int projections_per_step = 0;
  int expected_projections = 0;
  long total_matvecs = 0;
  double wall_s = 0.0;
  double max_step_difference = 0.0;  // vs the first feasible strategy, same starting state
  bool contract_ok = true;
};

struct StrategyComparison {
  std::string method, problem;
  double h = 0.0, krylov_tol = 0.0;
  int steps = 0;
  std::vector<StrategyRow> rows;
  std::vector<std::string> infeasible;
  bool contract_ok = true;
};

StrategyComparison run_strategy_compare(const Problem& problem, const MethodDefinition& method, double h, int steps,
                                        double krylov_tol);
StrategyComparison run_strategy_compare(const ExperimentConfig& config);
void write_csv(std::ostream& os, const StrategyComparison& r);

// Known per-step projection counts for the builtins; empty when there is no fixed expectation.
std::optional<int> published_projection_count(const std::string& method, Strategy s);

struct OrderReductionRow {
  std::string problem;
  std::string method;
  double slope = 0.0;
  double nominal = 0.0;
  ConvergenceResult detail;
};

std::vector<OrderReductionRow> run_order_reduction(const ExperimentConfig& config);
void write_csv(std::ostream& os, const std::vector<OrderReductionRow>& rows);

struct AdaptiveRow {
  double tol = 0.0;
  double error = 0.0;
  long steps = 0;
  long rejections = 0;
  long matvecs = 0;
  double wall_s = 0.0;
};

struct AdaptiveSweep {
  std::string method, problem, strategy;
  std::vector<AdaptiveRow> rows;
  bool monotone = true;
  double estimator_slope = 0.0;
};

AdaptiveSweep run_adaptive_sweep(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                                 const std::vector<double>& tols, double t_end);
AdaptiveSweep run_adaptive_sweep(const ExperimentConfig& config);
void write_csv(std::ostream& os, const AdaptiveSweep& r);

// Slope of the embedded estimate against h for single steps from the same state.
double estimator_order(const Problem& problem, const MethodDefinition& method, Strategy strategy, const Vector& u,
                       const std::vector<double>& hs, double krylov_tol = 1e-14);

}  // namespace epirk
