#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epirk/krylov.hpp"
#include "epirk/problem.hpp"
#include "epirk/run_report.hpp"
#include "epirk/schemes.hpp"

namespace epirk {

enum class JacobianMode { analytic, finite_difference };

struct StepContext {
  Vector u_n;
  double h = 0.0;
  Vector f_n;
  LinearOperator jacobian;  // J_n, unscaled
  std::function<void(const Vector&, Vector&)> rhs;
  mutable long jacobian_applies = 0;
};

StepContext make_context(const Problem& problem, const Vector& u, double h,
                         JacobianMode mode = JacobianMode::analytic);

// r(u) = f(u) - f(u_n) - J_n (u - u_n)
Vector remainder(const Vector& u, const StepContext& ctx);

enum class TaskKind { column, row };

struct ProjectionTask {
  TaskKind kind = TaskKind::column;
  // column: vector source j (1 = h f(u_n), j >= 2 = stage-j vector); row: stage index
  int source = 0;
  int stage = 0;
  bool embedded = false;  // row for the main-minus-embedded difference
  std::vector<Rational> waypoints;  // column: g values; row: the single common g
  int max_order = 0;
  int min_order = 0;
};

struct ExecutionPlan {
  Strategy strategy = Strategy::vertical;
  std::string method;
  int stages = 0;
  bool with_embedded = false;
  std::vector<ProjectionTask> projections;
  int expected_projection_count = 0;

  std::string describe() const;
};

ExecutionPlan plan(const MethodDefinition& method, Strategy strategy, bool with_embedded = false);

struct StepResult {
  Vector u_next;
  std::optional<double> err_estimate;
  Vector error_vector;  // main minus embedded, when estimated
  std::vector<KrylovReport> krylov;
  std::vector<Vector> residual_vectors;  // r(U_i), index i - 2
  int projections = 0;
  long krylov_matvecs = 0;
  long downshift_matvecs = 0;
  long jacobian_applies = 0;  // all J applies including remainders
};

StepResult step(const StepContext& ctx, const MethodDefinition& method, const ExecutionPlan& plan,
                double krylov_tol, const KrylovOptions& krylov = {});

struct IntegratorOptions {
  JacobianMode jacobian = JacobianMode::analytic;
  KrylovOptions krylov;
  long max_steps = 1000000;
  std::function<void(const StepRecord&)> on_step;
};

RunReport integrate_fixed(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                          std::pair<double, double> t_span, double h, double krylov_tol,
                          const IntegratorOptions& options = {});

struct AdaptiveOptions {
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  double krylov_fraction = 0.01;
  double h_max = 0.0;  // 0 = span
};

RunReport integrate_adaptive(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                             std::pair<double, double> t_span, double atol, double rtol, double h0,
                             const IntegratorOptions& options = {}, const AdaptiveOptions& adaptive = {});

}  // namespace epirk
