#include "epirk/integrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "epirk/errors.hpp"

namespace epirk {
namespace {

// One stage written as combinations acting on the source vectors w_1 = h f(u_n), w_j (j >= 2).
struct Row {
  int index = 0;  // stage index; stages + 2 for the embedded difference
  bool embedded = false;
  std::vector<PhiSum> terms;  // terms[j], j = 1..stages
};

std::vector<Row> build_rows(const MethodDefinition& m, bool with_embedded) {
  std::vector<Row> rows;
  for (int i = 2; i <= m.final_index(); ++i) {
    Row r;
    r.index = i;
    r.terms.resize(static_cast<std::size_t>(m.stages) + 1);
    const FirstTerm& ft = m.first_term(i);
    r.terms[1] = normalized({ft.psi.times(ft.alpha)});
    for (int j = 2; j < i; ++j) r.terms[j] = normalized(m.coeff(i, j));
    rows.push_back(std::move(r));
  }
  if (with_embedded) {
    if (!m.embedded) throw NotAvailable(m.name + " has no embedded estimator");
    const EmbeddedStage& e = *m.embedded;
    Row d;
    d.index = m.final_index() + 1;
    d.embedded = true;
    d.terms.resize(static_cast<std::size_t>(m.stages) + 1);
    const Row& main = rows.back();
    d.terms[1] = add(main.terms[1], {e.first.psi.times(-e.first.alpha)});
    for (int j = 2; j <= m.stages; ++j) {
      const PhiSum emb = j < static_cast<int>(e.coupling.size()) ? e.coupling[j] : PhiSum{};
      d.terms[j] = add(main.terms[j], scaled(emb, Rational(-1)));
    }
    rows.push_back(std::move(d));
  }
  return rows;
}

bool row_empty(const Row& r) {
  for (const auto& t : r.terms)
    if (!is_zero(t)) return false;
  return true;
}

std::optional<Rational> common_scale(const Row& r, Rational* other) {
  std::optional<Rational> g;
  for (const auto& sum : r.terms)
    for (const auto& c : sum) {
      if (c.is_zero()) continue;
      if (!g) g = c.scale;
      else if (!(*g == c.scale)) {
        if (other) *other = c.scale;
        return std::nullopt;
      }
    }
  return g;
}

bool row_as_projection(Strategy s, const Row& r, int final_index) {
  if (s == Strategy::horizontal) return true;
  if (s == Strategy::mixed) return r.index >= final_index;
  return false;
}

}  // namespace

StepContext make_context(const Problem& problem, const Vector& u, double h, JacobianMode mode) {
  if (u.size() != problem.dimension) throw InvalidArgument("state dimension mismatch");
  if (!(h > 0.0)) throw InvalidArgument("step size must be positive");
  StepContext ctx;
  ctx.u_n = u;
  ctx.h = h;
  ctx.rhs = problem.rhs;
  ctx.f_n = problem.f(u);
  if (!ctx.f_n.allFinite()) throw NumericFailure("non-finite f(u_n)");
  ctx.jacobian.dimension = problem.dimension;
  if (mode == JacobianMode::analytic) {
    const Problem* p = &problem;
    const Vector un = u;
    ctx.jacobian.apply = [p, un](const Vector& x, Vector& y) { p->jac_apply(un, x, y); };
  } else {
    const Problem* p = &problem;
    const Vector un = u;
    const Vector fn = ctx.f_n;
    ctx.jacobian.apply = [p, un, fn](const Vector& x, Vector& y) {
      const double nx = x.norm();
      if (nx == 0.0) {
        y.setZero();
        return;
      }
      const double eps = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + un.norm()) / nx;
      Vector fp(un.size());
      p->rhs(un + eps * x, fp);
      y = (fp - fn) / eps;
    };
  }
  return ctx;
}

Vector remainder(const Vector& u, const StepContext& ctx) {
  if (u.size() != ctx.u_n.size()) throw InvalidArgument("remainder dimension mismatch");
  Vector fu(u.size());
  ctx.rhs(u, fu);
  if (!fu.allFinite()) throw NumericFailure("non-finite f in remainder");
  ++ctx.jacobian_applies;
  return fu - ctx.f_n - ctx.jacobian(u - ctx.u_n);
}

std::string ExecutionPlan::describe() const {
  std::ostringstream os;
  os << method << " " << to_string(strategy) << ": " << expected_projection_count << " projections\n";
  for (const auto& t : projections) {
    if (t.kind == TaskKind::column) {
      os << "  column source " << t.source << " phi_" << t.max_order << " at g =";
      for (const auto& g : t.waypoints) os << " " << g.str();
      if (t.min_order < t.max_order) os << " (downshift to phi_" << t.min_order << ")";
    } else {
      os << "  row " << (t.embedded ? std::string("embedded difference") : "stage " + std::to_string(t.stage))
         << " at g = " << t.waypoints.front().str() << " orders " << t.min_order << ".." << t.max_order;
    }
    os << "\n";
  }
  return os.str();
}

ExecutionPlan plan(const MethodDefinition& method, Strategy strategy, bool with_embedded) {
  const std::vector<Row> rows = build_rows(method, with_embedded);
  ExecutionPlan p;
  p.strategy = strategy;
  p.method = method.name;
  p.stages = method.stages;
  p.with_embedded = with_embedded;
  const int fin = method.final_index();

  // column needs: source -> (g set, order range)
  std::map<int, ProjectionTask> columns;
  std::vector<ProjectionTask> row_tasks;
  for (const Row& r : rows) {
    if (row_empty(r)) continue;
    if (row_as_projection(strategy, r, fin)) {
      Rational other;
      auto g = common_scale(r, &other);
      if (!g) {
        std::ostringstream os;
        os << "stage " << (r.embedded ? fin : r.index) << " mixes scales";
        for (const auto& sum : r.terms)
          for (const auto& c : sum)
            if (!c.is_zero()) os << " " << c.scale.str();
        os << "; a single row projection needs one common g";
        throw PlanInfeasible(os.str(), r.embedded ? fin : r.index);
      }
      ProjectionTask t;
      t.kind = TaskKind::row;
      t.stage = r.embedded ? fin : r.index;
      t.embedded = r.embedded;
      t.waypoints = {*g};
      t.max_order = 0;
      t.min_order = kMaxPhiOrder;
      for (const auto& sum : r.terms)
        for (const auto& c : sum)
          if (!c.is_zero()) {
            t.max_order = std::max(t.max_order, c.max_order());
            t.min_order = std::min(t.min_order, c.min_order());
          }
      row_tasks.push_back(t);
      continue;
    }
    for (int j = 1; j < static_cast<int>(r.terms.size()); ++j)
      for (const auto& c : r.terms[j]) {
        if (c.is_zero()) continue;
        auto [it, fresh] = columns.try_emplace(j);
        ProjectionTask& t = it->second;
        if (fresh) {
          t.kind = TaskKind::column;
          t.source = j;
          t.max_order = c.max_order();
          t.min_order = c.min_order();
        }
        t.max_order = std::max(t.max_order, c.max_order());
        t.min_order = std::min(t.min_order, c.min_order());
        if (std::find(t.waypoints.begin(), t.waypoints.end(), c.scale) == t.waypoints.end())
          t.waypoints.push_back(c.scale);
      }
  }
  for (auto& [j, t] : columns) {
    std::sort(t.waypoints.begin(), t.waypoints.end());
    p.projections.push_back(t);
  }
  p.projections.insert(p.projections.end(), row_tasks.begin(), row_tasks.end());
  p.expected_projection_count = static_cast<int>(p.projections.size());
  return p;
}

StepResult step(const StepContext& ctx, const MethodDefinition& method, const ExecutionPlan& pl, double krylov_tol,
                const KrylovOptions& kopts) {
  if (pl.method != method.name || pl.stages != method.stages) throw InvalidArgument("plan built for another method");
  if (!(krylov_tol > 0.0)) throw InvalidArgument("krylov tolerance must be positive");
  const std::vector<Row> rows = build_rows(method, pl.with_embedded);
  const int s = method.stages;
  const int fin = method.final_index();
  const double h = ctx.h;
  const long applies0 = ctx.jacobian_applies;

  StepResult out;
  LinearOperator A;
  A.dimension = ctx.jacobian.dimension;
  const LinearOperator J = ctx.jacobian;
  A.apply = [J, h](const Vector& x, Vector& y) {
    J.apply(x, y);
    y *= h;
  };

  std::vector<Vector> w(static_cast<std::size_t>(s) + 1);
  std::vector<Vector> r(static_cast<std::size_t>(s) + 1);  // r(U_j), r[1] = r(u_n) = 0
  w[1] = h * ctx.f_n;
  r[1] = Vector::Zero(ctx.u_n.size());

  // phi_k(g A) w_j
  std::map<std::tuple<int, Rational, int>, Vector> colval;

  auto fail = [&](int stage, const std::exception& e, bool numeric) -> StepFailure {
    return StepFailure("stage " + std::to_string(stage) + ": " + e.what(), stage, numeric);
  };

  auto run_column = [&](const ProjectionTask& t, int stage_tag) {
    const Vector& src = w[t.source];
    std::vector<double> gs;
    for (const auto& g : t.waypoints) gs.push_back(g.value());
    if (src.isZero(0.0)) {
      for (const auto& g : t.waypoints)
        for (int k = t.min_order; k <= t.max_order; ++k)
          colval[{t.source, g, k}] = inverse_factorial(k) * src;
      ++out.projections;
      return;
    }
    WaypointResult wr;
    try {
      wr = eval_single_phi_with_waypoints(A, t.max_order, src, gs, krylov_tol, kopts);
    } catch (const BudgetExceeded& e) {
      throw fail(stage_tag, e, false);
    } catch (const NumericFailure& e) {
      throw fail(stage_tag, e, true);
    }
    ++out.projections;
    out.krylov_matvecs += wr.report.total_matvecs;
    out.krylov.push_back(wr.report);
    for (std::size_t q = 0; q < t.waypoints.size(); ++q) {
      Vector cur = wr.values[q];
      colval[{t.source, t.waypoints[q], t.max_order}] = cur;
      for (int k = t.max_order - 1; k >= t.min_order; --k) {
        Vector Ax(cur.size());
        A.apply(cur, Ax);
        ++out.downshift_matvecs;
        cur = gs[q] * Ax + inverse_factorial(k) * src;
        colval[{t.source, t.waypoints[q], k}] = cur;
      }
    }
  };

  auto run_row = [&](const ProjectionTask& t, const Row& row) -> Vector {
    const Rational g = t.waypoints.front();
    const double gv = g.value();
    std::map<int, Vector> b;
    for (int j = 1; j < static_cast<int>(row.terms.size()); ++j)
      for (const auto& c : row.terms[j])
        for (const auto& term : c.terms) {
          if (term.coeff.is_zero()) continue;
          auto [it, fresh] = b.try_emplace(term.k, Vector::Zero(ctx.u_n.size()));
          it->second += (term.coeff.value() / std::pow(gv, term.k)) * w[j];
        }
    PhiCombinationRequest req;
    req.op = A;
    req.end_time = gv;
    req.tolerance = krylov_tol;
    bool all_zero = true;
    for (auto& [k, v] : b) {
      if (!v.isZero(0.0)) all_zero = false;
      req.terms.push_back({k, v});
    }
    ++out.projections;
    if (all_zero) return Vector::Zero(ctx.u_n.size());
    try {
      KrylovReport rep = eval_phi_combination(req, kopts);
      out.krylov_matvecs += rep.total_matvecs;
      Vector res = rep.result;
      out.krylov.push_back(std::move(rep));
      return res;
    } catch (const BudgetExceeded& e) {
      throw fail(t.stage, e, false);
    } catch (const NumericFailure& e) {
      throw fail(t.stage, e, true);
    }
  };

  auto from_columns = [&](const Row& row) -> Vector {
    Vector acc = Vector::Zero(ctx.u_n.size());
    for (int j = 1; j < static_cast<int>(row.terms.size()); ++j)
      for (const auto& c : row.terms[j])
        for (const auto& term : c.terms) {
          if (term.coeff.is_zero()) continue;
          auto it = colval.find({j, c.scale, term.k});
          if (it == colval.end()) throw std::logic_error("plan does not cover a column term");
          acc += term.coeff.value() * it->second;
        }
    return acc;
  };

  auto columns_for = [&](int source) {
    for (const auto& t : pl.projections)
      if (t.kind == TaskKind::column && t.source == source) run_column(t, source == 1 ? 2 : source + 1);
  };
  auto row_task = [&](const Row& row) -> const ProjectionTask* {
    for (const auto& t : pl.projections)
      if (t.kind == TaskKind::row && t.embedded == row.embedded && (row.embedded || t.stage == row.index)) return &t;
    return nullptr;
  };

  auto source_vector = [&](int j) -> Vector {
    if (method.form == MethodForm::residual) return h * r[j];
    Vector d = Vector::Zero(ctx.u_n.size());
    for (int l = 2; l <= j; ++l) {
      double c = 1.0;
      for (int q = 1; q <= l - 1; ++q) c = c * (j - q) / q;  // C(j-1, l-1)
      d += (((j - l) % 2) ? -c : c) * r[l];
    }
    return h * d;
  };

  columns_for(1);
  for (const Row& row : rows) {
    Vector incr;
    if (row_empty(row)) incr = Vector::Zero(ctx.u_n.size());
    else if (const ProjectionTask* t = row_task(row)) incr = run_row(*t, row);
    else incr = from_columns(row);

    if (row.embedded) {
      out.error_vector = incr;
      out.err_estimate = incr.lpNorm<Eigen::Infinity>();
      continue;
    }
    Vector U = ctx.u_n + incr;
    if (!U.allFinite()) throw StepFailure("stage " + std::to_string(row.index) + ": non-finite stage value", row.index, true);
    if (row.index == fin) {
      out.u_next = std::move(U);
      continue;
    }
    try {
      r[row.index] = remainder(U, ctx);
    } catch (const NumericFailure& e) {
      throw fail(row.index, e, true);
    }
    out.residual_vectors.push_back(r[row.index]);
    w[row.index] = source_vector(row.index);
    columns_for(row.index);
  }
  out.jacobian_applies = (ctx.jacobian_applies - applies0) + out.krylov_matvecs + out.downshift_matvecs;
  return out;
}

namespace {

RunReport start_report(const Problem& problem, const MethodDefinition& method, Strategy strategy, int expected) {
  RunReport rep;
  rep.method = method.name;
  rep.strategy = to_string(strategy);
  rep.problem = problem.name;
  rep.N = static_cast<long>(problem.physical_size());
  rep.expected_projections = expected;
  return rep;
}

void finish_report(RunReport& rep, const Problem& problem, const Vector& u, double t,
                   std::chrono::steady_clock::time_point t_start) {
  rep.final_state = u;
  rep.t_final = t;
  if (problem.exact_state && rep.completed) rep.final_error = problem.distance(u, problem.exact_state(t));
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
}

int substeps_of(const StepResult& r) {
  int n = 0;
  for (const auto& k : r.krylov) n += static_cast<int>(k.substeps.size());
  return n;
}

}  // namespace

RunReport integrate_fixed(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                          std::pair<double, double> span, double h, double krylov_tol,
                          const IntegratorOptions& options) {
  if (!(h > 0.0)) throw InvalidArgument("h must be positive");
  if (!(span.second > span.first)) throw InvalidArgument("empty time span");
  const ExecutionPlan pl = plan(method, strategy, false);
  RunReport rep = start_report(problem, method, strategy, pl.expected_projection_count);
  rep.h = h;
  rep.krylov_tol = krylov_tol;
  const auto t_start = std::chrono::steady_clock::now();
  const double len = span.second - span.first;
  const long n = std::max<long>(1, static_cast<long>(std::ceil(len / h - 1e-12)));
  if (n > options.max_steps) throw InvalidArgument("step count exceeds max_steps");
  Vector u = problem.initial;
  double t = span.first;
  for (long q = 0; q < n; ++q) {
    const double t_next = q + 1 == n ? span.second : span.first + (q + 1) * h;
    const double hq = t_next - t;
    try {
      StepContext ctx = make_context(problem, u, hq, options.jacobian);
      StepResult sr = step(ctx, method, pl, krylov_tol, options.krylov);
      StepRecord rec;
      rec.t = t;
      rec.h = hq;
      rec.projections = sr.projections;
      rec.matvecs = sr.jacobian_applies;
      rec.substeps = substeps_of(sr);
      if (sr.projections != pl.expected_projection_count) rep.projection_contract_ok = false;
      rep.total_matvecs += sr.jacobian_applies;
      rep.steps.push_back(rec);
      ++rep.accepted;
      if (options.on_step) options.on_step(rec);
      u = std::move(sr.u_next);
      t = t_next;
    } catch (const StepFailure& e) {
      rep.completed = false;
      rep.failure = e.what();
      rep.numeric_failure = e.numeric();
      break;
    } catch (const NumericFailure& e) {
      rep.completed = false;
      rep.failure = e.what();
      rep.numeric_failure = true;
      break;
    }
  }
  finish_report(rep, problem, u, t, t_start);
  return rep;
}

RunReport integrate_adaptive(const Problem& problem, const MethodDefinition& method, Strategy strategy,
                             std::pair<double, double> span, double atol, double rtol, double h0,
                             const IntegratorOptions& options, const AdaptiveOptions& ad) {
  if (!method.embedded) throw NotAvailable(method.name + " has no embedded estimator");
  if (!(atol > 0.0) || !(rtol >= 0.0)) throw InvalidArgument("tolerances must be positive");
  if (!(h0 > 0.0)) throw InvalidArgument("h0 must be positive");
  if (!(span.second > span.first)) throw InvalidArgument("empty time span");
  const ExecutionPlan pl = plan(method, strategy, true);
  RunReport rep = start_report(problem, method, strategy, pl.expected_projection_count);
  rep.atol = atol;
  rep.rtol = rtol;
  const auto t_start = std::chrono::steady_clock::now();
  const double len = span.second - span.first;
  const double h_max = ad.h_max > 0.0 ? ad.h_max : len;
  const double expo = 1.0 / (method.embedded->order + 1);
  Vector u = problem.initial;
  double t = span.first;
  double h = std::min(h0, h_max);
  long attempts = 0;
  while (t < span.second) {
    if (++attempts > options.max_steps) {
      rep.completed = false;
      rep.failure = "step limit reached";
      break;
    }
    bool last = false;
    if (t + h >= span.second - 1e-14 * len) {
      h = span.second - t;
      last = true;
    }
    if (h < 1e-14 * len) throw StiffnessFailure("step size underflow at t = " + std::to_string(t), h);
    const double unorm = u.head(problem.physical_size()).lpNorm<Eigen::Infinity>();
    const double ktol = ad.krylov_fraction * std::max(std::min(atol, rtol > 0.0 ? rtol * unorm : atol), 1e-300);
    rep.krylov_tol = rep.krylov_tol == 0.0 ? ktol : std::min(rep.krylov_tol, ktol);
    StepResult sr;
    try {
      StepContext ctx = make_context(problem, u, h, options.jacobian);
      sr = step(ctx, method, pl, ktol, options.krylov);
    } catch (const StepFailure& e) {
      if (e.numeric()) {
        rep.completed = false;
        rep.failure = e.what();
        rep.numeric_failure = true;
        break;
      }
      StepRecord rec;
      rec.t = t;
      rec.h = h;
      rec.accepted = false;
      rec.h_next = h * ad.min_factor;
      rep.steps.push_back(rec);
      ++rep.rejected;
      h *= ad.min_factor;
      continue;
    }
    double err = 0.0;
    for (Eigen::Index q = 0; q < problem.physical_size(); ++q) {
      const double sc = atol + rtol * std::max(std::abs(u[q]), std::abs(sr.u_next[q]));
      err = std::max(err, std::abs(sr.error_vector[q]) / sc);
    }
    if (!std::isfinite(err)) err = 1e10;
    double factor = err == 0.0 ? ad.max_factor : ad.safety * std::pow(err, -expo);
    factor = std::min(ad.max_factor, std::max(ad.min_factor, factor));
    StepRecord rec;
    rec.t = t;
    rec.h = h;
    rec.err_weighted = err;
    rec.projections = sr.projections;
    rec.matvecs = sr.jacobian_applies;
    rec.substeps = substeps_of(sr);
    rep.total_matvecs += sr.jacobian_applies;
    if (sr.projections != pl.expected_projection_count) rep.projection_contract_ok = false;
    if (err <= 1.0) {
      rec.accepted = true;
      ++rep.accepted;
      u = std::move(sr.u_next);
      t = last ? span.second : t + h;
      h = std::min(h_max, h * factor);
    } else {
      rec.accepted = false;
      ++rep.rejected;
      h *= std::min(1.0, factor);
    }
    rec.h_next = h;
    rep.steps.push_back(rec);
    if (options.on_step) options.on_step(rec);
  }
  finish_report(rep, problem, u, t, t_start);
  return rep;
}

}  // namespace epirk
