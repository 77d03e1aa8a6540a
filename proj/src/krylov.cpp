#include "epirk/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "epirk/errors.hpp"

namespace epirk {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

class ArnoldiProcess {
 public:
  ArnoldiProcess(const LinearOperator& op, const Vector& b, int m_cap, double happy_tol)
      : op_(op), m_cap_(m_cap), happy_tol_(happy_tol) {
    beta_ = b.norm();
    if (!std::isfinite(beta_)) throw NumericFailure("non-finite Krylov start vector", beta_);
    if (beta_ == 0.0) throw InvalidArgument("Krylov start vector is zero");
    V_.resize(op.dimension, m_cap + 1);
    H_ = Matrix::Zero(m_cap + 1, m_cap);
    V_.col(0) = b / beta_;
    w_.resize(op.dimension);
  }

  int extend(int m) {
    m = std::min(m, m_cap_);
    while (size_ < m && !breakdown_) {
      const int j = size_;
      op_.apply(V_.col(j), w_);
      ++matvecs_;
      if (!w_.allFinite()) throw NumericFailure("operator produced a non-finite value");
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double c = V_.col(i).dot(w_);
          H_(i, j) += c;
          w_ -= c * V_.col(i);
        }
        if (pass == 1) ++reorth_;
      }
      const double h = w_.norm();
      H_(j + 1, j) = h;
      size_ = j + 1;
      if (h <= happy_tol_ * beta_) {
        breakdown_ = true;
        H_(j + 1, j) = 0.0;
      } else {
        V_.col(j + 1) = w_ / h;
      }
    }
    return size_;
  }

  int size() const { return size_; }
  bool breakdown() const { return breakdown_; }
  double beta() const { return beta_; }
  long matvecs() const { return matvecs_; }
  int reorth() const { return reorth_; }
  const Matrix& V() const { return V_; }
  const Matrix& H() const { return H_; }
  int cap() const { return m_cap_; }

 private:
  const LinearOperator& op_;
  int m_cap_;
  double happy_tol_;
  double beta_ = 0.0;
  Matrix V_, H_;
  Vector w_;
  int size_ = 0;
  bool breakdown_ = false;
  long matvecs_ = 0;
  int reorth_ = 0;
};

struct Traversal {
  std::vector<Vector> at_waypoints;  // augmented top block at each waypoint
  KrylovReport report;
};

// Basis sizes at which the a posteriori estimate is tried.
const std::vector<int>& checkpoints() {
  static const std::vector<int> c = {4,  6,  8,  10, 12, 15, 18, 22, 26,  30,  35,
                                     40, 46, 52, 60, 68, 78, 88, 100, 112, 128};
  return c;
}

int next_checkpoint(int current, int cap) {
  for (int c : checkpoints())
    if (c > current && c < cap) return c;
  return cap;
}

// One substep estimate: exp(tau H) e1 and the error bound for basis size m.
struct SubstepEval {
  Vector coeffs;  // exp(tau H_m) e1
  double err = 0.0;
};

SubstepEval evaluate_substep(const ArnoldiProcess& proc, double tau) {
  const int m = proc.size();
  const Matrix Hm = proc.H().topLeftCorner(m, m) * tau;
  Vector e1 = Vector::Zero(m);
  e1(0) = 1.0;
  const Matrix cols = phi_times_vector(Hm, e1, 1);
  SubstepEval out;
  out.coeffs = cols.col(0);
  if (!proc.breakdown())
    out.err = proc.beta() * proc.H()(m, m - 1) * tau * std::abs(cols(m - 1, 1));
  return out;
}

// Bases up to this size are always tried before shrinking the substep.
constexpr int kFreeBasis = 60;

// Work model for one substep with basis size m: matvecs, orthogonalization, small exponential.
double substep_cost(int m, Eigen::Index n) {
  const double md = m;
  return static_cast<double>(n) * (10.0 * md + 2.0 * md * md) + 40.0 * md * md * md;
}

Traversal traverse(const LinearOperator& A, const std::vector<PhiTermVector>& terms,
                   const std::vector<double>& waypoints, double tol, const KrylovOptions& opts) {
  const Eigen::Index n = A.dimension;
  int p = 0;
  double wnorm = 0.0;
  for (const auto& t : terms) {
    if (t.k < 0 || t.k > kMaxPhiOrder) throw InvalidArgument("phi index out of range");
    if (t.b.size() != n) throw InvalidArgument("term vector does not match operator dimension");
    if (!t.b.allFinite()) throw NumericFailure("non-finite term vector");
    p = std::max(p, t.k);
    if (t.k > 0) wnorm = std::max(wnorm, t.b.norm());
  }

  Traversal out;
  out.report.result = Vector::Zero(n);
  const Eigen::Index na = n + p;
  Vector w = Vector::Zero(na);
  Matrix W;  // columns b_p, ..., b_1 scaled by eta
  double eta = 1.0;
  if (p > 0) {
    if (wnorm > 0.0) eta = std::ldexp(1.0, -std::ilogb(wnorm));
    W = Matrix::Zero(n, p);
    for (const auto& t : terms)
      if (t.k > 0) W.col(p - t.k) += eta * t.b;
    w(na - 1) = 1.0 / eta;
  }
  for (const auto& t : terms)
    if (t.k == 0) w.head(n) += t.b;

  LinearOperator aug;
  aug.dimension = na;
  aug.apply = [&](const Vector& x, Vector& y) {
    Vector top(n);
    A.apply(x.head(n), top);
    if (p > 0) {
      top += W * x.tail(p);
      y.segment(n, p - 1) = x.segment(n + 1, p - 1);
      y(na - 1) = 0.0;
    }
    y.head(n) = top;
  };

  const double end = waypoints.back();
  std::size_t next_wp = 0;
  double t = 0.0, comp = 0.0;
  double tau = end;
  int m_cap = static_cast<int>(std::min<Eigen::Index>(opts.m_max, na));
  int m_hint = 10;
  auto& rep = out.report;

  while (next_wp < waypoints.size()) {
    const double beta = w.norm();
    if (beta == 0.0) {
      while (next_wp < waypoints.size()) {
        out.at_waypoints.push_back(Vector::Zero(n));
        ++next_wp;
      }
      break;
    }
    const double tol_eff = std::max(tol, 4.0 * kEps * beta);
    ArnoldiProcess proc(aug, w, m_cap, opts.happy_tol);
    const double remaining = waypoints[next_wp] - t;
    bool clipped = false;
    if (tau >= remaining) {
      tau = remaining;
      clipped = true;
    }
    SubstepEval ev;
    int m = 0;
    int target = std::min(m_hint, m_cap);
    for (;;) {
      m = proc.extend(target);
      if (proc.breakdown()) {
        tau = remaining;
        clipped = true;
        ev = evaluate_substep(proc, tau);
        break;
      }
      ev = evaluate_substep(proc, tau);
      if (ev.err <= tol_eff * tau) break;
      const double shrink = std::max(0.2, 0.9 * std::pow(tol_eff * tau / ev.err, 1.0 / m));
      if (m < proc.cap()) {
        const int bigger = next_checkpoint(m, proc.cap());
        if (bigger <= kFreeBasis || substep_cost(bigger, na) < substep_cost(m, na) / shrink) {
          target = bigger;
          continue;
        }
      }
      // shrink the substep on the current basis
      while (ev.err > tol_eff * tau) {
        const double fac = std::max(0.2, 0.9 * std::pow(tol_eff * tau / ev.err, 1.0 / m));
        tau *= fac;
        clipped = false;
        if (tau < 1e-14 * end) throw NumericFailure("Krylov substep underflow", tau);
        ev = evaluate_substep(proc, tau);
      }
      break;
    }
    m_hint = std::max(m, checkpoints().front());
    rep.total_matvecs += proc.matvecs();
    rep.reorthogonalization_passes += proc.reorth();
    rep.operator_norm_estimate = std::max(
        rep.operator_norm_estimate,
        proc.H().topLeftCorner(m, m).cwiseAbs().colwise().sum().maxCoeff());

    w = proc.beta() * (proc.V().leftCols(m) * ev.coeffs);
    if (!w.allFinite()) throw NumericFailure("non-finite Krylov iterate");
    SubstepRecord rec{tau, m, ev.err};
    rep.substeps.push_back(rec);
    rep.est_error += ev.err;
    if (opts.on_substep) opts.on_substep(rec);

    if (clipped) {
      t = waypoints[next_wp];
      comp = 0.0;
      out.at_waypoints.push_back(w.head(n));
      ++next_wp;
    } else {
      const double y = tau - comp;
      const double s = t + y;
      comp = (s - t) - y;
      t = s;
    }
    if (rep.total_matvecs > opts.max_matvecs) {
      rep.result = w.head(n);
      throw BudgetExceeded("Krylov matvec budget exceeded at t=" + std::to_string(t), w.head(n),
                           rep.est_error);
    }
    const double grow =
        ev.err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(tol_eff * tau / ev.err, 1.0 / m))) : 5.0;
    tau *= grow;
  }
  rep.result = out.at_waypoints.back();
  return out;
}

void check_request(const LinearOperator& op, double tol) {
  if (!op.apply || op.dimension <= 0) throw InvalidArgument("operator is empty");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
}

}  // namespace

LinearOperator dense_operator(const Matrix& A) {
  if (A.rows() != A.cols()) throw InvalidArgument("dense operator must be square");
  LinearOperator op;
  op.dimension = A.rows();
  op.apply = [A](const Vector& x, Vector& y) { y.noalias() = A * x; };
  return op;
}

KrylovBasis arnoldi(const LinearOperator& op, const Vector& b, int m_max, double happy_tol) {
  if (m_max < 1) throw InvalidArgument("m_max must be at least 1");
  if (b.size() != op.dimension) throw InvalidArgument("start vector does not match operator");
  const int cap = static_cast<int>(std::min<Eigen::Index>(m_max, op.dimension));
  ArnoldiProcess proc(op, b, cap, happy_tol);
  const int m = proc.extend(cap);
  KrylovBasis basis;
  basis.size = m;
  basis.breakdown = proc.breakdown();
  basis.vectors = proc.V().leftCols(m);
  basis.matvecs = proc.matvecs();
  basis.reorthogonalization_passes = proc.reorth();
  if (proc.breakdown()) {
    basis.breakdown_index = m;
    basis.hessenberg = proc.H().topLeftCorner(m, m);
  } else {
    basis.hessenberg = proc.H().topLeftCorner(m + 1, m);
    basis.next_vector = proc.V().col(m);
  }
  return basis;
}

KrylovReport eval_phi_combination(const PhiCombinationRequest& request, const KrylovOptions& options) {
  check_request(request.op, request.tolerance);
  if (!(request.end_time > 0.0)) throw InvalidArgument("end_time must be positive");
  std::set<int> seen;
  for (const auto& t : request.terms)
    if (!seen.insert(t.k).second) throw InvalidArgument("repeated phi index in request");
  if (request.terms.empty()) {
    KrylovReport rep;
    rep.result = Vector::Zero(request.op.dimension);
    return rep;
  }
  return traverse(request.op, request.terms, {request.end_time}, request.tolerance, options).report;
}

WaypointResult eval_single_phi_with_waypoints(const LinearOperator& op, int k, const Vector& b,
                                              const std::vector<double>& waypoints, double tolerance,
                                              const KrylovOptions& options) {
  check_request(op, tolerance);
  if (waypoints.empty()) throw InvalidArgument("waypoint list is empty");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (!(waypoints[i] > 0.0) || waypoints[i] > 1.0) throw InvalidArgument("waypoint outside (0, 1]");
    if (i > 0 && !(waypoints[i] > waypoints[i - 1])) throw InvalidArgument("waypoints not increasing");
  }
  const double scaled_tol = tolerance * std::pow(waypoints.front(), k);
  Traversal tr = traverse(op, {{k, b}}, waypoints, scaled_tol, options);
  WaypointResult out;
  out.values.reserve(waypoints.size());
  for (std::size_t i = 0; i < waypoints.size(); ++i)
    out.values.push_back(tr.at_waypoints[i] / std::pow(waypoints[i], k));
  out.report = std::move(tr.report);
  return out;
}

}  // namespace epirk
