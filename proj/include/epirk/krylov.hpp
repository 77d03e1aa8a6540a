#pragma once

#include <functional>
#include <vector>

#include "epirk/phi.hpp"

namespace epirk {

struct LinearOperator {
  Eigen::Index dimension = 0;
  // y = A x; y arrives sized to dimension
  std::function<void(const Vector& x, Vector& y)> apply;

  Vector operator()(const Vector& x) const {
    Vector y(dimension);
    apply(x, y);
    return y;
  }
};

LinearOperator dense_operator(const Matrix& A);

struct KrylovBasis {
  Matrix vectors;      // N x m, orthonormal columns v_1..v_m
  Vector next_vector;  // v_{m+1}; empty after breakdown
  Matrix hessenberg;   // (m+1) x m, or m x m after breakdown
  Eigen::Index size = 0;
  bool breakdown = false;
  Eigen::Index breakdown_index = -1;
  long matvecs = 0;
  int reorthogonalization_passes = 0;
};

KrylovBasis arnoldi(const LinearOperator& op, const Vector& b, int m_max, double happy_tol = 1e-12);

struct PhiTermVector {
  int k = 0;
  Vector b;
};

struct PhiCombinationRequest {
  LinearOperator op;
  std::vector<PhiTermVector> terms;
  double end_time = 1.0;
  double tolerance = 1e-10;
};

struct SubstepRecord {
  double tau = 0.0;
  int m = 0;
  double est_error = 0.0;
};

struct KrylovOptions {
  int m_max = 128;
  long max_matvecs = 1000000;
  double happy_tol = 1e-12;
  std::function<void(const SubstepRecord&)> on_substep;
};

struct KrylovReport {
  Vector result;
  std::vector<SubstepRecord> substeps;
  long total_matvecs = 0;
  double est_error = 0.0;
  int reorthogonalization_passes = 0;
  double operator_norm_estimate = 0.0;  // max ||H_m||_1 seen while traversing
};

// u(g) = sum_k g^k phi_k(gA) b_k, by adaptive substepping of an augmented exponential.
KrylovReport eval_phi_combination(const PhiCombinationRequest& request, const KrylovOptions& options = {});

struct WaypointResult {
  std::vector<Vector> values;  // phi_k(g A) b for each waypoint g
  KrylovReport report;
};

WaypointResult eval_single_phi_with_waypoints(const LinearOperator& op, int k, const Vector& b,
                                              const std::vector<double>& waypoints, double tolerance,
                                              const KrylovOptions& options = {});

}  // namespace epirk
