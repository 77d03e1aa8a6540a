#pragma once

#include <functional>
#include <string>

#include "epirk/phi.hpp"

namespace epirk {

enum class BoundaryCondition { no_flow, neumann_homog, periodic, dirichlet_homog, neumann_nonhomog, dirichlet_nonhomog };

std::string to_string(BoundaryCondition bc);

struct Grid {
  int nx = 0, ny = 1;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 0.0;
  double dx = 0.0, dy = 0.0;
  int species = 1;
};

struct Problem {
  std::string name;
  Eigen::Index dimension = 0;
  std::function<void(const Vector& u, Vector& f)> rhs;
  std::function<void(const Vector& u, const Vector& v, Vector& jv)> jac_apply;
  Vector initial;
  double t0 = 0.0, t1 = 1.0;
  BoundaryCondition bc = BoundaryCondition::dirichlet_homog;
  Grid grid;
  // autonomized clock t' = 1 stored as the last entry, or -1
  Eigen::Index clock_index = -1;
  std::function<Vector(double t)> exact_state;
  std::function<double(double x, double t)> exact_solution;

  Vector f(const Vector& u) const;
  Vector jv(const Vector& u, const Vector& v) const;
  Eigen::Index physical_size() const { return clock_index < 0 ? dimension : clock_index; }
  // max-norm over the physical unknowns
  double distance(const Vector& a, const Vector& b) const;
};

}  // namespace epirk
