#pragma once

#include <string>
#include <vector>

#include "epirk/problem.hpp"

namespace epirk {

Problem allen_cahn_2d(int n_per_side, bool nonhomog = false);
Problem adr_2d(int n_per_side);
// block layout [u; v]
Problem brusselator_2d(int n_per_side, bool nonhomog = false);
Problem gray_scott_2d(int n_per_side, double t_end = 1.0);

enum class ParabolicForcing {
  analytic,       // source from the continuous integral, exact up to O(dx^2)
  discrete_exact  // source built with the trapezoid sum so x(1-x)e^t solves the semi-discrete system
};
Problem semilinear_parabolic_1d(int n, ParabolicForcing forcing = ParabolicForcing::discrete_exact);
Problem degenerate_diffusion_1d(int n);
// u_t = u_xx on (0,1), homogeneous Dirichlet
Problem heat_1d(int n);
Problem zero_problem(int n);

std::vector<std::string> problem_names();
// n = points per side for 2D problems, interior points for 1D problems
Problem make_problem(const std::string& name, int n);

// dense Jacobian at u, column by column
Matrix dense_jacobian(const Problem& p, const Vector& u);

}  // namespace epirk
