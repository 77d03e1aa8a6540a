#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace epirk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kMaxPhiOrder = 12;

// phi_k(z) = integral_0^1 e^{(1-t)z} t^{k-1}/(k-1)! dt, phi_0 = exp.
double phi_scalar(int k, double z);
std::complex<double> phi_scalar(int k, std::complex<double> z);

struct PhiValueTable {
  int max_index = 0;
  std::vector<Matrix> values;  // values[k] = phi_k(M)

  const Matrix& operator[](int k) const { return values.at(static_cast<std::size_t>(k)); }
};

// phi_0..phi_{k_max} of a small dense matrix from one augmented exponential.
PhiValueTable phi_dense(int k_max, const Matrix& M);

// phi_k(M) = M phi_{k+1}(M) + I/k!
Matrix phi_downshift(const PhiValueTable& table, int k, const Matrix& M);

// Columns phi_0(M)v, ..., phi_p(M)v from one exponential of size n + p.
Matrix phi_times_vector(const Matrix& M, const Vector& v, int p);

// Scaling and squaring with a truncated Taylor kernel.
Matrix expm(const Matrix& A);

double inverse_factorial(int n);

}  // namespace epirk
