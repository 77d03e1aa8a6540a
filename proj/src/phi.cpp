#include "epirk/phi.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "epirk/errors.hpp"

namespace epirk {
namespace {

constexpr int kTaylorTerms = 26;
constexpr double kTaylorRadius = 0.5;
constexpr int kMaxSquarings = 40;

const std::array<double, 64>& inverse_factorials() {
  static const std::array<double, 64> table = [] {
    std::array<double, 64> t{};
    long double f = 1.0L;
    t[0] = 1.0;
    for (int n = 1; n < 64; ++n) {
      f *= n;
      t[n] = static_cast<double>(1.0L / f);
    }
    return t;
  }();
  return table;
}

void check_order(int k) {
  if (k < 0 || k > kMaxPhiOrder)
    throw InvalidArgument("phi order " + std::to_string(k) + " outside [0, 12]");
}

template <class T>
std::array<T, kMaxPhiOrder + 1> phi_all(int k, T z) {
  const auto& inv = inverse_factorials();
  int s = 0;
  double mag = std::abs(z);
  while (mag > kTaylorRadius && s < 200) {
    mag *= 0.5;
    ++s;
  }
  T w = z * std::pow(0.5, s);
  std::array<T, kMaxPhiOrder + 1> phi{};
  for (int j = 0; j <= k; ++j) {
    T acc = T(inv[j + kTaylorTerms - 1]);
    for (int n = kTaylorTerms - 2; n >= 0; --n) acc = acc * w + T(inv[n + j]);
    phi[j] = acc;
  }
  // phi_j(2w) = 2^{-j} [phi_0 phi_j + sum_{i=1}^{j} phi_i/(j-i)!]
  for (int step = 0; step < s; ++step) {
    std::array<T, kMaxPhiOrder + 1> next{};
    for (int j = 0; j <= k; ++j) {
      T acc = phi[0] * phi[j];
      for (int i = 1; i <= j; ++i) acc += phi[i] * inv[j - i];
      next[j] = acc * std::pow(0.5, j);
    }
    phi = next;
  }
  return phi;
}

double norm1(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return A.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace

double inverse_factorial(int n) { return inverse_factorials().at(static_cast<std::size_t>(n)); }

double phi_scalar(int k, double z) {
  check_order(k);
  if (k == 0) return std::exp(z);
  if (z > kTaylorRadius && z <= 100.0) {
    // all terms positive: the plain series is stable here
    double term = inverse_factorial(k), sum = 0.0;
    for (int n = 0; n < 1000 && term > 1e-18 * sum; ++n) {
      sum += term;
      term *= z / static_cast<double>(n + k + 1);
    }
    return sum;
  }
  return phi_all(k, z)[k];
}

std::complex<double> phi_scalar(int k, std::complex<double> z) {
  check_order(k);
  if (k == 0) return std::exp(z);
  return phi_all(k, z)[k];
}

namespace {

// Pade numerator coefficients b_0..b_m for degrees 3, 5, 7, 9, 13 and their norm bounds.
struct PadeRule {
  int degree;
  double theta;
  std::vector<double> b;
};

const std::vector<PadeRule>& pade_rules() {
  static const std::vector<PadeRule> rules = {
      {3, 1.495585217958292e-2, {120., 60., 12., 1.}},
      {5, 2.539398330063230e-1, {30240., 15120., 3360., 420., 30., 1.}},
      {7, 9.504178996162932e-1, {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.}},
      {9, 2.097847961257068, {17643225600., 8821612800., 2075673600., 302702400., 30270240., 2162160., 110880.,
                              3960., 90., 1.}},
      {13, 5.371920351148152, {64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800.,
                               129060195264000., 10559470521600., 670442572800., 33522128640., 1323241920.,
                               40840800., 960960., 16380., 182., 1.}}};
  return rules;
}

Matrix pade_exp(const Matrix& A, const PadeRule& r) {
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const auto& b = r.b;
  const Matrix A2 = A * A;
  Matrix U, V;
  if (r.degree == 13) {
    const Matrix A4 = A2 * A2, A6 = A4 * A2;
    U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  } else {
    Matrix P = I, odd = b[1] * I, even = b[0] * I;
    for (int j = 1; 2 * j <= r.degree; ++j) {
      P = P * A2;
      odd += b[2 * j + 1] * P;
      even += b[2 * j] * P;
    }
    U = A * odd;
    V = even;
  }
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

Matrix expm(const Matrix& A) {
  if (A.rows() != A.cols()) throw InvalidArgument("expm needs a square matrix");
  const double nrm = norm1(A);
  if (!std::isfinite(nrm)) throw NumericFailure("non-finite matrix in expm", nrm);
  const auto& rules = pade_rules();
  for (const auto& r : rules)
    if (r.degree < 13 && nrm <= r.theta) {
      Matrix E = pade_exp(A, r);
      if (!E.allFinite()) throw NumericFailure("matrix exponential overflow", nrm);
      return E;
    }
  int s = 0;
  if (nrm > rules.back().theta) s = static_cast<int>(std::ceil(std::log2(nrm / rules.back().theta)));
  if (s > kMaxSquarings)
    throw NumericFailure("matrix norm too large for scaling and squaring", nrm);
  Matrix E = pade_exp(A * std::ldexp(1.0, -s), rules.back());
  for (int i = 0; i < s; ++i) E = E * E;
  if (!E.allFinite()) throw NumericFailure("matrix exponential overflow", nrm);
  return E;
}

PhiValueTable phi_dense(int k_max, const Matrix& M) {
  if (M.rows() != M.cols()) throw InvalidArgument("phi_dense needs a square matrix");
  check_order(k_max);
  const Eigen::Index n = M.rows();
  const Eigen::Index big = n * (k_max + 1);
  Matrix aug = Matrix::Zero(big, big);
  aug.topLeftCorner(n, n) = M;
  for (int j = 0; j < k_max; ++j)
    aug.block(j * n, (j + 1) * n, n, n).setIdentity();
  const Matrix E = expm(aug);
  PhiValueTable table;
  table.max_index = k_max;
  table.values.reserve(static_cast<std::size_t>(k_max) + 1);
  for (int j = 0; j <= k_max; ++j) table.values.push_back(E.block(0, j * n, n, n));
  return table;
}

Matrix phi_downshift(const PhiValueTable& table, int k, const Matrix& M) {
  if (k < 0 || k + 1 > table.max_index)
    throw InvalidArgument("phi table lacks entry " + std::to_string(k + 1));
  const Matrix& next = table[k + 1];
  if (M.rows() != next.rows() || M.cols() != next.cols())
    throw InvalidArgument("matrix does not match phi table");
  Matrix out = M * next;
  out.diagonal().array() += inverse_factorial(k);
  return out;
}

Matrix phi_times_vector(const Matrix& M, const Vector& v, int p) {
  if (M.rows() != M.cols() || v.size() != M.rows())
    throw InvalidArgument("phi_times_vector dimension mismatch");
  check_order(p);
  const Eigen::Index n = M.rows();
  Matrix aug = Matrix::Zero(n + p, n + p);
  aug.topLeftCorner(n, n) = M;
  if (p > 0) {
    aug.block(0, n, n, 1) = v;
    for (int j = 0; j + 1 < p; ++j) aug(n + j, n + j + 1) = 1.0;
  }
  const Matrix E = expm(aug);
  Matrix out(n, p + 1);
  out.col(0) = E.topLeftCorner(n, n) * v;
  for (int j = 1; j <= p; ++j) out.col(j) = E.block(0, n + j - 1, n, 1);
  return out;
}

}  // namespace epirk
