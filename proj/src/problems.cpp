#include <cmath>
#include <numbers>

#include "epirk/errors.hpp"
#include "epirk/problems.hpp"

namespace epirk {

std::string to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::no_flow: return "no_flow";
    case BoundaryCondition::neumann_homog: return "neumann_homog";
    case BoundaryCondition::periodic: return "periodic";
    case BoundaryCondition::dirichlet_homog: return "dirichlet_homog";
    case BoundaryCondition::neumann_nonhomog: return "neumann_nonhomog";
    case BoundaryCondition::dirichlet_nonhomog: return "dirichlet_nonhomog";
  }
  return "?";
}

Vector Problem::f(const Vector& u) const {
  Vector out(dimension);
  rhs(u, out);
  return out;
}

Vector Problem::jv(const Vector& u, const Vector& v) const {
  Vector out(dimension);
  jac_apply(u, v, out);
  return out;
}

double Problem::distance(const Vector& a, const Vector& b) const {
  const Eigen::Index n = physical_size();
  return (a.head(n) - b.head(n)).lpNorm<Eigen::Infinity>();
}

namespace {

constexpr double kPi = std::numbers::pi;

enum class Edge { mirror, periodic, zero };

struct Mesh {
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0, dx = 0, dy = 0;
  Edge edge = Edge::mirror;
  Eigen::Index size() const { return static_cast<Eigen::Index>(nx) * ny; }
  double x(int i) const { return x0 + i * dx; }
  double y(int j) const { return y0 + j * dy; }
};

// vertex grid including the boundary nodes (mirror), periodic grid, or interior nodes only (zero)
Mesh make_mesh(int n, double a, double b, Edge e) {
  if (n < 4) throw InvalidArgument("need at least 4 points per side");
  Mesh m;
  m.nx = m.ny = n;
  m.edge = e;
  if (e == Edge::mirror) m.dx = (b - a) / (n - 1);
  else if (e == Edge::periodic) m.dx = (b - a) / n;
  else m.dx = (b - a) / (n + 1);
  m.dy = m.dx;
  m.x0 = m.y0 = e == Edge::zero ? a + m.dx : a;
  return m;
}

int wrap(int i, int n) { return (i % n + n) % n; }

// value of u at (i, j) with ghost handling; zero edges read 0 outside
double at(const Mesh& m, const double* u, int i, int j) {
  if (m.edge == Edge::periodic) return u[wrap(i, m.nx) + m.nx * wrap(j, m.ny)];
  if (m.edge == Edge::mirror) {
    if (i < 0) i = 1;
    if (i >= m.nx) i = m.nx - 2;
    if (j < 0) j = 1;
    if (j >= m.ny) j = m.ny - 2;
    return u[i + m.nx * j];
  }
  if (i < 0 || i >= m.nx || j < 0 || j >= m.ny) return 0.0;
  return u[i + m.nx * j];
}

void laplacian(const Mesh& m, const double* u, double* out) {
  const double cx = 1.0 / (m.dx * m.dx), cy = 1.0 / (m.dy * m.dy);
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i) {
      const double c = u[i + m.nx * j];
      out[i + m.nx * j] = cx * (at(m, u, i - 1, j) - 2 * c + at(m, u, i + 1, j)) +
                          cy * (at(m, u, i, j - 1) - 2 * c + at(m, u, i, j + 1));
    }
}

// centered u_x + u_y
void gradient_sum(const Mesh& m, const double* u, double* out) {
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i)
      out[i + m.nx * j] = (at(m, u, i + 1, j) - at(m, u, i - 1, j)) / (2 * m.dx) +
                          (at(m, u, i, j + 1) - at(m, u, i, j - 1)) / (2 * m.dy);
}

Vector sample(const Mesh& m, const std::function<double(double, double)>& g) {
  Vector v(m.size());
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i) v[i + m.nx * j] = g(m.x(i), m.y(j));
  return v;
}

Grid grid_of(const Mesh& m, double a, double b, int species) {
  Grid g;
  g.nx = m.nx;
  g.ny = m.ny;
  g.x0 = g.y0 = a;
  g.x1 = g.y1 = b;
  g.dx = m.dx;
  g.dy = m.dy;
  g.species = species;
  return g;
}

// Affine boundary term of the Laplacian for Dirichlet data on the zero-edge mesh.
Vector dirichlet_lift(const Mesh& m, const std::function<double(double, double)>& g) {
  Vector b = Vector::Zero(m.size());
  const double cx = 1.0 / (m.dx * m.dx), cy = 1.0 / (m.dy * m.dy);
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i) {
      double& e = b[i + m.nx * j];
      if (i == 0) e += cx * g(m.x(-1), m.y(j));
      if (i == m.nx - 1) e += cx * g(m.x(m.nx), m.y(j));
      if (j == 0) e += cy * g(m.x(i), m.y(-1));
      if (j == m.ny - 1) e += cy * g(m.x(i), m.y(m.ny));
    }
  return b;
}

// Affine term for u_n = q on the mirror mesh: ghost = interior neighbour +- 2 d q
Vector neumann_lift(const Mesh& m, const std::function<double(double, double)>& qx,
                    const std::function<double(double, double)>& qy) {
  Vector b = Vector::Zero(m.size());
  for (int j = 0; j < m.ny; ++j)
    for (int i = 0; i < m.nx; ++i) {
      double& e = b[i + m.nx * j];
      const double x = m.x(i), y = m.y(j);
      if (i == 0) e -= 2.0 * qx(x, y) / m.dx;
      if (i == m.nx - 1) e += 2.0 * qx(x, y) / m.dx;
      if (j == 0) e -= 2.0 * qy(x, y) / m.dy;
      if (j == m.ny - 1) e += 2.0 * qy(x, y) / m.dy;
    }
  return b;
}

}  // namespace

Problem allen_cahn_2d(int n, bool nonhomog) {
  const Mesh m = make_mesh(n, -1.0, 1.0, Edge::mirror);
  const double alpha = 0.1;
  Problem p;
  p.name = nonhomog ? "allen_cahn_2d_nonhomog" : "allen_cahn_2d";
  p.dimension = m.size();
  p.grid = grid_of(m, -1.0, 1.0, 1);
  p.t0 = 0.0;
  p.t1 = 1.0;
  Vector lift = Vector::Zero(m.size());
  if (nonhomog) {
    p.bc = BoundaryCondition::neumann_nonhomog;
    auto g = [](double x, double y) { return 0.4 + 0.1 * (x + y) + 0.1 * std::sin(1.5 * kPi * x) * std::sin(2.5 * kPi * y); };
    auto gx = [](double x, double y) { return 0.1 + 0.15 * kPi * std::cos(1.5 * kPi * x) * std::sin(2.5 * kPi * y); };
    auto gy = [](double x, double y) { return 0.1 + 0.25 * kPi * std::sin(1.5 * kPi * x) * std::cos(2.5 * kPi * y); };
    p.initial = sample(m, g);
    lift = alpha * neumann_lift(m, gx, gy);
  } else {
    p.bc = BoundaryCondition::no_flow;
    p.initial = sample(m, [](double x, double y) { return 0.1 + 0.1 * std::cos(2 * kPi * x) * std::cos(2 * kPi * y); });
  }
  p.rhs = [m, alpha, lift](const Vector& u, Vector& f) {
    f.resize(u.size());
    laplacian(m, u.data(), f.data());
    f = alpha * f + lift + u - u.cwiseProduct(u).cwiseProduct(u);
  };
  p.jac_apply = [m, alpha](const Vector& u, const Vector& v, Vector& out) {
    out.resize(v.size());
    laplacian(m, v.data(), out.data());
    out = alpha * out + (1.0 - 3.0 * u.array().square()).matrix().cwiseProduct(v);
  };
  return p;
}

Problem adr_2d(int n) {
  const Mesh m = make_mesh(n, 0.0, 1.0, Edge::mirror);
  const double eps = 1.0 / 100.0, alpha = -10.0, gamma = 100.0;
  Problem p;
  p.name = "adr_2d";
  p.dimension = m.size();
  p.grid = grid_of(m, 0.0, 1.0, 1);
  p.bc = BoundaryCondition::neumann_homog;
  p.t0 = 0.0;
  p.t1 = 0.1;
  p.initial = sample(m, [](double x, double y) {
    const double s = x * y * (1 - x) * (1 - y);
    return 256.0 * s * s + 0.3;
  });
  p.rhs = [m, eps, alpha, gamma](const Vector& u, Vector& f) {
    Vector lap(u.size()), grad(u.size());
    laplacian(m, u.data(), lap.data());
    gradient_sum(m, u.data(), grad.data());
    f = eps * lap - alpha * grad + gamma * (u.array() * (u.array() - 0.5) * (1.0 - u.array())).matrix();
  };
  p.jac_apply = [m, eps, alpha, gamma](const Vector& u, const Vector& v, Vector& out) {
    Vector lap(v.size()), grad(v.size());
    laplacian(m, v.data(), lap.data());
    gradient_sum(m, v.data(), grad.data());
    // d/du u(u - 1/2)(1 - u) = -3u^2 + 3u - 1/2
    const auto r = gamma * (-3.0 * u.array().square() + 3.0 * u.array() - 0.5);
    out = eps * lap - alpha * grad + (r * v.array()).matrix();
  };
  return p;
}

Problem brusselator_2d(int n, bool nonhomog) {
  const Mesh m = nonhomog ? make_mesh(n, 0.0, 1.0, Edge::zero) : make_mesh(n, 0.0, 1.0, Edge::mirror);
  const double alpha = 0.02;
  const Eigen::Index M = m.size();
  Problem p;
  p.name = nonhomog ? "brusselator_2d_nonhomog" : "brusselator_2d";
  p.dimension = 2 * M;
  p.grid = grid_of(m, 0.0, 1.0, 2);
  p.t0 = 0.0;
  p.t1 = 1.0;
  p.initial.resize(2 * M);
  Vector lift_u = Vector::Zero(M), lift_v = Vector::Zero(M);
  if (nonhomog) {
    p.bc = BoundaryCondition::dirichlet_nonhomog;
    auto gu = [](double x, double y) { return 1.0 + std::sin(2 * kPi * x) * std::sin(2 * kPi * y); };
    auto gv = [](double, double) { return 3.0; };
    p.initial << sample(m, gu), sample(m, gv);
    lift_u = alpha * dirichlet_lift(m, gu);
    lift_v = alpha * dirichlet_lift(m, gv);
  } else {
    p.bc = BoundaryCondition::neumann_homog;
    p.initial << sample(m, [](double, double y) { return 2.0 + 0.25 * y; }),
        sample(m, [](double x, double) { return 1.0 + 0.8 * x; });
  }
  p.rhs = [m, M, alpha, lift_u, lift_v](const Vector& w, Vector& f) {
    f.resize(w.size());
    const auto u = w.head(M).array();
    const auto v = w.tail(M).array();
    laplacian(m, w.data(), f.data());
    laplacian(m, w.data() + M, f.data() + M);
    const auto uuv = u.square() * v;
    f.head(M) = (alpha * f.head(M) + lift_u).array() + 1.0 + uuv - 4.0 * u;
    f.tail(M) = (alpha * f.tail(M) + lift_v).array() + 3.0 * u - uuv;
  };
  p.jac_apply = [m, M, alpha](const Vector& w, const Vector& d, Vector& out) {
    out.resize(d.size());
    const auto u = w.head(M).array();
    const auto v = w.tail(M).array();
    const auto du = d.head(M).array();
    const auto dv = d.tail(M).array();
    laplacian(m, d.data(), out.data());
    laplacian(m, d.data() + M, out.data() + M);
    const auto cross = 2.0 * u * v * du + u.square() * dv;
    out.head(M) = (alpha * out.head(M)).array() + cross - 4.0 * du;
    out.tail(M) = (alpha * out.tail(M)).array() + 3.0 * du - cross;
  };
  return p;
}

Problem gray_scott_2d(int n, double t_end) {
  const Mesh m = make_mesh(n, 0.0, 1.0, Edge::periodic);
  const double du = 0.2, dv = 0.1, a = 0.04, b = 0.06;
  const Eigen::Index M = m.size();
  Problem p;
  p.name = "gray_scott_2d";
  p.dimension = 2 * M;
  p.grid = grid_of(m, 0.0, 1.0, 2);
  p.bc = BoundaryCondition::periodic;
  p.t0 = 0.0;
  p.t1 = t_end;
  p.initial.resize(2 * M);
  p.initial << sample(m, [](double x, double y) {
    return 1.0 - std::exp(-150.0 * ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)));
  }),
      sample(m, [](double x, double y) {
        return std::exp(-150.0 * ((x - 0.5) * (x - 0.5) + 2.0 * (y - 0.5) * (y - 0.5)));
      });
  p.rhs = [m, M, du, dv, a, b](const Vector& w, Vector& f) {
    f.resize(w.size());
    const auto u = w.head(M).array();
    const auto v = w.tail(M).array();
    laplacian(m, w.data(), f.data());
    laplacian(m, w.data() + M, f.data() + M);
    const auto uvv = u * v.square();
    f.head(M) = (du * f.head(M)).array() - uvv + a * (1.0 - u);
    f.tail(M) = (dv * f.tail(M)).array() + uvv - (a + b) * v;
  };
  p.jac_apply = [m, M, du, dv, a, b](const Vector& w, const Vector& d, Vector& out) {
    out.resize(d.size());
    const auto u = w.head(M).array();
    const auto v = w.tail(M).array();
    const auto x = d.head(M).array();
    const auto y = d.tail(M).array();
    laplacian(m, d.data(), out.data());
    laplacian(m, d.data() + M, out.data() + M);
    const auto cross = v.square() * x + 2.0 * u * v * y;
    out.head(M) = (du * out.head(M)).array() - cross - a * x;
    out.tail(M) = (dv * out.tail(M)).array() + cross - (a + b) * y;
  };
  return p;
}

Problem semilinear_parabolic_1d(int n, ParabolicForcing forcing) {
  if (n < 4) throw InvalidArgument("need at least 4 interior points");
  const double dx = 1.0 / (n + 1);
  Vector x(n), shape(n);
  for (int i = 0; i < n; ++i) {
    x[i] = (i + 1) * dx;
    shape[i] = x[i] * (1.0 - x[i]);
  }
  // integral of x(1 - x) over (0, 1)
  const double integral = forcing == ParabolicForcing::analytic ? 1.0 / 6.0 : dx * shape.sum();
  const Vector source = (shape.array() + 2.0 - integral).matrix();  // times e^t
  Problem p;
  p.name = forcing == ParabolicForcing::analytic ? "semilinear_parabolic_1d_analytic" : "semilinear_parabolic_1d";
  p.dimension = n + 1;
  p.clock_index = n;
  p.bc = BoundaryCondition::dirichlet_homog;
  p.grid.nx = n;
  p.grid.ny = 1;
  p.grid.dx = dx;
  p.t0 = 0.0;
  p.t1 = 1.0;
  p.initial.resize(n + 1);
  p.initial << shape, 0.0;
  auto lap = [n, dx](const double* u, double* out) {
    const double c = 1.0 / (dx * dx);
    for (int i = 0; i < n; ++i)
      out[i] = c * ((i > 0 ? u[i - 1] : 0.0) - 2.0 * u[i] + (i + 1 < n ? u[i + 1] : 0.0));
  };
  p.rhs = [n, dx, lap, source](const Vector& u, Vector& f) {
    f.resize(n + 1);
    lap(u.data(), f.data());
    const double I = dx * u.head(n).sum();
    f.head(n) = (f.head(n).array() + I).matrix() + std::exp(u[n]) * source;
    f[n] = 1.0;
  };
  p.jac_apply = [n, dx, lap, source](const Vector& u, const Vector& v, Vector& out) {
    out.resize(n + 1);
    lap(v.data(), out.data());
    const double I = dx * v.head(n).sum();
    out.head(n) = (out.head(n).array() + I).matrix() + (std::exp(u[n]) * v[n]) * source;
    out[n] = 0.0;
  };
  p.exact_solution = [](double xx, double t) { return xx * (1.0 - xx) * std::exp(t); };
  p.exact_state = [shape, n](double t) {
    Vector s(n + 1);
    s << shape * std::exp(t), t;
    return s;
  };
  return p;
}

Problem degenerate_diffusion_1d(int n) {
  if (n < 4) throw InvalidArgument("need at least 4 interior points");
  const double a = -23.0, b = 50.0, dx = (b - a) / (n + 1);
  const double left = 1.0, right = 0.0;
  Problem p;
  p.name = "degenerate_diffusion_1d";
  p.dimension = n;
  p.bc = BoundaryCondition::dirichlet_nonhomog;
  p.grid.nx = n;
  p.grid.ny = 1;
  p.grid.x0 = a;
  p.grid.x1 = b;
  p.grid.dx = dx;
  p.t0 = 0.0;
  p.t1 = 50.0;
  p.initial.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = a + (i + 1) * dx;
    p.initial[i] = x < 0.0 ? 1.0 : std::exp(-1.3 * x);
  }
  // (u u_x)_x with face diffusivity (u_i + u_{i+1})/2 is the second difference of u^2 / 2
  p.rhs = [n, dx, left, right](const Vector& u, Vector& f) {
    f.resize(n);
    const double c = 1.0 / (2.0 * dx * dx);
    for (int i = 0; i < n; ++i) {
      const double um = i > 0 ? u[i - 1] : left;
      const double up = i + 1 < n ? u[i + 1] : right;
      f[i] = c * (up * up - 2.0 * u[i] * u[i] + um * um) + u[i] * (1.0 - u[i]);
    }
  };
  p.jac_apply = [n, dx](const Vector& u, const Vector& v, Vector& out) {
    out.resize(n);
    const double c = 1.0 / (dx * dx);
    for (int i = 0; i < n; ++i) {
      const double wm = i > 0 ? u[i - 1] * v[i - 1] : 0.0;
      const double wp = i + 1 < n ? u[i + 1] * v[i + 1] : 0.0;
      out[i] = c * (wp - 2.0 * u[i] * v[i] + wm) + (1.0 - 2.0 * u[i]) * v[i];
    }
  };
  return p;
}

Problem heat_1d(int n) {
  if (n < 4) throw InvalidArgument("need at least 4 interior points");
  const double dx = 1.0 / (n + 1);
  Problem p;
  p.name = "heat_1d";
  p.dimension = n;
  p.bc = BoundaryCondition::dirichlet_homog;
  p.grid.nx = n;
  p.grid.dx = dx;
  p.initial.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1) * dx;
    p.initial[i] = std::sin(kPi * x) + 0.5 * std::sin(3 * kPi * x) + x * (1 - x);
  }
  auto lap = [n, dx](const Vector& u, Vector& out) {
    out.resize(n);
    const double c = 1.0 / (dx * dx);
    for (int i = 0; i < n; ++i) out[i] = c * ((i > 0 ? u[i - 1] : 0.0) - 2.0 * u[i] + (i + 1 < n ? u[i + 1] : 0.0));
  };
  p.rhs = lap;
  p.jac_apply = [lap](const Vector&, const Vector& v, Vector& out) { lap(v, out); };
  return p;
}

Problem zero_problem(int n) {
  Problem p;
  p.name = "zero";
  p.dimension = n;
  p.initial = Vector::LinSpaced(n, 0.5, 1.5);
  p.rhs = [n](const Vector&, Vector& f) { f = Vector::Zero(n); };
  p.jac_apply = [n](const Vector&, const Vector&, Vector& out) { out = Vector::Zero(n); };
  p.exact_state = [init = p.initial](double) { return init; };
  return p;
}

std::vector<std::string> problem_names() {
  return {"allen_cahn_2d",   "allen_cahn_2d_nonhomog",   "adr_2d",          "brusselator_2d",
          "brusselator_2d_nonhomog", "gray_scott_2d", "semilinear_parabolic_1d",
          "semilinear_parabolic_1d_analytic", "degenerate_diffusion_1d", "heat_1d", "zero"};
}

Problem make_problem(const std::string& name, int n) {
  if (name == "allen_cahn_2d") return allen_cahn_2d(n, false);
  if (name == "allen_cahn_2d_nonhomog") return allen_cahn_2d(n, true);
  if (name == "adr_2d") return adr_2d(n);
  if (name == "brusselator_2d") return brusselator_2d(n, false);
  if (name == "brusselator_2d_nonhomog") return brusselator_2d(n, true);
  if (name == "gray_scott_2d") return gray_scott_2d(n);
  if (name == "semilinear_parabolic_1d") return semilinear_parabolic_1d(n);
  if (name == "semilinear_parabolic_1d_analytic") return semilinear_parabolic_1d(n, ParabolicForcing::analytic);
  if (name == "degenerate_diffusion_1d") return degenerate_diffusion_1d(n);
  if (name == "heat_1d") return heat_1d(n);
  if (name == "zero") return zero_problem(n);
  throw InvalidArgument("unknown problem " + name);
}

Matrix dense_jacobian(const Problem& p, const Vector& u) {
  Matrix J(p.dimension, p.dimension);
  Vector e = Vector::Zero(p.dimension), col(p.dimension);
  for (Eigen::Index q = 0; q < p.dimension; ++q) {
    e[q] = 1.0;
    p.jac_apply(u, e, col);
    J.col(q) = col;
    e[q] = 0.0;
  }
  return J;
}

}  // namespace epirk
