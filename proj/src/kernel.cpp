#include "npspec/kernel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace npspec {

using std::numbers::pi;

namespace {

[[noreturn]] void throw_singular() {
  throw SingularPointError(
      "kernel evaluated at coincident points; use diagonal_limit or a "
      "diagonal rule");
}

}  // namespace

double np_kernel_star(const std::array<double, 2>& x,
                      const std::array<double, 2>& nx,
                      const std::array<double, 2>& y) {
  const double dx = x[0] - y[0];
  const double dy = x[1] - y[1];
  const double r2 = dx * dx + dy * dy;
  if (r2 == 0.0) throw_singular();
  return (dx * nx[0] + dy * nx[1]) / ((2.0 * pi) * r2);
}

double np_kernel_star(const std::array<double, 3>& x,
                      const std::array<double, 3>& nx,
                      const std::array<double, 3>& y) {
  const double dx = x[0] - y[0];
  const double dy = x[1] - y[1];
  const double dz = x[2] - y[2];
  const double r2 = dx * dx + dy * dy + dz * dz;
  if (r2 == 0.0) throw_singular();
  const double r3 = r2 * std::sqrt(r2);
  return (dx * nx[0] + dy * nx[1] + dz * nx[2]) / ((4.0 * pi) * r3);
}

double np_kernel(const std::array<double, 2>& x,
                 const std::array<double, 2>& y,
                 const std::array<double, 2>& ny) {
  return np_kernel_star(y, ny, x);
}

double np_kernel(const std::array<double, 3>& x,
                 const std::array<double, 3>& y,
                 const std::array<double, 3>& ny) {
  return np_kernel_star(y, ny, x);
}

double diagonal_limit(const Geometry& geom, double t) {
  const Curve& curve = geom.curve();  // throws invalid_argument for surfaces
  if (curve.derivative_order() < 2) {
    throw UnsupportedOrderError(
        "diagonal limit needs two derivatives of the curve");
  }
  const CurveJet jet = curve.evaluate(t, 2);
  const double num = jet.derivatives[2][0] * jet.unit_normal[0] +
                     jet.derivatives[2][1] * jet.unit_normal[1];
  return -num / ((4.0 * pi) * jet.speed * jet.speed);
}

double tangential_derivative_L1(const Geometry& geom, double t, double s,
                                int l) {
  const Curve& curve = geom.curve();
  if (l < 0) throw std::invalid_argument("derivative count l must be >= 0");
  if (l > curve.derivative_order() - 2) {
    throw UnsupportedOrderError(
        "tangential derivative order l exceeds derivative_order - 2");
  }
  const CurveJet jt = curve.evaluate(t, 1);
  const CurveJet js = curve.evaluate(s, l);

  // d^{(0)} = gamma(t) - gamma(s), d^{(i)} = -gamma^{(i)}(s).
  std::vector<std::array<double, 2>> d(l + 1);
  d[0] = {jt.point()[0] - js.point()[0], jt.point()[1] - js.point()[1]};
  for (int i = 1; i <= l; ++i) {
    d[i] = {-js.derivatives[i][0], -js.derivatives[i][1]};
  }

  // Pascal's triangle for the Leibniz sums.
  std::vector<std::vector<double>> binom(l + 1);
  for (int r = 0; r <= l; ++r) {
    binom[r].assign(r + 1, 1.0);
    for (int i = 1; i < r; ++i) {
      binom[r][i] = binom[r - 1][i - 1] + binom[r - 1][i];
    }
  }

  // u^{(r)} = d^{(r)} . nu_t;  v^{(r)} = sum_i C(r,i) d^{(i)} . d^{(r-i)}.
  std::vector<double> u(l + 1), v(l + 1);
  for (int r = 0; r <= l; ++r) {
    u[r] = d[r][0] * jt.unit_normal[0] + d[r][1] * jt.unit_normal[1];
    double acc = 0.0;
    for (int i = 0; i <= r; ++i) {
      acc += binom[r][i] *
             (d[i][0] * d[r - i][0] + d[i][1] * d[r - i][1]);
    }
    v[r] = acc;
  }
  if (v[0] == 0.0) throw_singular();

  // q = u / v differentiated l times: q^{(r)} solves the Leibniz identity
  // u^{(r)} = sum_i C(r,i) q^{(i)} v^{(r-i)}.
  std::vector<double> q(l + 1);
  for (int r = 0; r <= l; ++r) {
    double acc = u[r];
    for (int i = 0; i < r; ++i) {
      acc -= binom[r][i] * q[i] * v[r - i];
    }
    q[r] = acc / v[0];
  }
  return q[l] / (2.0 * pi);
}

}  // namespace npspec
