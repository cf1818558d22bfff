#pragma once

#include <array>

#include "npspec/errors.hpp"
#include "npspec/geometry.hpp"

namespace npspec {

// Which boundary integral kernel a matrix discretizes.
enum class KernelKind { NpStar, Np, Composed };

struct KernelIdentity {
  KernelKind which = KernelKind::NpStar;
  int n = 1;  // composition order; meaningful for Composed
  int d = 1;  // boundary dimension (ambient dimension is d+1)

  void validate() const {
    if (d != 1 && d != 2) {
      throw std::invalid_argument("kernel identity requires d in {1, 2}");
    }
    if (which == KernelKind::Composed && n < 1) {
      throw std::invalid_argument("composed kernel requires n >= 1");
    }
  }

  // Composed(1) is the same operator as NpStar.
  KernelIdentity canonical() const {
    KernelIdentity c = *this;
    if (c.which == KernelKind::Composed && c.n == 1) {
      c.which = KernelKind::NpStar;
    }
    if (c.which != KernelKind::Composed) c.n = 1;
    return c;
  }
};

// Kernel of the adjoint NP operator K*:
//   (1/omega_{d+1}) * ((x - y) . nx) / |x - y|^{d+1},
// with omega_2 = 2 pi (d = 1) and omega_3 = 4 pi (d = 2).
// Throws SingularPointError at x = y.
double np_kernel_star(const std::array<double, 2>& x,
                      const std::array<double, 2>& nx,
                      const std::array<double, 2>& y);
double np_kernel_star(const std::array<double, 3>& x,
                      const std::array<double, 3>& nx,
                      const std::array<double, 3>& y);

// Kernel of the NP operator K:
//   -(1/omega_{d+1}) * ((x - y) . ny) / |x - y|^{d+1},
// identical to np_kernel_star(y, ny, x) after the argument swap (and
// implemented that way, so the duality holds bitwise).
double np_kernel(const std::array<double, 2>& x,
                 const std::array<double, 2>& y,
                 const std::array<double, 2>& ny);
double np_kernel(const std::array<double, 3>& x,
                 const std::array<double, 3>& y,
                 const std::array<double, 3>& ny);

// Continuous extension of the 2D kernel onto the diagonal:
//   -(gamma''(t) . nu(t)) / (4 pi |gamma'(t)|^2)  =  kappa(t) / (4 pi).
// Requires a curve geometry with at least two derivatives.
double diagonal_limit(const Geometry& geom, double t);

// l-th parameter-space derivative d^l/ds^l of s -> L_1(gamma(t), gamma(s)),
// where L_1 is the K* kernel. Requires a curve, t != s (mod 1), and
// 0 <= l <= derivative_order - 2.
double tangential_derivative_L1(const Geometry& geom, double t, double s,
                                int l);

}  // namespace npspec
