#pragma once

// Double-double ("dd") arithmetic: an unevaluated sum hi + lo of two doubles
// carrying roughly 31 significant decimal digits. Used where plain double
// roundoff would swamp the quantities of interest: products of operator
// matrices whose singular values decay far below machine epsilon relative to
// the top of the spectrum.
//
// The error-free transforms below (two_sum, split, two_prod) are the classic
// Dekker/Knuth constructions. two_prod deliberately uses the Dekker split
// rather than std::fma so results are identical on hardware without a fused
// multiply-add and independent of compiler FMA contraction.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace npspec::detail {

struct dd {
  double hi = 0.0;
  double lo = 0.0;
};

inline dd two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

// Requires |a| >= |b| (or a == 0); one branch cheaper than two_sum.
inline dd quick_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

inline void split(double a, double& hi, double& lo) {
  constexpr double kSplitter = 134217729.0;  // 2^27 + 1
  const double t = kSplitter * a;
  hi = t - (t - a);
  lo = a - hi;
}

inline dd two_prod(double a, double b) {
  const double p = a * b;
  double ah, al, bh, bl;
  split(a, ah, al);
  split(b, bh, bl);
  const double err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
  return {p, err};
}

inline dd dd_add(dd a, dd b) {
  const dd s = two_sum(a.hi, b.hi);
  const double lo = s.lo + (a.lo + b.lo);
  return quick_two_sum(s.hi, lo);
}

inline dd dd_add(dd a, double b) {
  const dd s = two_sum(a.hi, b);
  return quick_two_sum(s.hi, s.lo + a.lo);
}

inline dd dd_neg(dd a) { return {-a.hi, -a.lo}; }

inline dd dd_sub(dd a, dd b) { return dd_add(a, dd_neg(b)); }

inline dd dd_mul(dd a, dd b) {
  const dd p = two_prod(a.hi, b.hi);
  const double lo = p.lo + (a.hi * b.lo + a.lo * b.hi);
  return quick_two_sum(p.hi, lo);
}

inline dd dd_mul(dd a, double b) {
  const dd p = two_prod(a.hi, b);
  return quick_two_sum(p.hi, p.lo + a.lo * b);
}

inline dd dd_div(dd a, dd b) {
  const double q1 = a.hi / b.hi;
  dd r = dd_sub(a, dd_mul(b, q1));
  const double q2 = r.hi / b.hi;
  r = dd_sub(r, dd_mul(b, q2));
  const double q3 = r.hi / b.hi;
  const dd q = quick_two_sum(q1, q2);
  return dd_add(q, q3);
}

inline dd dd_sqrt(dd a) {
  if (!(a.hi > 0.0)) return {std::sqrt(a.hi), 0.0};
  const double r = std::sqrt(a.hi);
  // One Newton step from the correctly rounded double seed reaches dd
  // accuracy: r' = r + (a - r^2) / (2 r).
  const dd rr = two_prod(r, r);
  const dd e = dd_sub(a, rr);
  return quick_two_sum(r, e.hi / (2.0 * r));
}

inline bool dd_less(dd a, dd b) {
  return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
}

inline double dd_abs_hi(dd a) { return std::abs(a.hi); }

// A dense matrix in dd precision, stored as the pair of coefficient
// matrices. lo is all zeros when promoting a plain double matrix.
struct DDMatrix {
  Eigen::MatrixXd hi;
  Eigen::MatrixXd lo;

  Eigen::Index rows() const { return hi.rows(); }
  Eigen::Index cols() const { return hi.cols(); }

  static DDMatrix promote(const Eigen::MatrixXd& m) {
    return {m, Eigen::MatrixXd::Zero(m.rows(), m.cols())};
  }

  dd at(Eigen::Index i, Eigen::Index j) const { return {hi(i, j), lo(i, j)}; }

  void set(Eigen::Index i, Eigen::Index j, dd v) {
    hi(i, j) = v.hi;
    lo(i, j) = v.lo;
  }
};

// C = A * B with every product and accumulation in dd. Transposed copies of
// A keep the inner loop contiguous for Eigen's column-major storage.
inline DDMatrix dd_matmul(const DDMatrix& a, const DDMatrix& b) {
  const Eigen::Index m = a.rows(), k = a.cols(), n = b.cols();
  const Eigen::MatrixXd ath = a.hi.transpose();
  const Eigen::MatrixXd atl = a.lo.transpose();
  DDMatrix c{Eigen::MatrixXd(m, n), Eigen::MatrixXd(m, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* bh = &b.hi(0, j);
    const double* bl = &b.lo(0, j);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double* ah = &ath(0, i);
      const double* al = &atl(0, i);
      dd acc{0.0, 0.0};
      for (Eigen::Index p = 0; p < k; ++p) {
        acc = dd_add(acc, dd_mul(dd{ah[p], al[p]}, dd{bh[p], bl[p]}));
      }
      c.hi(i, j) = acc.hi;
      c.lo(i, j) = acc.lo;
    }
  }
  return c;
}

// C = A^T * B in dd (columns of A against columns of B; both contiguous).
inline DDMatrix dd_matmul_at_b(const DDMatrix& a, const DDMatrix& b) {
  const Eigen::Index m = a.cols(), k = a.rows(), n = b.cols();
  DDMatrix c{Eigen::MatrixXd(m, n), Eigen::MatrixXd(m, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* bh = &b.hi(0, j);
    const double* bl = &b.lo(0, j);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double* ah = &a.hi(0, i);
      const double* al = &a.lo(0, i);
      dd acc{0.0, 0.0};
      for (Eigen::Index p = 0; p < k; ++p) {
        acc = dd_add(acc, dd_mul(dd{ah[p], al[p]}, dd{bh[p], bl[p]}));
      }
      c.hi(i, j) = acc.hi;
      c.lo(i, j) = acc.lo;
    }
  }
  return c;
}

}  // namespace npspec::detail
