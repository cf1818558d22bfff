#include "npspec/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <lapacke.h>

#include "detail/dd.hpp"
#include "npspec/errors.hpp"

namespace npspec {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Moduli at or below this multiple of the list's top value are solver noise:
// the backward error of dense eig/SVD is a small multiple of eps * ||A||, and
// 1024 eps gives that estimate two orders of magnitude of headroom while
// staying far below any value the quadrature can actually resolve.
constexpr double kNoiseRel = 1024.0 * kEps;

bool eig_less(const std::complex<double>& a, const std::complex<double>& b) {
  const double ma = std::abs(a), mb = std::abs(b);
  if (ma != mb) return ma > mb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() < b.imag();
}

int default_resolved(const std::vector<std::complex<double>>& eig,
                     const std::vector<double>& sing) {
  if (!eig.empty()) {
    const double cutoff = kNoiseRel * std::abs(eig.front());
    int n = 0;
    for (const auto& v : eig) {
      if (!(std::abs(v) > cutoff)) break;
      ++n;
    }
    return n;
  }
  if (!sing.empty()) {
    const double cutoff = kNoiseRel * sing.front();
    int n = 0;
    for (double v : sing) {
      if (!(v > cutoff)) break;
      ++n;
    }
    return n;
  }
  return 0;
}

double realness_over(const std::vector<std::complex<double>>& eig, int count) {
  if (eig.empty() || count <= 0) return 0.0;
  const double floor = std::sqrt(kEps) * std::abs(eig.front());
  double worst = 0.0;
  const int n = std::min<int>(count, static_cast<int>(eig.size()));
  for (int j = 0; j < n; ++j) {
    worst = std::max(worst,
                     std::abs(eig[j].imag()) / (std::abs(eig[j]) + floor));
  }
  return worst;
}

// D^{1/2} A D^{-1/2} in plain double.
Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a,
                            const std::vector<double>& m) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> root(n);
  for (int i = 0; i < n; ++i) root[i] = std::sqrt(m[i]);
  Eigen::MatrixXd b(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      b(i, j) = a(i, j) * root[i] / root[j];
    }
  }
  return b;
}

std::vector<double> dgesdd_values(Eigen::MatrixXd b, const std::string& source,
                                  Eigen::MatrixXd* u, Eigen::MatrixXd* vt) {
  const lapack_int n = static_cast<lapack_int>(b.rows());
  std::vector<double> s(static_cast<std::size_t>(n));
  lapack_int info;
  if (u != nullptr) {
    u->resize(n, n);
    vt->resize(n, n);
    info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', n, n, b.data(), n, s.data(),
                          u->data(), n, vt->data(), n);
  } else {
    info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', n, n, b.data(), n, s.data(),
                          nullptr, 1, nullptr, 1);
  }
  if (info != 0) {
    throw NumericFailureError("singular value decomposition failed (info=" +
                              std::to_string(info) + ") for " + source);
  }
  return s;
}

// ---- double-double singular value refinement --------------------------

using detail::dd;
using detail::DDMatrix;

dd dd_dot_col(const DDMatrix& x, Eigen::Index cx, const DDMatrix& y,
              Eigen::Index cy) {
  dd acc{0.0, 0.0};
  const Eigen::Index n = x.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    acc = detail::dd_add(acc, detail::dd_mul(x.at(i, cx), y.at(i, cy)));
  }
  return acc;
}

void axpy_col(DDMatrix& x, Eigen::Index cx, dd alpha, const DDMatrix& y,
              Eigen::Index cy) {
  const Eigen::Index n = x.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    x.set(i, cx, detail::dd_add(x.at(i, cx),
                                detail::dd_mul(alpha, y.at(i, cy))));
  }
}

void scale_col(DDMatrix& x, Eigen::Index c, dd alpha) {
  const Eigen::Index n = x.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    x.set(i, c, detail::dd_mul(x.at(i, c), alpha));
  }
}

// In-place modified Gram-Schmidt with one re-orthogonalization pass.
// Columns that vanish (the matrix may have numerical rank below r) are
// replaced by deterministic coordinate vectors and re-orthogonalized, so the
// result is always a full orthonormal frame.
void mgs_dd(DDMatrix& q) {
  const Eigen::Index n = q.rows(), r = q.cols();
  for (Eigen::Index k = 0; k < r; ++k) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const dd proj = dd_dot_col(q, k, q, j);
        axpy_col(q, k, dd{-proj.hi, -proj.lo}, q, j);
      }
    }
    dd nrm2 = dd_dot_col(q, k, q, k);
    if (!(nrm2.hi > 1e-280)) {
      // Deterministic rescue: walk the coordinate directions until one has a
      // component outside the span of the previous columns.
      for (Eigen::Index seed = 0; seed < n; ++seed) {
        for (Eigen::Index i = 0; i < n; ++i) {
          q.set(i, k, dd{i == (k + seed) % n ? 1.0 : 0.0, 0.0});
        }
        for (int pass = 0; pass < 2; ++pass) {
          for (Eigen::Index j = 0; j < k; ++j) {
            const dd proj = dd_dot_col(q, k, q, j);
            axpy_col(q, k, dd{-proj.hi, -proj.lo}, q, j);
          }
        }
        nrm2 = dd_dot_col(q, k, q, k);
        if (nrm2.hi > 0.5 / static_cast<double>(n)) break;
      }
    }
    const dd inv = detail::dd_div(dd{1.0, 0.0}, detail::dd_sqrt(nrm2));
    scale_col(q, k, inv);
  }
}

// One-sided Jacobi on a small dense dd matrix: orthogonalizes the columns by
// plane rotations; afterwards the column norms are the singular values.
std::vector<double> jacobi_singulars_dd(DDMatrix c) {
  using namespace detail;
  const Eigen::Index r = c.cols();
  const double tol = 1e-31;
  for (int sweep = 0; sweep < 30; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p < r; ++p) {
      for (Eigen::Index q = p + 1; q < r; ++q) {
        const dd app = dd_dot_col(c, p, c, p);
        const dd aqq = dd_dot_col(c, q, c, q);
        const dd apq = dd_dot_col(c, p, c, q);
        const double scale = std::sqrt(app.hi * aqq.hi);
        if (!(std::abs(apq.hi) > tol * scale)) continue;
        rotated = true;
        // tan(2 theta) = 2 apq / (aqq - app); stable half-angle formulas.
        const dd diff = dd_sub(aqq, app);
        const dd tau = dd_div(diff, dd_mul(apq, 2.0));
        const dd root =
            dd_sqrt(dd_add(dd_mul(tau, tau), dd{1.0, 0.0}));
        dd t = (tau.hi >= 0.0) ? dd_div(dd{1.0, 0.0}, dd_add(tau, root))
                               : dd_div(dd{1.0, 0.0}, dd_sub(tau, root));
        const dd cs =
            dd_div(dd{1.0, 0.0},
                   dd_sqrt(dd_add(dd_mul(t, t), dd{1.0, 0.0})));
        const dd sn = dd_mul(cs, t);
        const Eigen::Index n = c.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
          const dd vip = c.at(i, p), viq = c.at(i, q);
          c.set(i, p, dd_sub(dd_mul(vip, cs), dd_mul(viq, sn)));
          c.set(i, q, dd_add(dd_mul(vip, sn), dd_mul(viq, cs)));
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> s(static_cast<std::size_t>(r));
  for (Eigen::Index j = 0; j < r; ++j) {
    const dd n2 = dd_dot_col(c, j, c, j);
    s[static_cast<std::size_t>(j)] = dd_sqrt(n2).hi;
  }
  std::sort(s.begin(), s.end(), std::greater<double>());
  return s;
}

// Refines the leading block of singular values of B = D^{1/2} A D^{-1/2} in
// double-double. Orthogonal iteration (alternating B / B^T applications with
// Gram-Schmidt) converges the leading right/left subspaces; the small Ritz
// cross-block U^T B V then carries the leading singular values at dd
// precision, extracted by one-sided Jacobi.
std::vector<double> refine_leading_dd(const OperatorMatrix& a, int r,
                                      const Eigen::MatrixXd& vt_warm) {
  using namespace detail;
  const int n = a.n();
  r = std::min(r, n);

  // B in double-double, using the shadowed entries.
  std::vector<dd> root(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    root[static_cast<std::size_t>(i)] =
        dd_sqrt(dd{a.grid.measures[static_cast<std::size_t>(i)], 0.0});
  }
  DDMatrix b{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const dd entry{a.entries(i, j), a.entries_lo(i, j)};
      b.set(i, j,
            dd_div(dd_mul(entry, root[static_cast<std::size_t>(i)]),
                   root[static_cast<std::size_t>(j)]));
    }
  }

  // Warm start from the double SVD's leading right singular vectors.
  DDMatrix v{Eigen::MatrixXd(n, r), Eigen::MatrixXd::Zero(n, r)};
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < n; ++i) v.hi(i, j) = vt_warm(j, i);
  }
  mgs_dd(v);

  DDMatrix u{Eigen::MatrixXd::Zero(n, r), Eigen::MatrixXd::Zero(n, r)};
  for (int it = 0; it < 30; ++it) {
    u = dd_matmul(b, v);
    mgs_dd(u);
    v = dd_matmul_at_b(b, u);
    mgs_dd(v);
  }
  const DDMatrix bv = dd_matmul(b, v);
  const DDMatrix ritz = dd_matmul_at_b(u, bv);  // r x r, nearly diagonal
  return jacobi_singulars_dd(ritz);
}

std::vector<std::complex<double>> dgeev_values(Eigen::MatrixXd a,
                                               const std::string& source) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  std::vector<double> wr(static_cast<std::size_t>(n)),
      wi(static_cast<std::size_t>(n));
  const lapack_int info =
      LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, wr.data(),
                    wi.data(), nullptr, 1, nullptr, 1);
  if (info != 0) {
    throw NumericFailureError("eigensolver failed to converge (info=" +
                              std::to_string(info) + ") for " + source);
  }
  std::vector<std::complex<double>> eig(static_cast<std::size_t>(n));
  for (lapack_int j = 0; j < n; ++j) {
    eig[static_cast<std::size_t>(j)] = {wr[static_cast<std::size_t>(j)],
                                        wi[static_cast<std::size_t>(j)]};
  }
  std::sort(eig.begin(), eig.end(), eig_less);
  return eig;
}

std::vector<double> singular_values_of(const OperatorMatrix& a) {
  for (double m : a.grid.measures) {
    if (!(m > 0.0)) {
      throw std::invalid_argument(
          "singular_spectrum: quadrature measures must be positive");
    }
  }
  const Eigen::MatrixXd b = symmetrized(a.entries, a.grid.measures);
  if (!a.has_shadow()) {
    return dgesdd_values(b, a.metadata, nullptr, nullptr);
  }
  Eigen::MatrixXd u, vt;
  std::vector<double> s = dgesdd_values(b, a.metadata, &u, &vt);
  const int r = std::min<int>(std::min(24, a.n()) + 4, a.n());
  const std::vector<double> lead = refine_leading_dd(a, r, vt);
  // Replace the leading block. When the true values decay past the double
  // solver's noise floor, the double tail can exceed the refined block; those
  // tail estimates are provably too large (singular values decrease), so they
  // are clamped to the last refined value to keep the list non-increasing.
  for (int j = 0; j < static_cast<int>(lead.size()); ++j) {
    s[static_cast<std::size_t>(j)] = lead[static_cast<std::size_t>(j)];
  }
  for (std::size_t j = lead.size(); j < s.size(); ++j) {
    s[j] = std::min(s[j], lead.back());
  }
  return s;
}

void append_double(std::string& line, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, res.ptr);
}

}  // namespace

Spectrum eigen_spectrum(const OperatorMatrix& a) {
  Spectrum out;
  out.source = a.metadata;
  out.eigenvalues = dgeev_values(a.entries, a.metadata);
  out.j_resolved = default_resolved(out.eigenvalues, out.singular_values);
  out.realness_defect = realness_over(out.eigenvalues, out.j_resolved);
  return out;
}

Spectrum singular_spectrum(const OperatorMatrix& a) {
  Spectrum out;
  out.source = a.metadata;
  out.singular_values = singular_values_of(a);
  out.j_resolved = default_resolved(out.eigenvalues, out.singular_values);
  return out;
}

Spectrum full_spectrum(const OperatorMatrix& a) {
  Spectrum out;
  out.source = a.metadata;
  out.eigenvalues = dgeev_values(a.entries, a.metadata);
  out.singular_values = singular_values_of(a);
  out.j_resolved = default_resolved(out.eigenvalues, out.singular_values);
  out.realness_defect = realness_over(out.eigenvalues, out.j_resolved);
  return out;
}

double schatten_partial_sum(const Spectrum& spec, double p, int j_count) {
  if (!(p > 0.0)) {
    throw std::invalid_argument("schatten_partial_sum: p must be positive");
  }
  if (j_count < 0 || j_count > static_cast<int>(spec.singular_values.size())) {
    throw std::invalid_argument(
        "schatten_partial_sum: j_count outside the singular value list");
  }
  if (spec.singular_values.empty()) return 0.0;
  const double cutoff = kNoiseRel * spec.singular_values.front();
  double sum = 0.0;
  for (int j = 0; j < j_count; ++j) {
    const double s = spec.singular_values[static_cast<std::size_t>(j)];
    if (s > cutoff) sum += std::pow(s, p);
  }
  return sum;
}

WeylCheck weyl_check(const Spectrum& spec, double p, int j_count) {
  if (!(p > 0.0)) {
    throw std::invalid_argument("weyl_check: p must be positive");
  }
  if (j_count < 0 ||
      j_count > static_cast<int>(spec.eigenvalues.size()) ||
      j_count > static_cast<int>(spec.singular_values.size())) {
    throw std::invalid_argument(
        "weyl_check: j_count exceeds a spectrum list");
  }
  WeylCheck out;
  if (j_count == 0 || spec.eigenvalues.empty()) {
    out.holds = true;
    return out;
  }
  const double ce = kNoiseRel * std::abs(spec.eigenvalues.front());
  const double cs = kNoiseRel * spec.singular_values.front();
  for (int j = 0; j < j_count; ++j) {
    const double mod = std::abs(spec.eigenvalues[static_cast<std::size_t>(j)]);
    const double s = spec.singular_values[static_cast<std::size_t>(j)];
    // Stop at the first sub-noise index in either list: beyond it both sides
    // are solver noise and p-th powers of noise would swamp the comparison.
    if (!(mod > ce) || !(s > cs)) break;
    out.lhs += std::pow(mod, p);
    out.rhs += std::pow(s, p);
  }
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-12);
  return out;
}

int resolved_count(const Spectrum& coarse, const Spectrum& fine) {
  const bool use_eig =
      !coarse.eigenvalues.empty() && !fine.eigenvalues.empty();
  const std::size_t n = use_eig
      ? std::min(coarse.eigenvalues.size(), fine.eigenvalues.size())
      : std::min(coarse.singular_values.size(), fine.singular_values.size());
  int count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double mc = use_eig ? std::abs(coarse.eigenvalues[j])
                              : coarse.singular_values[j];
    const double mf = use_eig ? std::abs(fine.eigenvalues[j])
                              : fine.singular_values[j];
    if (!(std::abs(mc - mf) < 0.01 * mf)) break;
    ++count;
  }
  return count;
}

void set_resolved(Spectrum& coarse, const Spectrum& fine) {
  coarse.j_resolved = resolved_count(coarse, fine);
  coarse.realness_defect =
      realness_over(coarse.eigenvalues, coarse.j_resolved);
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spec) {
  out << "j,re_lambda,im_lambda,abs_lambda,s_j\n";
  const std::size_t rows =
      std::max(spec.eigenvalues.size(), spec.singular_values.size());
  std::string line;
  for (std::size_t j = 0; j < rows; ++j) {
    line.clear();
    line += std::to_string(j + 1);
    line += ',';
    if (j < spec.eigenvalues.size()) {
      append_double(line, spec.eigenvalues[j].real());
      line += ',';
      append_double(line, spec.eigenvalues[j].imag());
      line += ',';
      append_double(line, std::abs(spec.eigenvalues[j]));
    } else {
      line += ",,";
    }
    line += ',';
    if (j < spec.singular_values.size()) {
      append_double(line, spec.singular_values[j]);
    }
    line += '\n';
    out << line;
  }
}

}  // namespace npspec
