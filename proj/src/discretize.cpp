#include "npspec/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "detail/dd.hpp"
#include "npspec/errors.hpp"

namespace npspec {

namespace {

using std::numbers::pi;

struct GaussLegendre01 {
  std::vector<double> x;  // nodes in (0,1), ascending
  std::vector<double> w;  // weights, sum = 1
};

// Nodes/weights of the n-point Gauss-Legendre rule mapped to [0,1], via
// Newton iteration on the Legendre recurrence.
GaussLegendre01 gauss_legendre_01(int n) {
  GaussLegendre01 rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pn = 0.0, dpn = 1.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;  // P_k(x), P_{k-1}(x)
      for (int k = 0; k < n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * x * p1 - k * p2) / (k + 1.0);
      }
      pn = p0;
      dpn = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = pn / dpn;
      x -= dx;
      if (std::abs(dx) <= 4.0 * std::numeric_limits<double>::epsilon()) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NumericFailureError("Gauss-Legendre node iteration stalled");
    }
    rule.x[i] = 0.5 * (1.0 + x);
    rule.w[i] = 1.0 / ((1.0 - x * x) * dpn * dpn);
  }
  // The cosine initial guesses enumerate nodes in descending order; flip to
  // ascending u for a deterministic ring layout.
  std::reverse(rule.x.begin(), rule.x.end());
  std::reverse(rule.w.begin(), rule.w.end());
  return rule;
}

void check_grid_arrays(const QuadratureGrid& g) {
  const std::size_t n = g.size();
  if (n == 0) throw std::invalid_argument("assemble: empty quadrature grid");
  if (g.nodes.size() != n || g.measures.size() != n || g.points.size() != n ||
      g.normals.size() != n ||
      (g.d == 2 && g.nodes_phi.size() != n)) {
    throw std::invalid_argument("assemble: inconsistent grid arrays");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(g.weights[i] > 0.0) || !(g.measures[i] > 0.0)) {
      throw std::invalid_argument(
          "assemble: quadrature weights and measures must be positive");
    }
  }
  // Duplicate nodes would put evaluation points on top of each other and the
  // kernel on its singularity.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (g.nodes[a] != g.nodes[b]) return g.nodes[a] < g.nodes[b];
    if (g.d == 2) return g.nodes_phi[a] < g.nodes_phi[b];
    return false;
  });
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t a = order[i - 1], b = order[i];
    const bool same = g.nodes[a] == g.nodes[b] &&
                      (g.d == 1 || g.nodes_phi[a] == g.nodes_phi[b]);
    if (same) {
      throw std::invalid_argument("assemble: duplicate quadrature nodes");
    }
  }
}

// Order-preserving bijection between doubles and unsigned integers: a ulp
// step in either direction is +-1 on the key, so bisection over keys visits
// every representable candidate.
std::uint64_t ordered_key(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, 8);
  return (b >> 63) ? ~b : (b | 0x8000000000000000ull);
}

double from_ordered_key(std::uint64_t k) {
  const std::uint64_t b = (k >> 63) ? (k & 0x7fffffffffffffffull) : ~k;
  double x;
  std::memcpy(&x, &b, 8);
  return x;
}

// Natural left-to-right floating-point row sum with the diagonal substituted.
double row_sum_with_diag(const Eigen::MatrixXd& a, int i, double diag) {
  const int n = static_cast<int>(a.cols());
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += (j == i) ? diag : a(i, j);
  return s;
}

// Sets a(i,i) so that the plain left-to-right row sum equals `target`
// exactly whenever floating-point arithmetic permits. Seed from a compensated
// (Neumaier) off-diagonal sum, then try a short fixed-point correction; if
// rounding makes that oscillate around the target, fall back to bisection.
// The row sum is a monotone non-decreasing step function of the diagonal
// value, so bisecting over the ordered-bits representation visits every
// reachable sum and finds an exact preimage when one exists. For a small
// fraction of rows no preimage exists at all: re-rounding in the downstream
// partial sums quantizes the reachable sums onto a grid that skips the
// target by half an ulp (verified by exhaustive ulp scans). Those rows get
// the closest reachable sum, |sum - target| <= 2^-54 for target 1/2.
void set_row_sum_diagonal(Eigen::MatrixXd& a, int i, double target) {
  const int n = static_cast<int>(a.cols());
  double sum = 0.0, comp = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double v = a(i, j);
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double diag = target - (sum + comp);

  for (int it = 0; it < 8; ++it) {
    const double r = row_sum_with_diag(a, i, diag);
    if (r == target) {
      a(i, i) = diag;
      return;
    }
    double next = diag + (target - r);
    if (next == diag) {
      next = std::nextafter(
          diag, r < target ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity());
    }
    diag = next;
  }

  // Bracket the target between diagonals whose sums fall short / overshoot.
  double lo = diag, hi = diag;
  double step = std::max(std::abs(diag), 1.0) *
                std::numeric_limits<double>::epsilon();
  while (row_sum_with_diag(a, i, lo) > target) {
    lo -= step;
    step *= 4.0;
  }
  step = std::max(std::abs(diag), 1.0) * std::numeric_limits<double>::epsilon();
  while (row_sum_with_diag(a, i, hi) < target) {
    hi += step;
    step *= 4.0;
  }

  std::uint64_t klo = ordered_key(lo), khi = ordered_key(hi);
  double best_diag = lo;
  double best_err = std::abs(row_sum_with_diag(a, i, lo) - target);
  while (khi - klo > 1) {
    const std::uint64_t kmid = klo + (khi - klo) / 2;
    const double mid = from_ordered_key(kmid);
    const double r = row_sum_with_diag(a, i, mid);
    const double err = std::abs(r - target);
    if (err < best_err) {
      best_err = err;
      best_diag = mid;
    }
    if (r == target) {
      a(i, i) = mid;
      return;
    }
    if (r < target) {
      klo = kmid;
    } else {
      khi = kmid;
    }
  }
  const double rhi = row_sum_with_diag(a, i, hi);
  if (std::abs(rhi - target) < best_err) best_diag = hi;
  a(i, i) = best_diag;
}

std::array<double, 2> as2(const std::array<double, 3>& p) {
  return {p[0], p[1]};
}

// Fills `a` with the adjoint-kernel (Np) off-diagonal entries.
void fill_np_offdiag(const QuadratureGrid& g, Eigen::MatrixXd& a) {
  const int n = static_cast<int>(g.size());
  if (g.d == 1) {
    for (int i = 0; i < n; ++i) {
      const std::array<double, 2> xi = as2(g.points[i]);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        a(i, j) =
            np_kernel(xi, as2(g.points[j]), as2(g.normals[j])) * g.measures[j];
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        a(i, j) =
            np_kernel(g.points[i], g.points[j], g.normals[j]) * g.measures[j];
      }
    }
  }
}

void fill_np_star_offdiag(const QuadratureGrid& g, Eigen::MatrixXd& a) {
  const int n = static_cast<int>(g.size());
  if (g.d == 1) {
    for (int i = 0; i < n; ++i) {
      const std::array<double, 2> xi = as2(g.points[i]);
      const std::array<double, 2> ni = as2(g.normals[i]);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        a(i, j) = np_kernel_star(xi, ni, as2(g.points[j])) * g.measures[j];
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        a(i, j) =
            np_kernel_star(g.points[i], g.normals[i], g.points[j]) *
            g.measures[j];
      }
    }
  }
}

// B = D^{-1} A^T D with D = diag(measures); the fixed evaluation order
// (transpose entry times m_j, then divided by m_i) is part of the contract
// tests rely on.
Eigen::MatrixXd measure_conjugated_transpose(const Eigen::MatrixXd& a,
                                             const std::vector<double>& m) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      b(i, j) = (a(j, i) * m[j]) / m[i];
    }
  }
  return b;
}

detail::DDMatrix measure_conjugated_transpose_dd(const detail::DDMatrix& a,
                                                 const std::vector<double>& m) {
  using namespace detail;
  const Eigen::Index n = a.rows();
  DDMatrix b{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const dd v = dd_div(dd_mul(a.at(j, i), m[j]), dd{m[i], 0.0});
      b.set(i, j, v);
    }
  }
  return b;
}

}  // namespace

QuadratureGrid make_grid(const Geometry& geom, int n_theta, int n_phi) {
  QuadratureGrid g;
  if (geom.is_curve()) {
    if (n_phi != 0) {
      throw std::invalid_argument(
          "make_grid: a curve grid takes a single node count");
    }
    if (n_theta < 8) {
      throw std::invalid_argument(
          "make_grid: need at least 8 nodes for a curve grid");
    }
    g.d = 1;
    g.n_theta = n_theta;
    const std::size_t n = static_cast<std::size_t>(n_theta);
    g.nodes.resize(n);
    g.weights.resize(n);
    g.measures.resize(n);
    g.points.resize(n);
    g.normals.resize(n);
    const double w = 1.0 / n_theta;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = double(i) / n_theta;
      const CurveJet jet = evaluate(geom, t, 1);
      g.nodes[i] = t;
      g.weights[i] = w;
      g.measures[i] = w * jet.speed;
      g.points[i] = {jet.point()[0], jet.point()[1], 0.0};
      g.normals[i] = {jet.unit_normal[0], jet.unit_normal[1], 0.0};
    }
    return g;
  }

  if (n_phi == 0) {
    throw std::invalid_argument(
        "make_grid: a surface grid needs polar and azimuth node counts");
  }
  if (n_theta < 8 || n_phi < 8) {
    throw std::invalid_argument(
        "make_grid: need at least 8 nodes per surface direction");
  }
  g.d = 2;
  g.n_theta = n_theta;
  g.n_phi = n_phi;
  const std::size_t n = std::size_t(n_theta) * std::size_t(n_phi);
  g.nodes.resize(n);
  g.nodes_phi.resize(n);
  g.weights.resize(n);
  g.measures.resize(n);
  g.points.resize(n);
  g.normals.resize(n);

  const GaussLegendre01 polar = gauss_legendre_01(n_theta);
  const double wv = 1.0 / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    for (int j = 0; j < n_phi; ++j) {
      const std::size_t idx = std::size_t(i) * n_phi + j;
      const double u = polar.x[i];
      const double v = double(j) / n_phi;
      const SurfaceJet jet = evaluate(geom, u, v);
      g.nodes[idx] = u;
      g.nodes_phi[idx] = v;
      g.weights[idx] = polar.w[i] * wv;
      g.measures[idx] = g.weights[idx] * jet.jacobian;
      g.points[idx] = jet.point;
      g.normals[idx] = jet.unit_normal;
    }
  }
  return g;
}

OperatorMatrix assemble(const Geometry& geom, const QuadratureGrid& grid,
                        KernelIdentity identity, DiagonalRule rule) {
  identity.validate();
  const KernelIdentity canon = identity.canonical();
  if (canon.which == KernelKind::Composed) {
    throw std::invalid_argument(
        "assemble builds base kernels; use assemble_composed for powers");
  }
  const int d = geom.boundary_dimension();
  if (canon.d != d) {
    throw std::invalid_argument(
        "assemble: kernel identity dimension does not match the geometry");
  }
  if (grid.d != d) {
    throw std::invalid_argument(
        "assemble: grid dimension does not match the geometry");
  }
  check_grid_arrays(grid);
  if (rule == DiagonalRule::kDiagonalLimit) {
    if (d != 1) {
      throw std::invalid_argument(
          "assemble: the diagonal-limit rule is defined for curves only");
    }
    if (geom.curve().derivative_order() < 2) {
      throw std::invalid_argument(
          "assemble: the diagonal-limit rule needs two derivatives");
    }
  }

  const int n = static_cast<int>(grid.size());
  Eigen::MatrixXd a(n, n);

  if (rule == DiagonalRule::kRowSum) {
    // Build the adjoint-kernel matrix whose rows represent the operator
    // acting on samples; its action on the constant function is exactly 1/2.
    fill_np_offdiag(grid, a);
    for (int i = 0; i < n; ++i) set_row_sum_diagonal(a, i, 0.5);
    if (canon.which == KernelKind::NpStar) {
      Eigen::MatrixXd b = measure_conjugated_transpose(a, grid.measures);
      a.swap(b);
    }
  } else {
    if (canon.which == KernelKind::Np) {
      fill_np_offdiag(grid, a);
    } else {
      fill_np_star_offdiag(grid, a);
    }
    for (int i = 0; i < n; ++i) {
      a(i, i) = diagonal_limit(geom, grid.nodes[i]) * grid.measures[i];
    }
  }

  OperatorMatrix out;
  out.entries = std::move(a);
  out.grid = grid;
  out.identity = canon;
  out.rule = rule;
  out.metadata = geom.description();
  out.regularity = geom.regularity();
  return out;
}

OperatorMatrix assemble_composed(const OperatorMatrix& a_star, int n) {
  if (n < 1) {
    throw std::invalid_argument("assemble_composed: order must be at least 1");
  }
  if (a_star.identity.canonical().which != KernelKind::NpStar) {
    throw std::invalid_argument(
        "assemble_composed: input must be the starred base matrix");
  }
  const int size = a_star.n();
  if (size == 0 || a_star.grid.size() != static_cast<std::size_t>(size)) {
    throw std::invalid_argument("assemble_composed: malformed input matrix");
  }

  OperatorMatrix out = a_star;
  out.identity.which = KernelKind::Composed;
  out.identity.n = n;
  out.identity.d = a_star.grid.d;

  // Curve matrices of moderate size carry their compositions in
  // double-double; spectra of composed powers sink far below 2^-52 relative
  // to the top singular value, where plain double products are pure noise.
  const bool extended = a_star.grid.d == 1 && size <= 1024;

  if (n == 1) {
    if (extended && !out.has_shadow()) {
      out.entries_lo = Eigen::MatrixXd::Zero(size, size);
    }
    return out;
  }

  if (extended) {
    using namespace detail;
    DDMatrix star{a_star.entries, a_star.has_shadow()
                                      ? a_star.entries_lo
                                      : Eigen::MatrixXd::Zero(size, size)};
    const DDMatrix adjoint =
        measure_conjugated_transpose_dd(star, a_star.grid.measures);
    const DDMatrix pair = dd_matmul(adjoint, star);

    const int power = n / 2;
    DDMatrix acc = pair;
    for (int k = 1; k < power; ++k) acc = dd_matmul(acc, pair);
    const DDMatrix result = (n % 2 == 0) ? acc : dd_matmul(star, acc);

    out.entries = result.hi;
    out.entries_lo = result.lo;
    return out;
  }

  const Eigen::MatrixXd adjoint =
      measure_conjugated_transpose(a_star.entries, a_star.grid.measures);
  const Eigen::MatrixXd pair = adjoint * a_star.entries;
  const int power = n / 2;
  Eigen::MatrixXd acc = pair;
  for (int k = 1; k < power; ++k) acc = acc * pair;
  out.entries = (n % 2 == 0) ? acc : (a_star.entries * acc).eval();
  out.entries_lo.resize(0, 0);
  return out;
}

void save_matrix(const std::string& path, const OperatorMatrix& a) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("save_matrix: cannot open " + path);
  }
  const std::uint32_t n = static_cast<std::uint32_t>(a.n());
  const std::uint32_t flags = a.has_shadow() ? 1u : 0u;
  char header[16] = {'N', 'P', 'M', 'X'};
  std::memcpy(header + 4, &n, 4);
  std::memcpy(header + 8, &flags, 4);
  out.write(header, 16);

  std::vector<double> row(n);
  const auto write_matrix = [&](const Eigen::MatrixXd& m) {
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) row[j] = m(i, j);
      out.write(reinterpret_cast<const char*>(row.data()),
                std::streamsize(sizeof(double)) * n);
    }
  };
  write_matrix(a.entries);
  if (flags & 1u) write_matrix(a.entries_lo);
  if (!out) {
    throw std::runtime_error("save_matrix: write failed for " + path);
  }
}

MatrixFile load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_matrix: cannot open " + path);
  }
  char header[16];
  in.read(header, 16);
  if (in.gcount() != 16 || header[0] != 'N' || header[1] != 'P' ||
      header[2] != 'M' || header[3] != 'X') {
    throw std::runtime_error("load_matrix: bad header in " + path);
  }
  MatrixFile file;
  std::memcpy(&file.n, header + 4, 4);
  std::memcpy(&file.flags, header + 8, 4);
  if (file.n == 0 || file.n > 1u << 16) {
    throw std::runtime_error("load_matrix: implausible matrix size in " + path);
  }
  const std::uint32_t n = file.n;
  std::vector<double> row(n);
  const auto read_matrix = [&](Eigen::MatrixXd& m) {
    m.resize(n, n);
    for (std::uint32_t i = 0; i < n; ++i) {
      in.read(reinterpret_cast<char*>(row.data()),
              std::streamsize(sizeof(double)) * n);
      if (in.gcount() != std::streamsize(sizeof(double)) * n) {
        throw std::runtime_error("load_matrix: truncated payload in " + path);
      }
      for (std::uint32_t j = 0; j < n; ++j) m(i, j) = row[j];
    }
  };
  read_matrix(file.entries);
  if (file.flags & 1u) read_matrix(file.entries_lo);
  return file;
}

}  // namespace npspec
