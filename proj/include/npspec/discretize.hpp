#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npspec/geometry.hpp"
#include "npspec/kernel.hpp"

namespace npspec {

// Quadrature carrier for the boundary measure.
//
// Curves (d = 1): `n_theta` equispaced parameter nodes of the periodic
// trapezoid rule; measures[i] = weight * speed at node i.
//
// Surfaces (d = 2): Gauss-Legendre nodes in the polar chart coordinate u
// crossed with `n_phi` equispaced azimuth nodes v, ordered ring by ring
// (index = i_theta * n_phi + i_phi). Polar nodes live strictly inside (0,1),
// so the chart poles never become quadrature nodes; measures[i] = weight *
// surface jacobian.
struct QuadratureGrid {
  int d = 1;
  int n_theta = 0;
  int n_phi = 0;                   // 0 for curves
  std::vector<double> nodes;       // curve parameter t, or chart u per node
  std::vector<double> nodes_phi;   // chart v per node; empty for curves
  std::vector<double> weights;     // parameter-domain weights, all > 0
  std::vector<double> measures;    // surface-measure element per node
  std::vector<std::array<double, 3>> points;   // cached boundary points
  std::vector<std::array<double, 3>> normals;  // cached outward unit normals

  std::size_t size() const { return weights.size(); }
};

// Builds the quadrature grid for a geometry. Curves take only `n_theta`
// (>= 8, `n_phi` must stay 0); surfaces need both counts (each >= 8).
QuadratureGrid make_grid(const Geometry& geom, int n_theta, int n_phi = 0);

// How the (formally singular) diagonal of the Nystrom matrix is defined.
//  kRowSum: the diagonal entry makes each row of the adjoint-kernel matrix
//    sum to exactly 1/2, the known action of the operator on constants. The
//    starred matrix is then the measure-conjugated transpose, preserving the
//    spectrum. Works in both dimensions; the default.
//  kDiagonalLimit: diagonal = (pointwise kernel limit) * measure. Curves
//    only; a cross-check rule whose row sums converge to 1/2 with the grid.
enum class DiagonalRule { kRowSum, kDiagonalLimit };

// Dense Nystrom matrix of one kernel identity on one grid.
// Off-diagonal entries are kernel(x_i, x_j) * measures[j].
//
// `entries_lo` is an optional extended-precision residual: when present
// (curve compositions up to N = 1024), entries + entries_lo is a
// double-double representation of the composed product, letting downstream
// singular-value computations resolve the deep tail of the spectrum that
// plain double products would bury in roundoff.
struct OperatorMatrix {
  Eigen::MatrixXd entries;
  Eigen::MatrixXd entries_lo;
  QuadratureGrid grid;
  KernelIdentity identity;
  DiagonalRule rule = DiagonalRule::kRowSum;
  std::string metadata;          // human-readable geometry description
  RegularityClass regularity;    // declared smoothness of the geometry

  int n() const { return static_cast<int>(entries.rows()); }
  bool has_shadow() const { return entries_lo.size() != 0; }
};

// Assembles the adjoint (Np) or starred (NpStar) kernel matrix.
// Preconditions: the identity is a base kernel matching the geometry/grid
// dimension; kDiagonalLimit requires a curve providing two derivatives.
// Duplicate quadrature nodes are rejected (std::invalid_argument).
OperatorMatrix assemble(const Geometry& geom, const QuadratureGrid& grid,
                        KernelIdentity identity, DiagonalRule rule);

// Composition power of the starred operator:
//   order n odd  -> A* (A A*)^((n-1)/2)
//   order n even -> (A A*)^(n/2)
// where A is the measure-conjugated transpose of A*. n = 1 returns the input
// matrix unchanged (bit-for-bit entries). For curves with N <= 1024 the
// products are carried in double-double precision and the residual is stored
// in entries_lo.
OperatorMatrix assemble_composed(const OperatorMatrix& a_star, int n);

// Binary dump for debugging and tests: 16-byte header {magic "NPMX",
// little-endian u32 N, u32 flags, 4 zero bytes}, then row-major 64-bit
// floats. Flag bit 0 marks a second matrix (the extended-precision residual)
// following the first.
void save_matrix(const std::string& path, const OperatorMatrix& a);

struct MatrixFile {
  std::uint32_t n = 0;
  std::uint32_t flags = 0;
  Eigen::MatrixXd entries;
  Eigen::MatrixXd entries_lo;  // empty unless flag bit 0 is set
};

MatrixFile load_matrix(const std::string& path);

}  // namespace npspec
