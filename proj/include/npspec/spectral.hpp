#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "npspec/discretize.hpp"

namespace npspec {

// Spectral data of one operator matrix.
//
// `eigenvalues` is sorted by descending modulus, ties broken by descending
// real part, then ascending imaginary part, so output is deterministic.
// `singular_values` are the singular values of the measure-symmetrized
// matrix D^{1/2} A D^{-1/2} (D = diag of quadrature measures), i.e. the
// singular values of the operator in the discrete L2 geometry, sorted
// descending.
//
// `j_resolved` counts the leading eigenvalues considered grid-resolved. A
// freshly computed spectrum uses a noise proxy (moduli above 1024 eps times
// the top modulus); `set_resolved` replaces it with the refinement rule
// (modulus change below 1% against a finer grid). `realness_defect` is
// max_{j <= j_resolved} |Im lambda_j| / (|lambda_j| + eps_floor) with
// eps_floor = sqrt(machine eps) * |lambda_1|; it is recomputed whenever
// j_resolved changes and is 0 for spectra without eigenvalues.
struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  std::vector<double> singular_values;
  double realness_defect = 0.0;
  int j_resolved = 0;
  std::string source;
};

// Dense nonsymmetric eigendecomposition (values only). Throws
// NumericFailureError carrying the matrix metadata if the QR iteration
// fails to converge.
Spectrum eigen_spectrum(const OperatorMatrix& a);

// Singular values of D^{1/2} A D^{-1/2}. When the matrix carries a
// double-double shadow, the leading ~28 singular values are refined in
// double-double arithmetic (orthogonal iteration warm-started from the
// double SVD, then a one-sided Jacobi pass on the small Ritz block), so
// values far below machine epsilon relative to s_1 are still accurate.
Spectrum singular_spectrum(const OperatorMatrix& a);

// Both of the above in one Spectrum.
Spectrum full_spectrum(const OperatorMatrix& a);

// Sum of s_j^p over j = 1..j_count. Values at or below the noise cutoff
// (1024 eps relative to s_1) count as exact zeros, so noise does not
// masquerade as mass under small p. Throws std::invalid_argument unless
// p > 0 and 0 <= j_count <= length.
double schatten_partial_sum(const Spectrum& spec, double p, int j_count);

struct WeylCheck {
  double lhs = 0.0;  // sum of |lambda_j|^p over the compared prefix
  double rhs = 0.0;  // sum of s_j^p over the compared prefix
  bool holds = false;
};

// Checks the eigenvalue/singular-value majorization sum_{j<=J} |lambda_j|^p
// <= sum_{j<=J} s_j^p (relative tolerance 1e-12). Indices from the first
// position where either list falls to its noise cutoff contribute zero to
// both sides: sub-noise values carry no information and their p-th powers
// would otherwise dominate small-p sums. Throws std::invalid_argument
// unless p > 0 and both lists have length >= j_count.
WeylCheck weyl_check(const Spectrum& spec, double p, int j_count);

// Length of the leading prefix on which the spectra of a coarse and a fine
// grid of the same geometry agree to better than 1% in modulus (eigenvalue
// moduli when both spectra carry eigenvalues, singular values otherwise).
int resolved_count(const Spectrum& coarse, const Spectrum& fine);

// Sets coarse.j_resolved = resolved_count(coarse, fine) and recomputes the
// realness defect over that prefix.
void set_resolved(Spectrum& coarse, const Spectrum& fine);

// Writes "j,re_lambda,im_lambda,abs_lambda,s_j" rows; shortest-round-trip
// number formatting, deterministic across runs. Fields without data (e.g.
// s_j for an eigenvalues-only spectrum) stay empty.
void write_spectrum_csv(std::ostream& out, const Spectrum& spec);

}  // namespace npspec
