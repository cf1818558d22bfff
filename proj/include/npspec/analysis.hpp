#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "npspec/discretize.hpp"
#include "npspec/geometry.hpp"
#include "npspec/spectral.hpp"

namespace npspec {

// Critical eigenvalue decay exponent for a C^{k,alpha} boundary of dimension
// d (ambient dimension d+1): k-1+alpha for curves, alpha/2 for surfaces
// (independent of k >= 1). Preconditions: d in {1,2}, k >= 1, alpha in (0,1];
// violations throw std::invalid_argument.
double critical_exponent(int d, int k, double alpha);

enum class DecaySource { kEigen, kSingular };

// Least-squares power law |lambda_j| ~ c_hat * j^{-q_hat} on a log-log
// window. power_law_plausible distinguishes algebraic decay (r^2 >= 0.98)
// from, e.g., the exponential decay of analytic boundaries.
struct DecayFit {
  double q_hat = 0.0;
  double c_hat = 0.0;
  int j_min = 0;  // window, 1-based inclusive
  int j_max = 0;
  double r_squared = 0.0;
  double q_predicted = 0.0;   // filled by callers that know (d, k, alpha)
  double slack_delta = 0.3;   // one-sided comparison slack
  bool power_law_plausible = false;
};

// Fits on (log j, log value) for j in [j_min, j_max], using eigenvalue
// moduli or singular values. Zero and denormal values are dropped.
// Window violations (j_min < 2, j_max > j_resolved or list length) throw
// std::invalid_argument; fewer than 8 usable points throws
// InsufficientDataError.
DecayFit fit_decay(const Spectrum& spec, int j_min, int j_max,
                   DecaySource use);

// Common result shape for the kernel-estimate probes. Bound checks are
// one-sided (the estimates are upper bounds with unspecified constants);
// `scatter` rows are (separation, measured, bound-with-fitted-constant) for
// plotting and CSV export.
struct ProbeReport {
  std::string probe_name;
  double fitted_exponent = 0.0;
  double predicted_exponent = 0.0;
  double max_ratio = 0.0;
  int samples = 0;
  bool pass = false;
  double r_squared = 0.0;
  bool hypothesis_violated = false;
  std::string note;
  std::vector<std::array<double, 3>> scatter;
};

// Evaluates I(x,y) = integral of |x-z|^{-(d-alpha)} |z-y|^{-(d-beta)} over
// the boundary at sampled node pairs (x, y), then fits the growth in |x-y|.
// The z-integral uses the grid with the two singular nodes excluded and
// replaced by dyadically refined local quadrature. alpha+beta < d compares
// the log-log slope with alpha+beta-d; alpha+beta = d fits linear growth in
// log(1/|x-y|) and reports its r^2. Preconditions: alpha, beta in (0, d],
// alpha+beta <= d (violations throw std::invalid_argument); sampled
// separations span at least 1.5 decades.
ProbeReport probe_convolution_bound(const Geometry& geom,
                                    const QuadratureGrid& grid, double alpha,
                                    double beta, int pair_sample,
                                    std::uint64_t seed);

// Measures the blow-up rate of the kernel near the diagonal: bins sampled
// pairs by separation, takes the per-bin envelope max of |K*(x,y)|, and fits
// its log-log slope. Pass is one-sided: slope >= -(d - alpha) - 0.15 with
// alpha from the declared regularity (smooth counts as alpha = 1).
ProbeReport probe_kernel_singularity(const Geometry& geom, int pair_sample,
                                     std::uint64_t seed);

// Holder-difference probe for the iterated kernel: over sampled node triples
// (x, y, y') with 2|y-y'| < |x-y| (n = 1) or 4|y-y'| < |x-y| (n >= 2),
// computes |L_n(x,y) - L_n(x,y')| relative to the bound
//   |y-y'| * |x-y|^{-(d+1-alpha)}            (n = 1)
//   |y-y'|^alpha * |x-y|^{-(d-(n-1) alpha)}  (n >= 2)
// using discrete kernel values entry/measure at grid nodes only. Reports the
// max ratio and the trend of the per-bin envelope as |y-y'| shrinks; n
// beyond the n <= d/alpha hypothesis sets hypothesis_violated and is still
// computed.
ProbeReport probe_holder_difference(const Geometry& geom,
                                    const OperatorMatrix& a_star, int n,
                                    int triple_sample, std::uint64_t seed);

// Discrete double-Sobolev seminorm estimate of the iterated kernel: the
// triple sum over grid nodes of |L_n(x,y) - L_n(x,y')|^2 / |y-y'|^{2 nu + d}
// plus the L^2 part, with measures as weights. Pairs closer than one node
// spacing (the larger of the two nearest-neighbor distances) are excluded --
// the discrete kernel carries no sub-grid information. The value itself is
// grid-dependent; the meaningful signal is its trend under refinement around
// the threshold nu = (2 n alpha - d)/2.
double probe_sobolev_seminorm(const Geometry& geom,
                              const OperatorMatrix& a_star, int n, double nu);

// Arclength-derivative growth probe for curves: fits the envelope slope of
// |d^l/ds^l K*(x, y(s))| against |x-y| and passes one-sided when it is at
// least -(2 - k + l - alpha) - 0.2. Derivatives are central differences of
// the exact kernel; a vanishing derivative (circle) passes with slope 0.
// Requires d = 1 and 1 <= l <= k (violations throw std::invalid_argument;
// smooth geometries cap the comparison at k = max(l, 2), alpha = 1).
ProbeReport probe_tangential_derivatives(const Geometry& geom, int l,
                                         int pair_sample, std::uint64_t seed);

struct SmoothingReport {
  double gain = 0.0;          // output_decay - source_decay (+inf: rank one)
  double source_decay = 0.0;
  double output_decay = 0.0;
  double sobolev_index = 0.0; // the H^s label the caller assigns to the input
  int modes_used = 0;
};

// Fourier smoothing probe for curves: applies the matrix to a trigonometric
// sample with |f_hat(m)| = m^{-source_decay} and seeded random signs,
// measures the output coefficient decay over modes 2..N/8 by binned
// log-log fit, and reports the decay gain. A rank-one output (every mode
// beyond the mean at relative 1e-12 or below) reports gain = +infinity.
SmoothingReport probe_smoothing(const Geometry& geom, const OperatorMatrix& a,
                                double s, double source_decay,
                                std::uint64_t seed);

}  // namespace npspec
