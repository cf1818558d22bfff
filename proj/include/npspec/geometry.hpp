#pragma once

#include <array>
#include <climits>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "npspec/errors.hpp"

namespace npspec {

// Hölder regularity class C^{k,alpha}. k = kSmooth marks a C^infinity shape.
struct RegularityClass {
  int k = kSmooth;
  double alpha = 1.0;

  static constexpr int kSmooth = INT_MAX;

  bool smooth() const { return k == kSmooth; }
  void validate() const;
};

// Pointwise data of a parametrized closed curve gamma : [0,1) -> R^2.
// derivatives[p] is gamma^(p)(t); derivatives[0] is the point itself.
struct CurveJet {
  double t = 0.0;
  std::vector<std::array<double, 2>> derivatives;
  std::array<double, 2> unit_normal{0.0, 0.0};  // outward
  double speed = 0.0;                           // |gamma'(t)|
  double curvature = 0.0;                       // signed, >0 for a circle

  const std::array<double, 2>& point() const { return derivatives[0]; }
};

// Pointwise data of a parametrized closed surface S : [0,1]^2 -> R^3
// (polar chart; u is the colatitude coordinate, v the azimuth).
struct SurfaceJet {
  double u = 0.0, v = 0.0;
  std::array<double, 3> point{0, 0, 0};
  std::array<double, 3> du{0, 0, 0};            // dS/du
  std::array<double, 3> dv{0, 0, 0};            // dS/dv
  std::array<double, 3> unit_normal{0, 0, 0};   // outward
  double jacobian = 0.0;                        // |dS/du x dS/dv|
};

// A closed 2D curve represented as a finite complex Fourier series
//   z(t) = sum_m coeff[m] * e^{2 pi i m t},
// so derivatives of any order are exact (coefficient multiplication).
class Curve {
public:
  struct Mode {
    int m = 0;
    std::complex<double> c{0.0, 0.0};
  };

  Curve(std::vector<Mode> modes, RegularityClass regularity,
        int derivative_order, std::string description);

  // Evaluates gamma and its derivatives up to `order` (inclusive) at t.
  // Requires 0 <= order <= derivative_order. Speed, unit normal, and
  // curvature are always filled (they need only first/second derivatives,
  // which every generated curve provides).
  CurveJet evaluate(double t, int order) const;

  const RegularityClass& regularity() const { return regularity_; }
  int derivative_order() const { return derivative_order_; }
  const std::string& description() const { return description_; }
  const std::vector<Mode>& modes() const { return modes_; }
  bool sample_density_warning() const { return sample_density_warning_; }

  // Exact signed area pi * sum_m m |c_m|^2 from the coefficients.
  double signed_area() const;

  void set_sample_density_warning(bool w) { sample_density_warning_ = w; }

private:
  std::vector<Mode> modes_;
  RegularityClass regularity_;
  int derivative_order_;
  std::string description_;
  bool sample_density_warning_ = false;
};

// A closed star-shaped surface r(theta, phi) = 1 + sum c_{l,m} Y_{l,m}
// over the real orthonormal spherical harmonics, in the polar chart
// theta = pi u, phi = 2 pi v.
class Surface {
public:
  struct Harmonic {
    int l = 0;
    int m = 0;  // negative m selects the sine branch
    double c = 0.0;
  };

  Surface(std::vector<Harmonic> harmonics, RegularityClass regularity,
          std::string description);

  // Evaluates the chart, first derivatives, outward normal, and jacobian.
  // At the chart poles (sin(pi u) ~ 0) the tangent pair degenerates: the
  // point stays valid, derivatives are zeroed, the normal falls back to the
  // axis direction, and the jacobian is reported as 0.
  SurfaceJet evaluate(double u, double v) const;

  // Radial factor r(theta, phi) and its chart-metric ingredients; mainly for
  // tests and validation.
  double radius(double u, double v) const;

  const RegularityClass& regularity() const { return regularity_; }
  const std::string& description() const { return description_; }
  const std::vector<Harmonic>& harmonics() const { return harmonics_; }
  int max_degree() const { return max_degree_; }

private:
  std::vector<Harmonic> harmonics_;
  RegularityClass regularity_;
  std::string description_;
  int max_degree_ = 0;
};

// A geometry is either a curve (d = 1, boundary dimension one) or a surface
// (d = 2). `d` below matches the boundary dimension used by the estimates.
class Geometry {
public:
  // `recipe_json` is the serializable construction recipe; the make_*
  // generators always provide it, and geometry_to_json replays it.
  explicit Geometry(Curve curve, std::string recipe_json = "");
  explicit Geometry(Surface surface, std::string recipe_json = "");

  int boundary_dimension() const { return curve_ ? 1 : 2; }
  bool is_curve() const { return curve_ != nullptr; }
  const Curve& curve() const;
  const Surface& surface() const;
  const RegularityClass& regularity() const;
  const std::string& description() const;
  const std::string& recipe_json() const { return recipe_json_; }

private:
  std::shared_ptr<const Curve> curve_;
  std::shared_ptr<const Surface> surface_;
  std::string recipe_json_;
};

// --- Generators ---------------------------------------------------------

// Circle of the given radius centered at the origin (C^infinity).
Geometry make_circle(double radius);

// Axis-aligned ellipse with semi-axes a >= b > 0 (C^infinity).
Geometry make_ellipse(double a, double b);

// Lacunary ("Weierstrass-type") radial perturbation of the unit circle:
//   z(t) = (1 + rho(t)) e^{2 pi i t},
//   rho(t) = amplitude * sum_{n=1..levels} base^{-n(k+alpha)} cos(2 pi base^n t + phase_n),
// which lies in C^{k,alpha} and in no better Hölder class as levels -> inf.
// phases empty means all zero. Throws std::invalid_argument when the
// parameters would destroy regularity (speed positivity / star shape).
Geometry make_weierstrass_curve(RegularityClass regularity, int levels,
                                double amplitude, int base = 2,
                                const std::vector<double>& phases = {});

// Star-shaped perturbation of the unit sphere by a real spherical-harmonic
// series. `declared` is the regularity tag carried by the geometry (the
// finite series is C^infinity; a lacunary truncation models a rougher class).
Geometry make_perturbed_sphere(const std::vector<Surface::Harmonic>& harmonics,
                               RegularityClass declared = RegularityClass{});

// Unit sphere (no perturbation).
Geometry make_unit_sphere();

// Zonal lacunary analogue of the Weierstrass curve on the sphere:
//   r = 1 + amplitude * sum_{n=1..levels} base^{-n(k+alpha)} Y_{base^n, 0}.
Geometry make_weierstrass_sphere(RegularityClass regularity, int levels,
                                 double amplitude, int base = 2);

// Deterministic pseudo-random phases in [0, 2 pi) for robustness sweeps of
// the lacunary family.
std::vector<double> random_phases(int levels, std::uint64_t seed);

// --- Free-function jet access (convenience over the class methods) ------

CurveJet evaluate(const Geometry& geom, double t, int order);
SurfaceJet evaluate(const Geometry& geom, double u, double v);

// --- Serialization -------------------------------------------------------

// Round-trippable JSON description (bit-exact: coefficients serialized as
// lossless decimal). See docs/config-schema.md for the schema.
std::string geometry_to_json(const Geometry& geom);
Geometry geometry_from_json(const std::string& text);

// --- Real spherical-harmonic evaluation (exposed for tests) --------------

// Fully normalized real Y_{l,m}(theta, phi) and its theta-derivative.
// m >= 0 selects sqrt(2) P_{l,m}(cos theta) cos(m phi) (plain P_{l,0} for
// m = 0); m < 0 selects sqrt(2) P_{l,|m|}(cos theta) sin(|m| phi).
struct HarmonicValue {
  double y = 0.0;
  double dy_dtheta = 0.0;
  double dy_dphi = 0.0;
};
HarmonicValue real_spherical_harmonic(int l, int m, double theta, double phi);

}  // namespace npspec
