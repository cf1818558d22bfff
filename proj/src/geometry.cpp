#include "npspec/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace npspec {

using std::numbers::pi;
using json = nlohmann::json;

namespace {

// Shortest round-trip decimal form of a double (deterministic, locale-free).
std::string fmt_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void check_finite(double x, const char* name) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument(std::string(name) + " must be finite");
  }
}

// Integer power with overflow guard (used for lacunarity_base^level).
long long ipow_checked(int base, int exp) {
  long long v = 1;
  for (int i = 0; i < exp; ++i) {
    v *= base;
    if (v > (1LL << 30)) {
      throw std::invalid_argument(
          "lacunarity_base^levels too large to represent safely");
    }
  }
  return v;
}

constexpr int kSmoothDerivativeOrder = 64;
constexpr long long kSampleDensityAdvisory = 512;  // finest mode vs N=4096/8

}  // namespace

// --- RegularityClass ------------------------------------------------------

void RegularityClass::validate() const {
  if (!smooth() && k < 1) {
    throw std::invalid_argument("regularity requires k >= 1");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("regularity requires alpha in (0, 1]");
  }
}

// --- Curve ------------------------------------------------------------------

Curve::Curve(std::vector<Mode> modes, RegularityClass regularity,
             int derivative_order, std::string description)
    : modes_(std::move(modes)),
      regularity_(regularity),
      derivative_order_(derivative_order),
      description_(std::move(description)) {
  regularity_.validate();
  if (modes_.empty()) {
    throw std::invalid_argument("curve needs at least one Fourier mode");
  }
  if (derivative_order_ < 2) {
    throw std::invalid_argument("curve must expose at least two derivatives");
  }
  for (const auto& md : modes_) {
    check_finite(md.c.real(), "mode coefficient");
    check_finite(md.c.imag(), "mode coefficient");
  }
}

CurveJet Curve::evaluate(double t, int order) const {
  if (order < 0) throw std::invalid_argument("derivative order must be >= 0");
  if (order > derivative_order_) {
    throw UnsupportedOrderError(
        "derivative order " + std::to_string(order) +
        " exceeds available order " + std::to_string(derivative_order_));
  }
  const int p_max = std::max(order, 2);  // speed/normal/curvature need 2

  std::vector<std::complex<double>> ders(p_max + 1, {0.0, 0.0});
  for (const auto& md : modes_) {
    // Reduce the phase to [-1/2, 1/2] turns before multiplying by 2 pi so
    // the sin/cos argument stays small (exact periodicity up to rounding).
    const double frac = std::remainder(static_cast<double>(md.m) * t, 1.0);
    const std::complex<double> e = std::polar(1.0, 2.0 * pi * frac);
    std::complex<double> term = md.c * e;
    const std::complex<double> iw(0.0, 2.0 * pi * md.m);
    for (int p = 0; p <= p_max; ++p) {
      ders[p] += term;
      term *= iw;
    }
  }

  CurveJet jet;
  jet.t = t;
  jet.derivatives.resize(order + 1);
  for (int p = 0; p <= order; ++p) {
    jet.derivatives[p] = {ders[p].real(), ders[p].imag()};
  }
  const double xp = ders[1].real(), yp = ders[1].imag();
  const double xpp = ders[2].real(), ypp = ders[2].imag();
  jet.speed = std::hypot(xp, yp);
  if (jet.speed == 0.0) {
    throw NumericFailureError("degenerate parameterization: |gamma'| = 0");
  }
  // Outward normal of a positively (counterclockwise) oriented curve.
  jet.unit_normal = {yp / jet.speed, -xp / jet.speed};
  jet.curvature = (xp * ypp - yp * xpp) / (jet.speed * jet.speed * jet.speed);
  return jet;
}

double Curve::signed_area() const {
  // z(t) = sum c_m e^{2 pi i m t}  =>  area = pi * sum m |c_m|^2.
  double area = 0.0;
  for (const auto& md : modes_) {
    area += static_cast<double>(md.m) * std::norm(md.c);
  }
  return pi * area;
}

// --- Real spherical harmonics ----------------------------------------------

namespace {

// Fully normalized associated Legendre values P(l, m, cos theta) and the
// previous-degree value P(l-1, m, cos theta), via the standard stable
// three-term recurrence. Normalization: the real harmonics assembled from
// these are orthonormal on the sphere. Condon-Shortley phase omitted.
struct AlpPair {
  double p = 0.0;      // P(l, m)
  double p_prev = 0.0; // P(l-1, m); zero when l == m
};

AlpPair alp_normalized(int l, int m, double x, double s) {
  double pmm = 1.0 / std::sqrt(4.0 * pi);
  for (int i = 1; i <= m; ++i) {
    pmm *= std::sqrt((2.0 * i + 1.0) / (2.0 * i)) * s;
  }
  double p_prev = 0.0;
  double p_curr = pmm;
  for (int ll = m + 1; ll <= l; ++ll) {
    const double lm = static_cast<double>(ll - m) * (ll + m);
    const double a = std::sqrt((2.0 * ll - 1.0) * (2.0 * ll + 1.0) / lm);
    const double b =
        std::sqrt((2.0 * ll + 1.0) * (ll - 1.0 + m) * (ll - 1.0 - m) /
                  ((2.0 * ll - 3.0) * lm));
    const double p_next = a * x * p_curr - b * p_prev;
    p_prev = p_curr;
    p_curr = p_next;
  }
  return {p_curr, p_prev};
}

}  // namespace

HarmonicValue real_spherical_harmonic(int l, int m, double theta, double phi) {
  if (l < 0 || std::abs(m) > l) {
    throw std::invalid_argument("harmonic requires 0 <= |m| <= l");
  }
  const int ma = std::abs(m);
  const double x = std::cos(theta);
  const double s = std::sin(theta);
  const AlpPair P = alp_normalized(l, ma, x, s);

  double ang = 1.0, dang = 0.0;  // azimuthal factor and d/dphi
  if (m > 0) {
    ang = std::numbers::sqrt2 * std::cos(ma * phi);
    dang = -std::numbers::sqrt2 * ma * std::sin(ma * phi);
  } else if (m < 0) {
    ang = std::numbers::sqrt2 * std::sin(ma * phi);
    dang = std::numbers::sqrt2 * ma * std::cos(ma * phi);
  }

  HarmonicValue out;
  out.y = P.p * ang;
  out.dy_dphi = P.p * dang;
  if (std::abs(s) > 1e-14) {
    const double e = std::sqrt(static_cast<double>(l * l - ma * ma) *
                               (2.0 * l + 1.0) / (2.0 * l - 1.0));
    const double dp = (l * x * P.p - (l > 0 ? e * P.p_prev : 0.0)) / s;
    out.dy_dtheta = dp * ang;
  } else {
    out.dy_dtheta = 0.0;  // chart pole: derivative not provided
  }
  return out;
}

// --- Surface ----------------------------------------------------------------

Surface::Surface(std::vector<Harmonic> harmonics, RegularityClass regularity,
                 std::string description)
    : harmonics_(std::move(harmonics)),
      regularity_(regularity),
      description_(std::move(description)) {
  regularity_.validate();
  for (const auto& h : harmonics_) {
    if (h.l < 0 || h.l > 64 || std::abs(h.m) > h.l) {
      throw std::invalid_argument(
          "harmonic degree/order out of range (0 <= |m| <= l <= 64)");
    }
    check_finite(h.c, "harmonic amplitude");
    max_degree_ = std::max(max_degree_, h.l);
  }
}

double Surface::radius(double u, double v) const {
  const double theta = pi * u;
  const double phi = 2.0 * pi * v;
  double r = 1.0;
  for (const auto& h : harmonics_) {
    r += h.c * real_spherical_harmonic(h.l, h.m, theta, phi).y;
  }
  return r;
}

SurfaceJet Surface::evaluate(double u, double v) const {
  const double theta = pi * u;
  const double phi = 2.0 * pi * v;
  const double s = std::sin(theta);
  const double x = std::cos(theta);
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);

  double r = 1.0, r_th = 0.0, r_ph = 0.0;
  for (const auto& h : harmonics_) {
    const HarmonicValue hv = real_spherical_harmonic(h.l, h.m, theta, phi);
    r += h.c * hv.y;
    r_th += h.c * hv.dy_dtheta;
    r_ph += h.c * hv.dy_dphi;
  }

  SurfaceJet jet;
  jet.u = u;
  jet.v = v;
  const std::array<double, 3> omega = {s * cp, s * sp, x};
  jet.point = {r * omega[0], r * omega[1], r * omega[2]};

  if (std::abs(s) < 1e-12) {
    // Chart pole: the tangent pair from this chart degenerates. The point is
    // still well defined; derivative data is zeroed and the normal falls
    // back to the axis direction (exact for zonal perturbations).
    jet.du = jet.dv = {0.0, 0.0, 0.0};
    jet.unit_normal = {0.0, 0.0, x >= 0.0 ? 1.0 : -1.0};
    jet.jacobian = 0.0;
    return jet;
  }

  const std::array<double, 3> omega_th = {x * cp, x * sp, -s};
  const std::array<double, 3> omega_ph = {-s * sp, s * cp, 0.0};
  for (int c = 0; c < 3; ++c) {
    jet.du[c] = pi * (r_th * omega[c] + r * omega_th[c]);
    jet.dv[c] = 2.0 * pi * (r_ph * omega[c] + r * omega_ph[c]);
  }
  const std::array<double, 3> cross = {
      jet.du[1] * jet.dv[2] - jet.du[2] * jet.dv[1],
      jet.du[2] * jet.dv[0] - jet.du[0] * jet.dv[2],
      jet.du[0] * jet.dv[1] - jet.du[1] * jet.dv[0]};
  jet.jacobian =
      std::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]);
  if (jet.jacobian <= 0.0) {
    throw NumericFailureError("degenerate surface chart: zero jacobian");
  }
  for (int c = 0; c < 3; ++c) jet.unit_normal[c] = cross[c] / jet.jacobian;
  return jet;
}

// --- Geometry ---------------------------------------------------------------

Geometry::Geometry(Curve curve, std::string recipe_json)
    : curve_(std::make_shared<const Curve>(std::move(curve))),
      recipe_json_(std::move(recipe_json)) {}

Geometry::Geometry(Surface surface, std::string recipe_json)
    : surface_(std::make_shared<const Surface>(std::move(surface))),
      recipe_json_(std::move(recipe_json)) {}

const Curve& Geometry::curve() const {
  if (!curve_) throw std::invalid_argument("geometry is not a curve");
  return *curve_;
}

const Surface& Geometry::surface() const {
  if (!surface_) throw std::invalid_argument("geometry is not a surface");
  return *surface_;
}

const RegularityClass& Geometry::regularity() const {
  return curve_ ? curve_->regularity() : surface_->regularity();
}

const std::string& Geometry::description() const {
  return curve_ ? curve_->description() : surface_->description();
}

CurveJet evaluate(const Geometry& geom, double t, int order) {
  return geom.curve().evaluate(t, order);
}

SurfaceJet evaluate(const Geometry& geom, double u, double v) {
  return geom.surface().evaluate(u, v);
}

// --- Generators --------------------------------------------------------------

namespace {

json regularity_to_json(const RegularityClass& reg) {
  json j;
  if (reg.smooth()) {
    j["k"] = "smooth";
  } else {
    j["k"] = reg.k;
  }
  j["alpha"] = reg.alpha;
  return j;
}

RegularityClass regularity_from_json(const json& j) {
  RegularityClass reg;
  if (j.at("k").is_string()) {
    if (j.at("k").get<std::string>() != "smooth") {
      throw std::invalid_argument("regularity.k must be an integer or 'smooth'");
    }
    reg.k = RegularityClass::kSmooth;
  } else {
    reg.k = j.at("k").get<int>();
  }
  reg.alpha = j.at("alpha").get<double>();
  reg.validate();
  return reg;
}

std::string make_recipe(const std::string& type, json parameters,
                        const RegularityClass& reg,
                        const std::string& description,
                        json extra = json::object()) {
  json doc;
  doc["type"] = type;
  doc["parameters"] = std::move(parameters);
  doc["regularity"] = regularity_to_json(reg);
  doc["description"] = description;
  for (auto& [key, value] : extra.items()) doc[key] = std::move(value);
  return doc.dump(2) + "\n";
}

}  // namespace

Geometry make_circle(double radius) {
  check_finite(radius, "radius");
  if (radius <= 0.0) throw std::invalid_argument("radius must be positive");
  const RegularityClass reg{};  // smooth
  const std::string desc = "circle radius=" + fmt_double(radius);
  Curve curve({{1, {radius, 0.0}}}, reg, kSmoothDerivativeOrder, desc);
  return Geometry(std::move(curve),
                  make_recipe("circle", json{{"radius", radius}}, reg, desc));
}

Geometry make_ellipse(double a, double b) {
  check_finite(a, "semi-axis a");
  check_finite(b, "semi-axis b");
  if (!(a >= b && b > 0.0)) {
    throw std::invalid_argument("ellipse requires a >= b > 0");
  }
  const RegularityClass reg{};
  const std::string desc =
      "ellipse a=" + fmt_double(a) + " b=" + fmt_double(b);
  // (a cos, b sin) = c_1 e^{2 pi i t} + c_{-1} e^{-2 pi i t}.
  Curve curve({{1, {0.5 * (a + b), 0.0}}, {-1, {0.5 * (a - b), 0.0}}}, reg,
              kSmoothDerivativeOrder, desc);
  return Geometry(std::move(curve),
                  make_recipe("ellipse", json{{"a", a}, {"b", b}}, reg, desc));
}

Geometry make_weierstrass_curve(RegularityClass regularity, int levels,
                                double amplitude, int base,
                                const std::vector<double>& phases) {
  regularity.validate();
  if (regularity.smooth()) {
    throw std::invalid_argument(
        "lacunary curve requires a finite Hölder class (k, alpha)");
  }
  if (levels < 0) throw std::invalid_argument("levels must be >= 0");
  if (amplitude < 0.0) throw std::invalid_argument("amplitude must be >= 0");
  check_finite(amplitude, "amplitude");
  if (base < 2) throw std::invalid_argument("lacunarity_base must be >= 2");
  if (!phases.empty() && static_cast<int>(phases.size()) < levels) {
    throw std::invalid_argument("phases must have length >= levels");
  }
  const long long finest = ipow_checked(base, levels);

  std::vector<double> phi(levels, 0.0);
  for (int n = 0; n < levels; ++n) {
    if (!phases.empty()) phi[n] = phases[n];
    check_finite(phi[n], "phase");
  }

  const double exponent = regularity.k + regularity.alpha;
  std::vector<double> amp(levels + 1, 0.0);
  std::vector<long long> freq(levels + 1, 0);
  for (int n = 1; n <= levels; ++n) {
    freq[n] = ipow_checked(base, n);
    amp[n] = amplitude * std::pow(static_cast<double>(base), -exponent * n);
  }

  // Dense sampling check: 1 + rho(t) >= 1/2 everywhere.
  {
    const long long want = std::max<long long>(4096, 8 * finest);
    const int M = static_cast<int>(std::min<long long>(want, 1 << 20));
    for (int i = 0; i < M; ++i) {
      const double t = static_cast<double>(i) / M;
      double rho = 0.0;
      for (int n = 1; n <= levels; ++n) {
        rho += amp[n] * std::cos(2.0 * pi * freq[n] * t + phi[n - 1]);
      }
      if (1.0 + rho < 0.5) {
        throw std::invalid_argument(
            "amplitude too large: 1 + rho(t) drops below 1/2");
      }
    }
  }

  // z(t) = (1 + rho) e^{2 pi i t}; each cosine splits into modes 1 +- b^n.
  std::vector<Curve::Mode> modes;
  modes.push_back({1, {1.0, 0.0}});
  for (int n = 1; n <= levels; ++n) {
    const std::complex<double> half =
        0.5 * amp[n] * std::polar(1.0, phi[n - 1]);
    modes.push_back({static_cast<int>(1 + freq[n]), half});
    modes.push_back({static_cast<int>(1 - freq[n]), std::conj(half)});
  }

  std::string desc = "lacunary curve k=" + std::to_string(regularity.k) +
                     " alpha=" + fmt_double(regularity.alpha) +
                     " levels=" + std::to_string(levels) +
                     " amplitude=" + fmt_double(amplitude) +
                     " base=" + std::to_string(base);
  Curve curve(std::move(modes), regularity, regularity.k + 2, desc);
  curve.set_sample_density_warning(finest > kSampleDensityAdvisory);

  json extra;
  extra["levels"] = levels;
  extra["amplitude"] = amplitude;
  extra["base"] = base;
  extra["phases"] = phi;
  return Geometry(std::move(curve),
                  make_recipe("weierstrass_curve", json::object(), regularity,
                              desc, std::move(extra)));
}

std::vector<double> random_phases(int levels, std::uint64_t seed) {
  if (levels < 0) throw std::invalid_argument("levels must be >= 0");
  std::mt19937_64 gen(seed);
  std::vector<double> out(levels);
  for (auto& v : out) {
    // Map the top 53 bits to [0, 1) to stay implementation-independent.
    v = 2.0 * pi * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
  }
  return out;
}

Geometry make_perturbed_sphere(const std::vector<Surface::Harmonic>& harmonics,
                               RegularityClass declared) {
  declared.validate();
  std::string desc;
  if (harmonics.empty()) {
    desc = "unit sphere";
  } else {
    int maxdeg = 0;
    for (const auto& h : harmonics) maxdeg = std::max(maxdeg, h.l);
    desc = "perturbed sphere modes=" + std::to_string(harmonics.size()) +
           " max_degree=" + std::to_string(maxdeg);
  }
  Surface surface(harmonics, declared, desc);

  // Dense sampling check: r(u, v) >= 1/2 everywhere (resolution scaled to
  // the highest harmonic degree present).
  const int L = std::max(1, surface.max_degree());
  const int nu = std::max(65, 8 * L + 1);
  const int nv = std::max(128, 16 * L);
  for (int i = 0; i <= nu; ++i) {
    const double u = static_cast<double>(i) / nu;
    for (int j = 0; j < nv; ++j) {
      const double v = static_cast<double>(j) / nv;
      if (surface.radius(u, v) < 0.5) {
        throw std::invalid_argument(
            "harmonic amplitudes too large: radius drops below 1/2");
      }
    }
  }

  json harmonics_json = json::array();
  for (const auto& h : harmonics) {
    harmonics_json.push_back(json::array({h.l, h.m, h.c}));
  }
  return Geometry(
      std::move(surface),
      make_recipe("perturbed_sphere", json{{"harmonics", harmonics_json}},
                  declared, desc));
}

Geometry make_unit_sphere() { return make_perturbed_sphere({}); }

Geometry make_weierstrass_sphere(RegularityClass regularity, int levels,
                                 double amplitude, int base) {
  regularity.validate();
  if (regularity.smooth()) {
    throw std::invalid_argument(
        "lacunary sphere requires a finite Hölder class (k, alpha)");
  }
  if (levels < 0) throw std::invalid_argument("levels must be >= 0");
  if (amplitude < 0.0) throw std::invalid_argument("amplitude must be >= 0");
  if (base < 2) throw std::invalid_argument("lacunarity_base must be >= 2");
  const double exponent = regularity.k + regularity.alpha;
  std::vector<Surface::Harmonic> harmonics;
  for (int n = 1; n <= levels; ++n) {
    const long long l = ipow_checked(base, n);
    if (l > 64) {
      throw std::invalid_argument(
          "lacunary sphere degree exceeds the supported maximum (64)");
    }
    harmonics.push_back(
        {static_cast<int>(l), 0,
         amplitude * std::pow(static_cast<double>(base), -exponent * n)});
  }
  Geometry base_geom = make_perturbed_sphere(harmonics, regularity);
  const std::string desc =
      "lacunary sphere k=" + std::to_string(regularity.k) +
      " alpha=" + fmt_double(regularity.alpha) +
      " levels=" + std::to_string(levels) +
      " amplitude=" + fmt_double(amplitude) + " base=" + std::to_string(base);
  Surface surface(harmonics, regularity, desc);
  json extra;
  extra["levels"] = levels;
  extra["amplitude"] = amplitude;
  extra["base"] = base;
  return Geometry(std::move(surface),
                  make_recipe("weierstrass_sphere", json::object(), regularity,
                              desc, std::move(extra)));
}

// --- Serialization ------------------------------------------------------------

std::string geometry_to_json(const Geometry& geom) {
  if (geom.recipe_json().empty()) {
    throw std::invalid_argument(
        "geometry carries no serializable construction recipe");
  }
  return geom.recipe_json();
}

Geometry geometry_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("geometry JSON parse error: ") +
                                e.what());
  }
  try {
    const std::string type = doc.at("type").get<std::string>();
    const json no_parameters = json::object();
    const json& p =
        doc.contains("parameters") ? doc.at("parameters") : no_parameters;
    if (type == "circle") {
      return make_circle(p.at("radius").get<double>());
    }
    if (type == "ellipse") {
      return make_ellipse(p.at("a").get<double>(), p.at("b").get<double>());
    }
    if (type == "weierstrass_curve") {
      const RegularityClass reg = regularity_from_json(doc.at("regularity"));
      std::vector<double> phases;  // empty list means zero phases
      if (doc.contains("phases")) {
        phases = doc.at("phases").get<std::vector<double>>();
      }
      return make_weierstrass_curve(
          reg, doc.at("levels").get<int>(), doc.at("amplitude").get<double>(),
          doc.contains("base") ? doc.at("base").get<int>() : 2, phases);
    }
    if (type == "weierstrass_sphere") {
      const RegularityClass reg = regularity_from_json(doc.at("regularity"));
      return make_weierstrass_sphere(
          reg, doc.at("levels").get<int>(), doc.at("amplitude").get<double>(),
          doc.contains("base") ? doc.at("base").get<int>() : 2);
    }
    if (type == "perturbed_sphere") {
      std::vector<Surface::Harmonic> harmonics;
      for (const auto& h : p.at("harmonics")) {
        harmonics.push_back({h.at(0).get<int>(), h.at(1).get<int>(),
                             h.at(2).get<double>()});
      }
      RegularityClass reg;  // default: smooth
      if (doc.contains("regularity")) {
        reg = regularity_from_json(doc.at("regularity"));
      }
      return make_perturbed_sphere(harmonics, reg);
    }
    throw std::invalid_argument("unknown geometry type: " + type);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("geometry JSON field error: ") +
                                e.what());
  }
}

}  // namespace npspec
