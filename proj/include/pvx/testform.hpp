#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "pvx/geometry.hpp"

namespace pvx {

/// Polynomial bump profile b(r) = (1 - (r/rho)^2)^4 on [0, rho), zero
/// outside. C^3 across the support boundary, all derivatives in closed
/// form.
struct BumpProfile {
    static double value(double r, double rho) {
        double s = r / rho;
        if (s >= 1.0) return 0.0;
        double u = 1.0 - s * s;
        return u * u * u * u;
    }
    static double deriv(double r, double rho) {
        double s = r / rho;
        if (s >= 1.0) return 0.0;
        double u = 1.0 - s * s;
        return -8.0 * s * u * u * u / rho;
    }
    /// b'(r)/r, finite at r = 0.
    static double deriv_over_r(double r, double rho) {
        double s = r / rho;
        if (s >= 1.0) return 0.0;
        double u = 1.0 - s * s;
        return -8.0 * u * u * u / (rho * rho);
    }
    static double second(double r, double rho) {
        double s = r / rho;
        if (s >= 1.0) return 0.0;
        double u = 1.0 - s * s;
        return -8.0 * u * u * (1.0 - 7.0 * s * s) / (rho * rho);
    }
};

namespace detail {
/// t*cot(t) with a series guard near zero.
inline double t_cot_t(double t) {
    if (std::abs(t) < 1e-4) {
        double t2 = t * t;
        return 1.0 - t2 / 3.0 - t2 * t2 / 45.0;
    }
    return t / std::tan(t);
}
}  // namespace detail

/// Compactly supported scalar test function phi(x) = b(d(c, x)) with exact
/// differential and Laplace-Beltrami image.
class ScalarTestForm {
  public:
    ScalarTestForm(const Surface& s, const SurfacePoint& center, double radius,
                   double amplitude = 1.0)
        : surface_(s), center_(center), radius_(radius), amplitude_(amplitude) {
        if (!(radius > 0.0)) throw std::invalid_argument("test form radius must be positive");
        if (radius >= s.injectivity_radius())
            throw std::invalid_argument("test form radius exceeds the injectivity radius");
    }

    const Surface& surface() const { return surface_; }
    const SurfacePoint& center() const { return center_; }
    double radius() const { return radius_; }
    double amplitude() const { return amplitude_; }

    double value(const SurfacePoint& x) const {
        return amplitude_ * BumpProfile::value(geodesic_distance(surface_, center_, x), radius_);
    }

    /// (d phi)_x applied to a tangent vector at x.
    double dphi(const TangentVector& w) const {
        double r = geodesic_distance(surface_, center_, w.base);
        if (r >= radius_ || r == 0.0) return 0.0;
        TangentVector rad = radial_unit(surface_, center_, w.base);
        return amplitude_ * BumpProfile::deriv(r, radius_) * inner(surface_, rad, w);
    }

    /// Riemannian gradient (the sharp of d phi).
    TangentVector grad(const SurfacePoint& x) const {
        double r = geodesic_distance(surface_, center_, x);
        if (r >= radius_ || r == 0.0) return zero_tangent(x);
        TangentVector rad = radial_unit(surface_, center_, x);
        return {x, rad.v * (amplitude_ * BumpProfile::deriv(r, radius_))};
    }

    /// Laplace-Beltrami of phi (analyst's sign: d^2/dx^2 on the plane).
    double laplacian(const SurfacePoint& x) const {
        double r = geodesic_distance(surface_, center_, x);
        if (r >= radius_) return 0.0;
        double b2 = BumpProfile::second(r, radius_);
        double bor = BumpProfile::deriv_over_r(r, radius_);
        if (surface_.kind() == SurfaceKind::Sphere)
            return amplitude_ * (b2 + bor * detail::t_cot_t(r / surface_.radius()));
        return amplitude_ * (b2 + bor);
    }

    /// integral of phi dVol over the support, by radial quadrature.
    double integral(int panels = 8, int per_panel = 12) const;

  private:
    Surface surface_;
    SurfacePoint center_;
    double radius_;
    double amplitude_;
};

/// Compactly supported 1-form phi = b(d(c, x)) * w(x)^flat for a smooth
/// vector field w with exact evaluation.
class OneFormTestForm {
  public:
    using Field = std::function<TangentVector(const SurfacePoint&)>;

    OneFormTestForm(const Surface& s, const SurfacePoint& center, double radius, Field w)
        : surface_(s), center_(center), radius_(radius), w_(std::move(w)) {}

    /// phi_x(v) for a tangent vector v at x.
    double apply(const TangentVector& v) const {
        double b = BumpProfile::value(geodesic_distance(surface_, center_, v.base), radius_);
        if (b == 0.0) return 0.0;
        return b * inner(surface_, w_(v.base), v);
    }

    const Surface& surface() const { return surface_; }

  private:
    Surface surface_;
    SurfacePoint center_;
    double radius_;
    Field w_;
};

/// Shrinking-radius sequence for the eps -> 0 limits.
struct EpsilonSchedule {
    double eps0 = 0.05;
    double ratio = 0.5;
    int count = 6;

    void validate() const {
        if (!(eps0 > 0.0)) throw std::invalid_argument("epsilon schedule: eps0 must be positive");
        if (!(ratio > 0.0 && ratio < 1.0))
            throw std::invalid_argument("epsilon schedule: ratio must lie in (0,1)");
        if (count < 3) throw std::invalid_argument("epsilon schedule: need at least 3 radii");
    }

    std::vector<double> radii() const {
        validate();
        std::vector<double> r(count);
        double e = eps0;
        for (int i = 0; i < count; ++i) {
            r[i] = e;
            e *= ratio;
        }
        return r;
    }

    double min_radius() const { return eps0 * std::pow(ratio, count - 1); }
};

}  // namespace pvx

#include "pvx/quadrature.hpp"

namespace pvx {

inline double ScalarTestForm::integral(int panels, int per_panel) const {
    LineRule rule = composite_gauss(uniform_breaks(0.0, radius_, panels), per_panel);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double r = rule.nodes[i];
        double jac = (surface_.kind() == SurfaceKind::Sphere)
                         ? surface_.radius() * std::sin(r / surface_.radius())
                         : r;
        acc += rule.weights[i] * BumpProfile::value(r, radius_) * jac;
    }
    return 2.0 * kPi * amplitude_ * acc;
}

}  // namespace pvx
