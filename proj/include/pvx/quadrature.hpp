#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "pvx/geometry.hpp"

namespace pvx {

/// Gauss-Legendre rule on [-1, 1], nodes by Newton iteration on the
/// Legendre recurrence. Accurate to machine precision for n <= 64.
struct GaussRule {
    std::vector<double> nodes, weights;
};

inline GaussRule gauss_legendre(int n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

/// Composite Gauss rule on [a, b] from ordered breakpoints.
struct LineRule {
    std::vector<double> nodes, weights;
};

inline LineRule composite_gauss(const std::vector<double>& breaks, int per_panel) {
    static thread_local GaussRule cache;
    if ((int)cache.nodes.size() != per_panel) cache = gauss_legendre(per_panel);
    LineRule rule;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        double a = breaks[p], b = breaks[p + 1];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < per_panel; ++i) {
            rule.nodes.push_back(mid + half * cache.nodes[i]);
            rule.weights.push_back(half * cache.weights[i]);
        }
    }
    return rule;
}

inline std::vector<double> uniform_breaks(double a, double b, int panels) {
    std::vector<double> br(panels + 1);
    for (int i = 0; i <= panels; ++i) br[i] = a + (b - a) * i / panels;
    return br;
}

/// Breakpoints geometrically graded toward a = 0, for integrands with a
/// logarithmic singularity at the origin.
inline std::vector<double> graded_breaks(double b, int levels, double ratio = 0.5) {
    std::vector<double> br;
    br.push_back(0.0);
    double x = b * std::pow(ratio, levels - 1);
    for (int i = 0; i < levels; ++i) {
        br.push_back(x);
        x /= ratio;
    }
    br.back() = b;
    return br;
}

/// Node of a trapezoid rule on the geodesic circle of radius eps around a
/// center: the point, the curve velocity dx/dtheta (chart components), and
/// the outward g-unit radial vector.
struct CircleNode {
    SurfacePoint x;
    Vec3 dx_dtheta;
    Vec3 radial;  // g-norm 1, chart components
};

inline std::vector<CircleNode> geodesic_circle(const Surface& s, const SurfacePoint& c,
                                               const ChartFrame& f, double eps, int n) {
    std::vector<CircleNode> nodes;
    nodes.reserve(n);
    const bool sph = s.kind() == SurfaceKind::Sphere;
    const double a = sph ? eps / s.radius() : 0.0;
    const double ca = std::cos(a), sa = std::sin(a);
    for (int i = 0; i < n; ++i) {
        double th = 2.0 * kPi * i / n;
        Vec3 w = f.u1 * std::cos(th) + f.u2 * std::sin(th);
        Vec3 wp = f.u2 * std::cos(th) - f.u1 * std::sin(th);  // dw/dtheta
        CircleNode node;
        if (sph) {
            node.x = {c.r * ca + w * sa};
            node.dx_dtheta = wp * sa;
            node.radial = (w * ca - c.r * sa) * (1.0 / s.radius());
        } else {
            node.x = make_point(s, c.r + w * eps);
            node.dx_dtheta = wp * eps;
            node.radial = w;
        }
        nodes.push_back(node);
    }
    return nodes;
}

/// Trapezoid sum of f over the circle: integral of f dtheta.
template <class F>
double circle_integral(const std::vector<CircleNode>& nodes, F&& f) {
    double acc = 0.0;
    for (const auto& n : nodes) acc += f(n);
    return acc * (2.0 * kPi / nodes.size());
}

/// Quadrature node on a geodesic disc, weight includes the area element.
struct DiscNode {
    SurfacePoint x;
    double rho;
    double w;
};

/// Tensor polar rule over the geodesic disc of radius `radius` around c.
/// `graded` grades the radial mesh into rho = 0 (log-singular integrands).
inline std::vector<DiscNode> geodesic_disc(const Surface& s, const SurfacePoint& c,
                                           const ChartFrame& f, double radius, bool graded,
                                           int radial_panels = 12, int per_panel = 10,
                                           int n_theta = 96) {
    std::vector<double> br = graded ? graded_breaks(radius, std::max(radial_panels, 20))
                                    : uniform_breaks(0.0, radius, radial_panels);
    LineRule rad = composite_gauss(br, per_panel);
    std::vector<DiscNode> nodes;
    nodes.reserve(rad.nodes.size() * n_theta);
    const double dth = 2.0 * kPi / n_theta;
    for (std::size_t i = 0; i < rad.nodes.size(); ++i) {
        double rho = rad.nodes[i];
        double jac = (s.kind() == SurfaceKind::Sphere)
                         ? s.radius() * std::sin(rho / s.radius())
                         : rho;
        double wr = rad.weights[i] * jac * dth;
        for (int j = 0; j < n_theta; ++j) {
            double th = dth * j;
            nodes.push_back({polar_point(s, c, f, rho, th), rho, wr});
        }
    }
    return nodes;
}

/// Neville extrapolation of f(eps) to eps = 0 from samples at decreasing
/// eps. Returns the extrapolated value and a conservative error estimate
/// (spread of the last diagonal entries).
struct Extrapolation {
    double value = 0.0;
    double error_estimate = 0.0;
    bool converged = false;
    std::vector<double> eps;
    std::vector<double> raw;
};

inline Extrapolation extrapolate_to_zero(const std::vector<double>& eps,
                                         const std::vector<double>& f) {
    Extrapolation out;
    out.eps = eps;
    out.raw = f;
    const std::size_t n = eps.size();
    if (n == 0) return out;
    std::vector<double> t = f;
    double prev = t[0];
    for (std::size_t j = 1; j < n; ++j) {
        for (std::size_t i = 0; i + j < n; ++i) {
            double denom = eps[i] - eps[i + j];
            t[i] = t[i + 1] + (t[i + 1] - t[i]) * eps[i + j] / denom;
        }
        if (j == n - 1) out.error_estimate = std::abs(t[0] - prev);
        prev = t[0];
    }
    out.value = t[0];
    if (n == 1) {
        out.value = f[0];
        out.error_estimate = std::abs(f[0]);
    }
    // Converged when the tableau settled relative to the raw sequence scale.
    double scale = 0.0;
    for (double v : f) scale = std::max(scale, std::abs(v));
    out.converged = out.error_estimate <= 1e-5 * std::max(scale, 1.0) + 1e-12;
    return out;
}

/// Least-squares slope of log|err| against log(eps); entries below the
/// noise floor are dropped.
inline double loglog_slope(const std::vector<double>& eps, const std::vector<double>& err,
                           double floor = 1e-13) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(err[i] > floor)) continue;
        double lx = std::log(eps[i]), ly = std::log(err[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    if (m < 2) return 0.0;
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace pvx
