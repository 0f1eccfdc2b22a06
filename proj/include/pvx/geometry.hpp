#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pvx/errors.hpp"

namespace pvx {

inline constexpr double kPi = std::numbers::pi;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_ = 0.0) : x(x_), y(y_), z(z_) {}

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }
inline bool finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

enum class SurfaceKind { Plane, Sphere, FlatTorus };

/// A point on the surface. Plane and torus store chart coordinates in
/// (x, y) with z = 0; torus coordinates are kept reduced to [0,L1)x[0,L2).
/// Sphere points live on the unit sphere of radius 1 regardless of the
/// physical radius, which enters only through the metric.
struct SurfacePoint {
    Vec3 r;
};

/// Tangent vector attached to a base point. For the sphere the components
/// are a 3-vector orthogonal to the base point (unit-sphere coordinates);
/// for flat surfaces a 2-vector in the chart with z = 0.
struct TangentVector {
    SurfacePoint base;
    Vec3 v;
};

/// Surface catalog: plane, round sphere, flat rectangular torus.
class Surface {
  public:
    static Surface plane() { return Surface(SurfaceKind::Plane, 0.0, 0.0, 0.0); }

    static Surface sphere(double radius) {
        if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
        return Surface(SurfaceKind::Sphere, radius, 0.0, 0.0);
    }

    static Surface flat_torus(double l1, double l2) {
        if (!(l1 > 0.0) || !(l2 > 0.0)) throw std::invalid_argument("torus periods must be positive");
        return Surface(SurfaceKind::FlatTorus, 0.0, l1, l2);
    }

    SurfaceKind kind() const { return kind_; }
    bool closed() const { return kind_ != SurfaceKind::Plane; }

    double radius() const { return radius_; }
    double period1() const { return l1_; }
    double period2() const { return l2_; }

    double area() const {
        switch (kind_) {
            case SurfaceKind::Plane: return std::numeric_limits<double>::infinity();
            case SurfaceKind::Sphere: return 4.0 * kPi * radius_ * radius_;
            case SurfaceKind::FlatTorus: return l1_ * l2_;
        }
        return 0.0;
    }

    /// Geodesic diameter, used to scale collision thresholds. The plane has
    /// no diameter; unit scale by convention.
    double length_scale() const {
        switch (kind_) {
            case SurfaceKind::Plane: return 1.0;
            case SurfaceKind::Sphere: return kPi * radius_;
            case SurfaceKind::FlatTorus: return 0.5 * std::hypot(l1_, l2_);
        }
        return 1.0;
    }

    /// Largest radius for which geodesic polar coordinates around any point
    /// stay injective (plane: unbounded).
    double injectivity_radius() const {
        switch (kind_) {
            case SurfaceKind::Plane: return std::numeric_limits<double>::infinity();
            case SurfaceKind::Sphere: return kPi * radius_;
            case SurfaceKind::FlatTorus: return 0.5 * std::min(l1_, l2_);
        }
        return 0.0;
    }

    bool operator==(const Surface& o) const {
        return kind_ == o.kind_ && radius_ == o.radius_ && l1_ == o.l1_ && l2_ == o.l2_;
    }

  private:
    Surface(SurfaceKind k, double radius, double l1, double l2)
        : kind_(k), radius_(radius), l1_(l1), l2_(l2) {}

    SurfaceKind kind_;
    double radius_;
    double l1_, l2_;
};

namespace detail {
inline double wrap(double x, double period) {
    double w = std::fmod(x, period);
    if (w < 0.0) w += period;
    // fmod can return exactly `period` after the correction when x is a
    // tiny negative number.
    if (w >= period) w -= period;
    return w;
}
/// Reduce to the symmetric interval (-period/2, period/2].
inline double wrap_centered(double x, double period) {
    double w = wrap(x, period);
    if (w > 0.5 * period) w -= period;
    return w;
}
}  // namespace detail

/// Canonical point constructor: reduces torus coordinates, renormalizes
/// sphere coordinates.
inline SurfacePoint make_point(const Surface& s, const Vec3& r) {
    switch (s.kind()) {
        case SurfaceKind::Plane: return {Vec3{r.x, r.y, 0.0}};
        case SurfaceKind::Sphere: {
            double n = norm(r);
            if (!(n > 0.0)) throw std::invalid_argument("sphere point cannot be the zero vector");
            return {r / n};
        }
        case SurfaceKind::FlatTorus:
            return {Vec3{detail::wrap(r.x, s.period1()), detail::wrap(r.y, s.period2()), 0.0}};
    }
    return {r};
}

inline SurfacePoint make_point(const Surface& s, double x, double y, double z = 0.0) {
    return make_point(s, Vec3{x, y, z});
}

inline bool valid_point(const Surface& s, const SurfacePoint& p, double tol = 1e-12) {
    if (!finite(p.r)) return false;
    switch (s.kind()) {
        case SurfaceKind::Plane: return p.r.z == 0.0;
        case SurfaceKind::Sphere: return std::abs(norm(p.r) - 1.0) <= tol;
        case SurfaceKind::FlatTorus:
            return p.r.z == 0.0 && p.r.x >= 0.0 && p.r.x < s.period1() && p.r.y >= 0.0 &&
                   p.r.y < s.period2();
    }
    return false;
}

inline TangentVector make_tangent(const Surface& s, const SurfacePoint& p, const Vec3& v) {
    if (s.kind() == SurfaceKind::Sphere) {
        // Project out any radial component; callers assembling tangents from
        // ambient data stay exactly tangent.
        Vec3 t = v - p.r * dot(v, p.r);
        return {p, t};
    }
    return {p, Vec3{v.x, v.y, 0.0}};
}

inline TangentVector zero_tangent(const SurfacePoint& p) { return {p, Vec3{}}; }

/// Geodesic distance. On the torus the minimum is taken over the 3x3 block
/// of lattice translates, which is exact for reduced coordinates.
inline double geodesic_distance(const Surface& s, const SurfacePoint& p, const SurfacePoint& q) {
    switch (s.kind()) {
        case SurfaceKind::Plane:
            return std::hypot(p.r.x - q.r.x, p.r.y - q.r.y);
        case SurfaceKind::Sphere: {
            double c = dot(p.r, q.r);
            double sn = norm(cross(p.r, q.r));
            return s.radius() * std::atan2(sn, c);
        }
        case SurfaceKind::FlatTorus: {
            double best = std::numeric_limits<double>::infinity();
            double dx0 = p.r.x - q.r.x, dy0 = p.r.y - q.r.y;
            for (int i = -1; i <= 1; ++i)
                for (int j = -1; j <= 1; ++j) {
                    double dx = dx0 + i * s.period1();
                    double dy = dy0 + j * s.period2();
                    best = std::min(best, dx * dx + dy * dy);
                }
            return std::sqrt(best);
        }
    }
    return 0.0;
}

/// Difference vector realizing the shortest representative: for flat
/// surfaces the displacement q -> p as a tangent vector at q; on the sphere
/// the initial velocity (scaled to chart units) of the geodesic from q to p.
inline Vec3 shortest_displacement(const Surface& s, const SurfacePoint& q, const SurfacePoint& p) {
    switch (s.kind()) {
        case SurfaceKind::Plane:
            return p.r - q.r;
        case SurfaceKind::FlatTorus:
            return {detail::wrap_centered(p.r.x - q.r.x, s.period1()),
                    detail::wrap_centered(p.r.y - q.r.y, s.period2()), 0.0};
        case SurfaceKind::Sphere: {
            Vec3 t = p.r - q.r * dot(p.r, q.r);
            double tn = norm(t);
            if (tn == 0.0) return {};
            double ang = std::atan2(tn, dot(p.r, q.r));
            return t * (ang / tn);
        }
    }
    return {};
}

inline double inner(const Surface& s, const TangentVector& v, const TangentVector& w) {
    double d = dot(v.v, w.v);
    if (s.kind() == SurfaceKind::Sphere) d *= s.radius() * s.radius();
    return d;
}

inline double norm(const Surface& s, const TangentVector& v) {
    return std::sqrt(inner(s, v, v));
}

/// The complex structure J: rotation by +pi/2 in the surface orientation.
/// Flat charts: (a, b) -> (-b, a). Sphere: cross product with the outward
/// normal.
inline TangentVector rotate_j(const Surface& s, const TangentVector& t) {
    if (s.kind() == SurfaceKind::Sphere) return {t.base, cross(t.base.r, t.v)};
    return {t.base, Vec3{-t.v.y, t.v.x, 0.0}};
}

/// First-order retraction used by the integrators: flat surfaces step
/// exactly, the sphere steps in the ambient space and renormalizes.
inline SurfacePoint retract(const Surface& s, const SurfacePoint& p, const Vec3& v, double h) {
    switch (s.kind()) {
        case SurfaceKind::Plane:
            return {p.r + v * h};
        case SurfaceKind::FlatTorus:
            return make_point(s, p.r + v * h);
        case SurfaceKind::Sphere:
            return {normalized(p.r + v * h)};
    }
    return p;
}

inline SurfacePoint retract(const Surface& s, const TangentVector& t, double h) {
    return retract(s, t.base, t.v, h);
}

/// Exact geodesic step (exponential map). `v` is a tangent vector at p and
/// the step travels geodesic distance h * |v|_g.
inline SurfacePoint geodesic_step(const Surface& s, const SurfacePoint& p, const Vec3& v, double h) {
    switch (s.kind()) {
        case SurfaceKind::Plane:
        case SurfaceKind::FlatTorus:
            return retract(s, p, v, h);
        case SurfaceKind::Sphere: {
            // Chart speed |v| equals angular speed on the unit sphere.
            double vn = norm(v);
            if (vn == 0.0 || h == 0.0) return p;
            double a = h * vn;
            return {p.r * std::cos(a) + (v / vn) * std::sin(a)};
        }
    }
    return p;
}

/// Euclidean-orthonormal frame of the chart tangent space (unit-sphere
/// coordinates on the sphere); g-orthogonal on every surface.
struct ChartFrame {
    Vec3 u1, u2;
};

inline ChartFrame chart_frame(const Surface& s, const SurfacePoint& p) {
    if (s.kind() != SurfaceKind::Sphere) return {Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    // Any stable completion of p.r to an orthonormal triple.
    Vec3 a = std::abs(p.r.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 u1 = normalized(a - p.r * dot(a, p.r));
    Vec3 u2 = cross(p.r, u1);
    return {u1, u2};
}

/// Point at geodesic polar coordinates (rho, theta) around c in the frame f.
/// rho is geodesic distance; on the torus rho must stay below the
/// injectivity radius for the coordinates to be injective (not enforced
/// here).
inline SurfacePoint polar_point(const Surface& s, const SurfacePoint& c, const ChartFrame& f,
                                double rho, double theta) {
    Vec3 w = f.u1 * std::cos(theta) + f.u2 * std::sin(theta);
    if (s.kind() == SurfaceKind::Sphere) {
        double a = rho / s.radius();
        return {c.r * std::cos(a) + w * std::sin(a)};
    }
    return make_point(s, c.r + w * rho);
}

/// Unit (g-norm 1) radial vector at x pointing away from c. Undefined at
/// x = c and on the cut locus of c.
inline TangentVector radial_unit(const Surface& s, const SurfacePoint& c, const SurfacePoint& x) {
    switch (s.kind()) {
        case SurfaceKind::Plane: {
            Vec3 d = x.r - c.r;
            return {x, d / norm(d)};
        }
        case SurfaceKind::FlatTorus: {
            Vec3 d = {detail::wrap_centered(x.r.x - c.r.x, s.period1()),
                      detail::wrap_centered(x.r.y - c.r.y, s.period2()), 0.0};
            return {x, d / norm(d)};
        }
        case SurfaceKind::Sphere: {
            double ca = dot(c.r, x.r);
            Vec3 t = x.r * ca - c.r;
            double tn = norm(t);
            // g-unit means chart norm 1/R.
            return {x, t * (1.0 / (tn * s.radius()))};
        }
    }
    return {x, Vec3{}};
}

}  // namespace pvx
