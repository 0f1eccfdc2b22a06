#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "pvx/geometry.hpp"

namespace pvx {

enum class BackgroundLabel { Zero, LinearShear, RigidRotationSphere, IrrotationalCustom };

/// A classical, divergence-free background velocity field together with
/// whatever extra structure the catalog entry carries: a stream function
/// when the field is Hamiltonian, the steady pressure, and the scalar curl.
class BackgroundField {
  public:
    using Velocity = std::function<TangentVector(double, const SurfacePoint&)>;
    using Scalar = std::function<double(double, const SurfacePoint&)>;

    BackgroundLabel label() const { return label_; }
    bool autonomous() const { return autonomous_; }
    bool has_stream() const { return static_cast<bool>(stream_); }

    TangentVector velocity(double t, const SurfacePoint& q) const { return velocity_(t, q); }
    double stream(double t, const SurfacePoint& q) const {
        if (!stream_) throw std::logic_error("background field has no stream function");
        return stream_(t, q);
    }
    double pressure(double t, const SurfacePoint& q) const {
        return pressure_ ? pressure_(t, q) : 0.0;
    }
    double curl(double t, const SurfacePoint& q) const { return curl_ ? curl_(t, q) : 0.0; }

    /// Quiescent background; valid on every surface.
    static BackgroundField zero(const Surface& s) {
        BackgroundField bg;
        bg.label_ = BackgroundLabel::Zero;
        bg.velocity_ = [](double, const SurfacePoint& q) { return zero_tangent(q); };
        bg.stream_ = [](double, const SurfacePoint&) { return 0.0; };
        bg.pressure_ = [](double, const SurfacePoint&) { return 0.0; };
        bg.curl_ = [](double, const SurfacePoint&) { return 0.0; };
        (void)s;
        return bg;
    }

    /// Plane linear shear X = (c y, 0), a steady Euler flow with constant
    /// pressure. Stream psi = c y^2 / 2 under the convention
    /// X = -J grad psi; curl X = -c.
    static BackgroundField linear_shear(const Surface& s, double c) {
        if (s.kind() != SurfaceKind::Plane)
            throw std::invalid_argument("linear shear background requires the plane");
        BackgroundField bg;
        bg.label_ = BackgroundLabel::LinearShear;
        bg.velocity_ = [c](double, const SurfacePoint& q) {
            return TangentVector{q, Vec3{c * q.r.y, 0.0, 0.0}};
        };
        bg.stream_ = [c](double, const SurfacePoint& q) { return 0.5 * c * q.r.y * q.r.y; };
        bg.pressure_ = [](double, const SurfacePoint&) { return 0.0; };
        bg.curl_ = [c](double, const SurfacePoint&) { return -c; };
        return bg;
    }

    /// Rigid rotation of the sphere about the z-axis with angular rate
    /// omega0: a steady Euler flow (Killing field) with P = |X|^2 / 2.
    /// Stream psi = omega0 R^2 z, curl = 2 omega0 z.
    static BackgroundField rigid_rotation(const Surface& s, double omega0) {
        if (s.kind() != SurfaceKind::Sphere)
            throw std::invalid_argument("rigid rotation background requires the sphere");
        const double R = s.radius();
        BackgroundField bg;
        bg.label_ = BackgroundLabel::RigidRotationSphere;
        bg.velocity_ = [omega0](double, const SurfacePoint& q) {
            return TangentVector{q, cross(Vec3{0, 0, omega0}, q.r)};
        };
        bg.stream_ = [omega0, R](double, const SurfacePoint& q) { return omega0 * R * R * q.r.z; };
        bg.pressure_ = [omega0, R](double, const SurfacePoint& q) {
            Vec3 v = cross(Vec3{0, 0, omega0}, q.r);
            return 0.5 * R * R * dot(v, v);
        };
        bg.curl_ = [omega0](double, const SurfacePoint& q) { return 2.0 * omega0 * q.r.z; };
        return bg;
    }

    /// Uniform translation (plane or torus): irrotational, steady,
    /// pressure -|X|^2/2 (constant). On the torus the stream function is
    /// not single-valued, so none is exposed.
    static BackgroundField uniform_flow(const Surface& s, double ux, double uy) {
        if (s.kind() == SurfaceKind::Sphere)
            throw std::invalid_argument("uniform flow background requires a flat surface");
        BackgroundField bg;
        bg.label_ = BackgroundLabel::IrrotationalCustom;
        bg.velocity_ = [ux, uy](double, const SurfacePoint& q) {
            return TangentVector{q, Vec3{ux, uy, 0.0}};
        };
        if (s.kind() == SurfaceKind::Plane) {
            bg.stream_ = [ux, uy](double, const SurfacePoint& q) {
                return ux * q.r.y - uy * q.r.x;
            };
        }
        bg.pressure_ = [ux, uy](double, const SurfacePoint&) {
            return -0.5 * (ux * ux + uy * uy);
        };
        bg.curl_ = [](double, const SurfacePoint&) { return 0.0; };
        return bg;
    }

    /// Plane strain flow X = grad(k (x^2 - y^2)/2) = (k x, -k y):
    /// irrotational, steady, Bernoulli pressure -|X|^2/2, stream k x y.
    static BackgroundField plane_strain(const Surface& s, double k) {
        if (s.kind() != SurfaceKind::Plane)
            throw std::invalid_argument("plane strain background requires the plane");
        BackgroundField bg;
        bg.label_ = BackgroundLabel::IrrotationalCustom;
        bg.velocity_ = [k](double, const SurfacePoint& q) {
            return TangentVector{q, Vec3{k * q.r.x, -k * q.r.y, 0.0}};
        };
        bg.stream_ = [k](double, const SurfacePoint& q) { return k * q.r.x * q.r.y; };
        bg.pressure_ = [k](double, const SurfacePoint& q) {
            return -0.5 * k * k * (q.r.x * q.r.x + q.r.y * q.r.y);
        };
        bg.curl_ = [](double, const SurfacePoint&) { return 0.0; };
        return bg;
    }

  private:
    BackgroundLabel label_ = BackgroundLabel::Zero;
    bool autonomous_ = true;
    Velocity velocity_;
    Scalar stream_;
    Scalar pressure_;
    Scalar curl_;
};

}  // namespace pvx
