#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pvx/background.hpp"
#include "pvx/errors.hpp"
#include "pvx/geometry.hpp"
#include "pvx/greens.hpp"

namespace pvx {

struct Vortex {
    SurfacePoint pos;
    double strength = 0.0;
};

/// Configuration of N point vortices. `validate` enforces the invariants
/// required by the dynamics (N >= 1, nonzero strengths, pairwise distinct
/// positions); diagnostic field evaluations tolerate an empty list.
struct VortexState {
    std::vector<Vortex> vortices;

    std::size_t size() const { return vortices.size(); }

    double total_strength() const {
        double s = 0.0;
        for (const auto& v : vortices) s += v.strength;
        return s;
    }

    double min_pair_distance(const Surface& s) const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < vortices.size(); ++i)
            for (std::size_t j = i + 1; j < vortices.size(); ++j)
                best = std::min(best, geodesic_distance(s, vortices[i].pos, vortices[j].pos));
        return best;
    }

    void validate(const Surface& s, double collision_threshold) const {
        if (vortices.empty())
            throw SingularConfigurationError("vortex state must contain at least one vortex");
        for (const auto& v : vortices) {
            if (v.strength == 0.0)
                throw SingularConfigurationError("vortex strengths must be nonzero");
            if (!valid_point(s, v.pos)) throw SingularConfigurationError("invalid vortex position");
        }
        if (vortices.size() > 1 && min_pair_distance(s) <= collision_threshold)
            throw SingularConfigurationError("vortex configuration below collision threshold");
    }
};

/// Pressure-model growth rates (beta_X, beta_omega).
struct GrowthRate {
    double beta_x = 1.0;
    double beta_omega = 1.0;
};

inline double default_collision_threshold(const Surface& s) { return 1e-6 * s.length_scale(); }

/// Velocity of the relative (vortex-induced) field at a point off the
/// singular set: u_sharp(q) = -J (sum_n Gamma_n grad_y G(q_n, q))^sharp.
inline TangentVector induced_velocity(const Surface& s, const GreenKernel& k,
                                      const VortexState& st, const SurfacePoint& q,
                                      double singular_radius = 0.0) {
    Vec3 acc{};
    for (const auto& v : st.vortices) {
        if (singular_radius > 0.0 && geodesic_distance(s, v.pos, q) < singular_radius)
            throw SingularEvaluationError("field evaluation at a vortex position");
        acc += k.grad_y(v.pos, q).v * v.strength;
    }
    return rotate_j(s, TangentVector{q, -acc});
}

namespace detail {
inline TangentVector regularized_velocity_unchecked(std::size_t n, const VortexState& st,
                                                    const GreenKernel& k) {
    const SurfacePoint& qn = st.vortices[n].pos;
    Vec3 acc = k.robin_grad(qn).v * st.vortices[n].strength;
    for (std::size_t m = 0; m < st.size(); ++m) {
        if (m == n) continue;
        acc += k.grad_y(st.vortices[m].pos, qn).v * st.vortices[m].strength;
    }
    return rotate_j(k.surface(), TangentVector{qn, -acc});
}
}  // namespace detail

/// Regularized velocity of the n-th vortex: the full field with the n-th
/// log singularity removed through the Robin function,
///   v_n = -J ( sum_{m != n} Gamma_m grad_y G(q_m, q_n)
///              + Gamma_n grad R(q_n) )^sharp.
inline TangentVector regularized_velocity(std::size_t n, const VortexState& st,
                                          const GreenKernel& k,
                                          double collision_threshold = -1.0) {
    const Surface& s = k.surface();
    if (collision_threshold < 0.0) collision_threshold = default_collision_threshold(s);
    st.validate(s, collision_threshold);
    if (n >= st.size()) throw std::out_of_range("vortex index out of range");
    return detail::regularized_velocity_unchecked(n, st, k);
}

/// Right-hand side of the point vortex equation
///   dq_n/dt = beta_X X_t(q_n) + beta_omega v_n(q_n).
inline std::vector<TangentVector> pv_rhs(double t, const VortexState& st,
                                         const BackgroundField& bg, const GrowthRate& beta,
                                         const GreenKernel& k,
                                         double collision_threshold = -1.0) {
    const Surface& s = k.surface();
    if (collision_threshold < 0.0) collision_threshold = default_collision_threshold(s);
    st.validate(s, collision_threshold);
    std::vector<TangentVector> out;
    out.reserve(st.size());
    for (std::size_t n = 0; n < st.size(); ++n) {
        Vec3 dq{};
        if (beta.beta_x != 0.0) dq += bg.velocity(t, st.vortices[n].pos).v * beta.beta_x;
        if (beta.beta_omega != 0.0)
            dq += detail::regularized_velocity_unchecked(n, st, k).v * beta.beta_omega;
        out.push_back({st.vortices[n].pos, dq});
    }
    return out;
}

/// Full velocity field X + u_sharp off the singular set.
inline TangentVector field_velocity(double t, const SurfacePoint& q, const VortexState& st,
                                    const BackgroundField& bg, const GreenKernel& k) {
    const Surface& s = k.surface();
    TangentVector u = induced_velocity(s, k, st, q, 1e-10 * s.length_scale());
    return {q, bg.velocity(t, q).v + u.v};
}

/// Pressure of the decomposed flow off the singular set:
///   p = P + (2 beta_X - 1) g(X, u) + (2 beta_omega - 1) |u|^2 / 2.
inline double pressure_field(double t, const SurfacePoint& q, const VortexState& st,
                             const BackgroundField& bg, const GrowthRate& beta,
                             const GreenKernel& k) {
    const Surface& s = k.surface();
    TangentVector u = induced_velocity(s, k, st, q, 1e-10 * s.length_scale());
    TangentVector X = bg.velocity(t, q);
    return bg.pressure(t, q) + (2.0 * beta.beta_x - 1.0) * inner(s, X, u) +
           (2.0 * beta.beta_omega - 1.0) * 0.5 * inner(s, u, u);
}

/// Hamiltonian of the point vortex equation for autonomous backgrounds
/// with a stream function:
///   H = beta_omega [ sum_{n<m} G_n G_m G(q_n, q_m) + 1/2 sum_n G_n^2 R(q_n) ]
///     + beta_X sum_n Gamma_n psi_X(q_n).
inline double hamiltonian(double t, const VortexState& st, const BackgroundField& bg,
                          const GrowthRate& beta, const GreenKernel& k) {
    if (!bg.autonomous() || !bg.has_stream())
        throw std::logic_error("no Hamiltonian available: background must be autonomous "
                               "with a stream function");
    double h = 0.0;
    for (std::size_t n = 0; n < st.size(); ++n) {
        for (std::size_t m = n + 1; m < st.size(); ++m)
            h += beta.beta_omega * st.vortices[n].strength * st.vortices[m].strength *
                 k.value(st.vortices[n].pos, st.vortices[m].pos);
        h += beta.beta_omega * 0.5 * st.vortices[n].strength * st.vortices[n].strength *
             k.robin(st.vortices[n].pos);
        h += beta.beta_x * st.vortices[n].strength * bg.stream(t, st.vortices[n].pos);
    }
    return h;
}

/// First integrals used as test oracles: plane linear/angular impulse,
/// sphere moment vector, torus strength-weighted coordinates.
struct Moments {
    Vec3 linear{};     // plane: sum G q; sphere: sum G x (3-vector); torus: sum G q mod periods
    double angular = 0.0;  // plane only: sum G |q|^2
};

inline Moments conserved_moments(const VortexState& st, const Surface& s) {
    Moments m;
    for (const auto& v : st.vortices) {
        m.linear += v.pos.r * v.strength;
        if (s.kind() == SurfaceKind::Plane) m.angular += v.strength * dot(v.pos.r, v.pos.r);
    }
    if (s.kind() == SurfaceKind::FlatTorus) {
        m.linear.x = detail::wrap(m.linear.x, s.period1());
        m.linear.y = detail::wrap(m.linear.y, s.period2());
    }
    return m;
}

/// Merger threshold for two identical vortices of strength gamma in a
/// linear shear of rate c started at separation xi0:
///   mu' = c beta_X xi0^2 / (gamma beta_omega),
/// merger (separation shrinking below xi0) iff mu' < 0.
inline double merger_threshold(double c, double gamma, double xi0, const GrowthRate& beta) {
    double denom = gamma * beta.beta_omega;
    if (denom == 0.0)
        throw std::domain_error("merger threshold undefined: gamma * beta_omega = 0");
    return c * beta.beta_x * xi0 * xi0 / denom;
}

}  // namespace pvx
