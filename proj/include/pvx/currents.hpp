#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvx/dynamics.hpp"
#include "pvx/geometry.hpp"
#include "pvx/greens.hpp"
#include "pvx/integrate.hpp"
#include "pvx/quadrature.hpp"
#include "pvx/testform.hpp"

namespace pvx {

/// Node-count policy for shrinking-circle quadrature: the periodic
/// trapezoid rule is spectrally accurate, with node count growing as the
/// radius shrinks because the singular factors vary on scale eps.
struct CirclePolicy {
    int min_nodes = 64;
    double node_scale = 0.1;
    int nodes_for(double eps) const {
        return std::max(min_nodes, (int)std::ceil(node_scale / eps));
    }
};

/// Point evaluation 1-current: chi_p v [phi] = phi_p(v_p).
template <class VField>
double chi_direct(const VField& v, const SurfacePoint& p, const OneFormTestForm& phi) {
    return phi.apply(v(p));
}

/// Mean-value characterization of chi: the limit over shrinking geodesic
/// circles of (1/pi) g(v, J grad log d(p, .)) phi, extrapolated from the
/// epsilon schedule. Agrees with chi_direct for smooth fields; the defect
/// at fixed eps is O(eps).
template <class VField>
Extrapolation chi_circle(const Surface& s, const VField& v, const SurfacePoint& p,
                         const OneFormTestForm& phi, const EpsilonSchedule& sched,
                         const CirclePolicy& pol = {}) {
    std::vector<double> radii = sched.radii();
    if (radii.front() >= 0.9 * s.injectivity_radius())
        throw std::invalid_argument("epsilon schedule exceeds the injectivity radius");
    ChartFrame f = chart_frame(s, p);
    std::vector<double> vals;
    vals.reserve(radii.size());
    for (double eps : radii) {
        auto nodes = geodesic_circle(s, p, f, eps, pol.nodes_for(eps));
        double val = circle_integral(nodes, [&](const CircleNode& n) {
            TangentVector vx = v(n.x);
            TangentVector jrad = rotate_j(s, TangentVector{n.x, n.radial});
            double gfac = inner(s, vx, jrad) / eps;  // g(v, J grad log d)
            return gfac * phi.apply(TangentVector{n.x, n.dx_dtheta});
        });
        vals.push_back(val / kPi);
    }
    return extrapolate_to_zero(radii, vals);
}

/// Density of a 1-current of class C^r with finite singular support.
/// Either the sharp of the density 1-form is given directly, or the
/// current is an exact differential d(potential) known through its scalar
/// potential off the singular set. `dvol` is the density of dT away from
/// the singular support (the uniform compensation part for the vortex
/// velocity current); null means closed.
struct CurrentDensity {
    std::function<TangentVector(const SurfacePoint&)> density;
    std::function<double(const SurfacePoint&)> potential;
    std::vector<SurfacePoint> singular_support;
    std::function<double(const SurfacePoint&)> dvol;
};

struct LocResult {
    double value = 0.0;        // circle part (extrapolated) + volume part
    double volume_part = 0.0;  // integral of phi * dvol over supp phi
    Extrapolation circles;
};

/// Localizing operator applied to T and tested against a scalar bump:
/// the extrapolated limit of oriented circle integrals around the singular
/// support,
///   sum_n  oint_{dB_eps(q_n)} phi T          (density form)
///   sum_n -oint_{dB_eps(q_n)} h dphi         (T = dh)
/// plus the volume term when dT does not vanish off the support.
inline LocResult loc_eval(const Surface& s, const CurrentDensity& T, const ScalarTestForm& phi,
                          const EpsilonSchedule& sched, const CirclePolicy& pol = {}) {
    if (!T.density && !T.potential)
        throw std::invalid_argument("current density needs a density or a potential");
    std::vector<double> radii = sched.radii();
    if (radii.front() >= 0.9 * s.injectivity_radius())
        throw std::invalid_argument("epsilon schedule exceeds the injectivity radius");

    std::vector<double> vals(radii.size(), 0.0);
    for (const auto& q : T.singular_support) {
        ChartFrame f = chart_frame(s, q);
        for (std::size_t i = 0; i < radii.size(); ++i) {
            double eps = radii[i];
            auto nodes = geodesic_circle(s, q, f, eps, pol.nodes_for(eps));
            double val;
            if (T.density) {
                val = circle_integral(nodes, [&](const CircleNode& n) {
                    return phi.value(n.x) *
                           inner(s, T.density(n.x), TangentVector{n.x, n.dx_dtheta});
                });
            } else {
                val = -circle_integral(nodes, [&](const CircleNode& n) {
                    return T.potential(n.x) * phi.dphi(TangentVector{n.x, n.dx_dtheta});
                });
            }
            vals[i] += val;
        }
    }
    LocResult out;
    out.circles = extrapolate_to_zero(radii, vals);
    out.value = out.circles.value;
    if (T.dvol) {
        ChartFrame f = chart_frame(s, phi.center());
        auto nodes = geodesic_disc(s, phi.center(), f, phi.radius(), /*graded=*/false, 8, 10, 64);
        double acc = 0.0;
        for (const auto& nd : nodes) acc += nd.w * phi.value(nd.x) * T.dvol(nd.x);
        out.volume_part = acc;
        out.value += acc;
    }
    return out;
}

/// Velocity current of a vortex configuration: density u_sharp, singular
/// support at the vortex positions, uniform compensation as volume term.
inline CurrentDensity vortex_velocity_current(const GreenKernel& kernel, VortexState state) {
    CurrentDensity T;
    const Surface s = kernel.surface();
    T.density = [&kernel, s, state](const SurfacePoint& x) {
        return induced_velocity(s, kernel, state, x);
    };
    for (const auto& v : state.vortices) T.singular_support.push_back(v.pos);
    double c = kernel.compensation(state.total_strength());
    if (c != 0.0) T.dvol = [c](const SurfacePoint&) { return c; };
    return T;
}

/// State of the configuration as a function of time, used to take time
/// derivatives of localized quantities along a flow.
using StateFlow = std::function<VortexState(double)>;

/// Flow reconstructed from a sampled trajectory: the state at time tau is
/// obtained by re-integrating from the nearest recorded sample with the
/// supplied right-hand side (classic RK4, step bounded by step_hint).
template <class Rhs>
StateFlow make_flow(const Trajectory& traj, Rhs rhs, Surface surf, double step_hint = 1e-3) {
    if (traj.states.empty()) throw std::invalid_argument("empty trajectory");
    return [traj, rhs, surf, step_hint](double tau) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < traj.times.size(); ++i)
            if (std::abs(traj.times[i] - tau) < std::abs(traj.times[best] - tau)) best = i;
        double t = traj.times[best];
        VortexState y = traj.states[best];
        double span = tau - t;
        if (span == 0.0) return y;
        int n = std::max(1, (int)std::ceil(std::abs(span) / step_hint));
        double h = span / n;
        for (int i = 0; i < n; ++i) {
            y = detail::rk4_step(surf, rhs, t, y, h);
            t += h;
        }
        return y;
    };
}

struct WeakVerifyOptions {
    EpsilonSchedule sched{};
    CirclePolicy circles{};
    double time_step = -1.0;  // dt for the central difference; < 0: eps_min^2
};

/// Residuals of the three localization identities behind the weak
/// Euler-Arnold formulation, evaluated at time t along a flow, plus the
/// combined pressure-free weak-equation residual:
///   r1: d/dt Loc u - sum Gamma_n dchi_{q_n} qdot_n
///   r2: Loc{(omega_X + omega) * u + omega * X_flat}
///   r3: Loc d g(2 beta_X X_flat + beta_omega u, u)
///                + sum Gamma_n dchi_{q_n}(beta_X X + beta_omega v_n)
///   weak: the sum of the three left-hand sides.
/// dchi_p w [phi] is evaluated exactly as (dphi)_p(w_p); the orientation
/// of the circle integrals is pinned by the closed-form single-vortex
/// plane case (see the unit tests).
struct WeakVerifyReport {
    double r1 = 0.0, r2 = 0.0, r3 = 0.0;
    double weak = 0.0;
    double ddt_loc_u = 0.0;
    double chi_rhs_r1 = 0.0;   // sum Gamma dphi(qdot)
    double loc_bracket = 0.0;  // r2 left-hand side
    double loc_dg = 0.0;       // r3 first term
    double chi_rhs_r3 = 0.0;   // sum Gamma dphi(beta_X X + beta_omega v_n)
    Extrapolation bracket_seq;
    Extrapolation dg_seq;
};

inline WeakVerifyReport lemma_residuals(const StateFlow& flow, double t,
                                        const BackgroundField& bg, const GrowthRate& beta,
                                        const GreenKernel& kernel, const ScalarTestForm& phi,
                                        const WeakVerifyOptions& opt = {}) {
    const Surface s = kernel.surface();
    std::vector<double> radii = opt.sched.radii();
    const double dt = opt.time_step > 0.0 ? opt.time_step
                                          : opt.sched.min_radius() * opt.sched.min_radius();

    VortexState st = flow(t);
    const double c = kernel.compensation(st.total_strength());

    // --- r1: central difference of the circle part of Loc u. The volume
    // term is constant in time (fixed total strength) and drops out.
    auto loc_u_circles = [&](const VortexState& state) {
        CurrentDensity u = vortex_velocity_current(kernel, state);
        u.dvol = nullptr;
        return loc_eval(s, u, phi, opt.sched, opt.circles).value;
    };
    double loc_plus = loc_u_circles(flow(t + dt));
    double loc_minus = loc_u_circles(flow(t - dt));

    WeakVerifyReport rep;
    rep.ddt_loc_u = (loc_plus - loc_minus) / (2.0 * dt);

    // Flow velocity at t by the same central difference, so that perturbed
    // flows are compared against their own motion in r1.
    std::vector<Vec3> qdot(st.size());
    {
        VortexState sp = flow(t + dt), sm = flow(t - dt);
        for (std::size_t n = 0; n < st.size(); ++n) {
            Vec3 d = shortest_displacement(s, sm.vortices[n].pos, sp.vortices[n].pos);
            qdot[n] = d / (2.0 * dt);
        }
    }
    double chi1 = 0.0;
    for (std::size_t n = 0; n < st.size(); ++n)
        chi1 += st.vortices[n].strength *
                phi.dphi(make_tangent(s, st.vortices[n].pos, qdot[n]));
    rep.chi_rhs_r1 = chi1;
    rep.r1 = std::abs(rep.ddt_loc_u - chi1);

    // --- r2: Loc of (omega_X + omega) * u + omega * X_flat. The densities
    // multiply; K(omega) is the constant c. The * of a 1-form rotates its
    // dual by J.
    {
        CurrentDensity bracket;
        bracket.singular_support.reserve(st.size());
        for (const auto& v : st.vortices) bracket.singular_support.push_back(v.pos);
        bracket.density = [&, st, c](const SurfacePoint& x) {
            TangentVector u = induced_velocity(s, kernel, st, x);
            TangentVector ju = rotate_j(s, u);
            TangentVector jX = rotate_j(s, bg.velocity(t, x));
            double w = bg.curl(t, x) + c;
            return TangentVector{x, ju.v * w + jX.v * c};
        };
        LocResult lr = loc_eval(s, bracket, phi, opt.sched, opt.circles);
        rep.loc_bracket = lr.value;
        rep.bracket_seq = lr.circles;
        rep.r2 = std::abs(lr.value);
    }

    // --- r3: Loc of the exact form d g(2 beta_X X_flat + beta_omega u, u).
    {
        CurrentDensity dg;
        dg.singular_support.reserve(st.size());
        for (const auto& v : st.vortices) dg.singular_support.push_back(v.pos);
        dg.potential = [&, st](const SurfacePoint& x) {
            TangentVector u = induced_velocity(s, kernel, st, x);
            TangentVector X = bg.velocity(t, x);
            TangentVector lin{x, X.v * (2.0 * beta.beta_x) + u.v * beta.beta_omega};
            return inner(s, lin, u);
        };
        LocResult lr = loc_eval(s, dg, phi, opt.sched, opt.circles);
        rep.loc_dg = lr.value;
        rep.dg_seq = lr.circles;

        double chi3 = 0.0;
        for (std::size_t n = 0; n < st.size(); ++n) {
            Vec3 w = bg.velocity(t, st.vortices[n].pos).v * beta.beta_x +
                     detail::regularized_velocity_unchecked(n, st, kernel).v * beta.beta_omega;
            chi3 += st.vortices[n].strength * phi.dphi(TangentVector{st.vortices[n].pos, w});
        }
        rep.chi_rhs_r3 = chi3;
        rep.r3 = std::abs(rep.loc_dg + chi3);
    }

    rep.weak = std::abs(rep.ddt_loc_u + rep.loc_bracket + rep.loc_dg);
    return rep;
}

/// Pressure-free weak Euler-Arnold residual at time t along a flow;
/// vanishes on solutions of the point vortex equation and stays bounded
/// away from zero for flows that do not solve it.
inline double weak_residual(const StateFlow& flow, double t, const BackgroundField& bg,
                            const GrowthRate& beta, const GreenKernel& kernel,
                            const ScalarTestForm& phi, const WeakVerifyOptions& opt = {}) {
    return lemma_residuals(flow, t, bg, beta, kernel, phi, opt).weak;
}

}  // namespace pvx
