#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pvx/dynamics.hpp"
#include "pvx/errors.hpp"
#include "pvx/geometry.hpp"

namespace pvx {

enum class Scheme { RK4, AdaptiveRK45, ImplicitMidpoint };

struct IntegratorConfig {
    Scheme scheme = Scheme::AdaptiveRK45;
    double step = 1e-3;     // fixed-step schemes; initial step for adaptive
    double rtol = 1e-10;
    double atol = 1e-10;
    long max_steps = 20'000'000;
    double close_approach_threshold = -1.0;  // < 0: surface default
    double sample_interval = 0.0;            // <= 0: sample every accepted step

    void validate() const {
        if (!(step > 0.0)) throw std::invalid_argument("integrator step must be positive");
        if (!(rtol > 0.0) || !(atol > 0.0))
            throw std::invalid_argument("integrator tolerances must be positive");
        if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
    }
};

struct SampleDiagnostics {
    double hamiltonian = std::numeric_limits<double>::quiet_NaN();
    Moments moments{};
    double min_separation = std::numeric_limits<double>::infinity();
};

struct CloseApproachEvent {
    double time = 0.0;
    double min_separation = 0.0;
    VortexState state;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<VortexState> states;
    std::vector<SampleDiagnostics> diagnostics;
    std::optional<CloseApproachEvent> event;
    long accepted_steps = 0;
    long rejected_steps = 0;

    const VortexState& final_state() const { return states.back(); }
    double final_time() const { return times.back(); }
};

namespace detail {

using StageK = std::vector<Vec3>;

inline VortexState combine(const Surface& s, const VortexState& base,
                           const std::vector<const StageK*>& ks, const double* coef,
                           std::size_t n, double h) {
    VortexState out = base;
    for (std::size_t i = 0; i < base.size(); ++i) {
        Vec3 acc{};
        for (std::size_t j = 0; j < n; ++j) acc += (*ks[j])[i] * coef[j];
        out.vortices[i].pos = retract(s, base.vortices[i].pos, acc, h);
    }
    return out;
}

template <class Rhs>
StageK eval_k(Rhs&& rhs, double t, const VortexState& st) {
    std::vector<TangentVector> v = rhs(t, st);
    StageK k(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) k[i] = v[i].v;
    return k;
}

inline bool state_finite(const VortexState& st) {
    for (const auto& v : st.vortices)
        if (!finite(v.pos.r)) return false;
    return true;
}

inline std::string state_dump(double t, const VortexState& st) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "t=%.17g", t);
    std::string s = buf;
    for (const auto& v : st.vortices) {
        std::snprintf(buf, sizeof buf, " (%.17g,%.17g,%.17g)", v.pos.r.x, v.pos.r.y, v.pos.r.z);
        s += buf;
    }
    return s;
}

/// One classic RK4 step.
template <class Rhs>
VortexState rk4_step(const Surface& s, Rhs&& rhs, double t, const VortexState& y, double h) {
    StageK k1 = eval_k(rhs, t, y);
    static constexpr double half = 0.5;
    VortexState y2 = combine(s, y, {&k1}, &half, 1, h);
    StageK k2 = eval_k(rhs, t + 0.5 * h, y2);
    VortexState y3 = combine(s, y, {&k2}, &half, 1, h);
    StageK k3 = eval_k(rhs, t + 0.5 * h, y3);
    static constexpr double one = 1.0;
    VortexState y4 = combine(s, y, {&k3}, &one, 1, h);
    StageK k4 = eval_k(rhs, t + h, y4);
    static constexpr double w[4] = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
    return combine(s, y, {&k1, &k2, &k3, &k4}, w, 4, h);
}

/// One implicit midpoint step by fixed-point iteration.
template <class Rhs>
VortexState midpoint_step(const Surface& s, Rhs&& rhs, double t, const VortexState& y, double h) {
    StageK k = eval_k(rhs, t, y);
    static constexpr double half = 0.5;
    for (int it = 0; it < 100; ++it) {
        VortexState mid = combine(s, y, {&k}, &half, 1, h);
        StageK k_new = eval_k(rhs, t + 0.5 * h, mid);
        double delta = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < k.size(); ++i) {
            delta = std::max({delta, std::abs(k_new[i].x - k[i].x),
                              std::abs(k_new[i].y - k[i].y), std::abs(k_new[i].z - k[i].z)});
            scale = std::max({scale, std::abs(k_new[i].x), std::abs(k_new[i].y),
                              std::abs(k_new[i].z)});
        }
        k = std::move(k_new);
        if (delta <= 1e-14 * scale) {
            static constexpr double one = 1.0;
            return combine(s, y, {&k}, &one, 1, h);
        }
    }
    throw IntegrationError("implicit midpoint iteration failed to converge");
}

/// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static constexpr double a2[1] = {1.0 / 5};
    static constexpr double a3[2] = {3.0 / 40, 9.0 / 40};
    static constexpr double a4[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
    static constexpr double a5[4] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561,
                                     -212.0 / 729};
    static constexpr double a6[5] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
                                     -5103.0 / 18656};
    static constexpr double b5[6] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
                                     11.0 / 84};
    // b5 - b4, the embedded error weights (7 stages, k7 at the new point).
    static constexpr double e[7] = {35.0 / 384 - 5179.0 / 57600,
                                    0.0,
                                    500.0 / 1113 - 7571.0 / 16695,
                                    125.0 / 192 - 393.0 / 640,
                                    -2187.0 / 6784 + 92097.0 / 339200,
                                    11.0 / 84 - 187.0 / 2100,
                                    -1.0 / 40};
};

template <class Rhs>
struct Dopri5Step {
    VortexState y1;
    double error = 0.0;  // scaled error norm

    Dopri5Step(const Surface& s, Rhs&& rhs, double t, const VortexState& y, double h, double atol,
               double rtol) {
        using D = Dopri5;
        StageK k1 = eval_k(rhs, t, y);
        StageK k2 = eval_k(rhs, t + D::c[1] * h, combine(s, y, {&k1}, D::a2, 1, h));
        StageK k3 = eval_k(rhs, t + D::c[2] * h, combine(s, y, {&k1, &k2}, D::a3, 2, h));
        StageK k4 = eval_k(rhs, t + D::c[3] * h, combine(s, y, {&k1, &k2, &k3}, D::a4, 3, h));
        StageK k5 =
            eval_k(rhs, t + D::c[4] * h, combine(s, y, {&k1, &k2, &k3, &k4}, D::a5, 4, h));
        StageK k6 =
            eval_k(rhs, t + D::c[5] * h, combine(s, y, {&k1, &k2, &k3, &k4, &k5}, D::a6, 5, h));
        y1 = combine(s, y, {&k1, &k2, &k3, &k4, &k5, &k6}, D::b5, 6, h);
        StageK k7 = eval_k(rhs, t + h, y1);

        const StageK* ks[7] = {&k1, &k2, &k3, &k4, &k5, &k6, &k7};
        double acc = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            Vec3 d{};
            for (int j = 0; j < 7; ++j) d += (*ks[j])[i] * D::e[j];
            d *= h;
            const Vec3& p0 = y.vortices[i].pos.r;
            const Vec3& p1 = y1.vortices[i].pos.r;
            double comp[3] = {d.x, d.y, d.z};
            double ref[3] = {std::max(std::abs(p0.x), std::abs(p1.x)),
                             std::max(std::abs(p0.y), std::abs(p1.y)),
                             std::max(std::abs(p0.z), std::abs(p1.z))};
            for (int cix = 0; cix < 3; ++cix) {
                double sc = atol + rtol * ref[cix];
                acc += (comp[cix] / sc) * (comp[cix] / sc);
                ++m;
            }
        }
        error = std::sqrt(acc / std::max<std::size_t>(m, 1));
    }
};

}  // namespace detail

using DiagnosticsFn = std::function<SampleDiagnostics(double, const VortexState&)>;

/// Integrate dq/dt = rhs(t, q) over [t0, t1], sampling at multiples of
/// cfg.sample_interval (every accepted step when <= 0). Steps are clipped
/// to land exactly on sample times and on t1. A close approach below the
/// threshold terminates the run with an event record located in time by
/// bisection; NaNs and step-budget exhaustion are hard failures.
template <class Rhs>
Trajectory integrate(const VortexState& s0, double t0, double t1, Rhs&& rhs, const Surface& surf,
                     const IntegratorConfig& cfg, const DiagnosticsFn& diag = nullptr) {
    cfg.validate();
    if (!(t1 > t0)) throw std::invalid_argument("integration requires t1 > t0");
    const double threshold = cfg.close_approach_threshold >= 0.0
                                 ? cfg.close_approach_threshold
                                 : default_collision_threshold(surf);
    s0.validate(surf, threshold);

    Trajectory traj;
    auto record = [&](double t, const VortexState& st) {
        traj.times.push_back(t);
        traj.states.push_back(st);
        if (diag) traj.diagnostics.push_back(diag(t, st));
    };

    auto next_stop = [&](double t) {
        if (cfg.sample_interval > 0.0) {
            double k = std::floor((t - t0) / cfg.sample_interval + 1e-9) + 1.0;
            return std::min(t1, t0 + k * cfg.sample_interval);
        }
        return t1;
    };

    auto try_step = [&](double t, const VortexState& y, double h,
                        VortexState& out) -> bool {
        // Close approaches inside stage evaluations surface as exceptions;
        // the caller turns them into a rejected step and bisects.
        out = (cfg.scheme == Scheme::RK4 || cfg.scheme == Scheme::AdaptiveRK45)
                  ? detail::rk4_step(surf, rhs, t, y, h)
                  : detail::midpoint_step(surf, rhs, t, y, h);
        return out.min_pair_distance(surf) > threshold;
    };

    // Locate the close-approach time within [t, t+h] by bisection on single
    // steps from the last good state.
    auto locate_event = [&](double t, const VortexState& y, double h) {
        double lo = 0.0, hi = h;
        VortexState at_lo = y;
        while (hi - lo > 1e-9) {
            double mid = 0.5 * (lo + hi);
            VortexState out;
            bool ok = false;
            try {
                ok = try_step(t, y, mid, out);
            } catch (const SingularConfigurationError&) {
                ok = false;
            }
            if (ok) {
                lo = mid;
                at_lo = out;
            } else {
                hi = mid;
            }
        }
        CloseApproachEvent ev;
        ev.time = t + lo;
        ev.state = at_lo;
        ev.min_separation = at_lo.min_pair_distance(surf);
        traj.event = ev;
        record(ev.time, ev.state);
    };

    double t = t0;
    VortexState y = s0;
    record(t, y);

    const bool adaptive = cfg.scheme == Scheme::AdaptiveRK45;
    double h = cfg.step;
    double err_old = 1e-4;
    long steps = 0;

    while (t < t1 - 1e-14 * std::max(1.0, std::abs(t1))) {
        if (++steps > cfg.max_steps)
            throw IntegrationError("max_steps exceeded at " + detail::state_dump(t, y));
        double stop = next_stop(t);
        double h_eff = std::min(h, stop - t);
        bool hit_stop = h_eff >= stop - t - 1e-14 * std::max(1.0, std::abs(stop));

        if (!adaptive) {
            VortexState out;
            bool ok;
            try {
                ok = try_step(t, y, h_eff, out);
            } catch (const SingularConfigurationError&) {
                ok = false;
            }
            if (!ok) {
                locate_event(t, y, h_eff);
                return traj;
            }
            if (!detail::state_finite(out))
                throw IntegrationError("non-finite state: " + detail::state_dump(t, y));
            t = hit_stop ? stop : t + h_eff;
            y = std::move(out);
            ++traj.accepted_steps;
            if (cfg.sample_interval <= 0.0 || hit_stop) record(t, y);
            continue;
        }

        // Adaptive Dormand-Prince with PI step control.
        bool singular = false;
        std::optional<detail::Dopri5Step<Rhs&>> step;
        try {
            step.emplace(surf, rhs, t, y, h_eff, cfg.atol, cfg.rtol);
        } catch (const SingularConfigurationError&) {
            singular = true;
        }
        double err = singular ? std::numeric_limits<double>::infinity() : step->error;

        if (!singular && err <= 1.0) {
            if (step->y1.min_pair_distance(surf) <= threshold) {
                locate_event(t, y, h_eff);
                return traj;
            }
            if (!detail::state_finite(step->y1))
                throw IntegrationError("non-finite state: " + detail::state_dump(t, y));
            t = hit_stop ? stop : t + h_eff;
            y = std::move(step->y1);
            ++traj.accepted_steps;
            if (cfg.sample_interval <= 0.0 || hit_stop) record(t, y);
            double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                         std::pow(err_old, 0.4 / 5.0);
            h = h_eff * std::min(5.0, std::max(0.2, fac));
            err_old = std::max(err, 1e-10);
        } else {
            ++traj.rejected_steps;
            if (singular) {
                h = 0.5 * h_eff;
                if (h < 1e-12) {
                    locate_event(t, y, h_eff);
                    return traj;
                }
            } else {
                double fac = 0.9 * std::pow(err, -0.2);
                h = h_eff * std::min(1.0, std::max(0.1, fac));
            }
        }
    }
    return traj;
}

/// Convenience wrapper wiring the point vortex right-hand side and the
/// standard per-sample diagnostics (Hamiltonian when available, moments,
/// minimum separation).
inline Trajectory integrate_pv(const VortexState& s0, double t0, double t1,
                               const BackgroundField& bg, const GrowthRate& beta,
                               const GreenKernel& kernel, const IntegratorConfig& cfg) {
    const Surface& surf = kernel.surface();
    const double threshold = cfg.close_approach_threshold >= 0.0
                                 ? cfg.close_approach_threshold
                                 : default_collision_threshold(surf);
    auto rhs = [&](double t, const VortexState& st) {
        return pv_rhs(t, st, bg, beta, kernel, threshold);
    };
    const bool has_h = bg.autonomous() && bg.has_stream();
    DiagnosticsFn diag = [&, has_h](double t, const VortexState& st) {
        SampleDiagnostics d;
        d.min_separation = st.min_pair_distance(surf);
        d.moments = conserved_moments(st, surf);
        if (has_h) d.hamiltonian = hamiltonian(t, st, bg, beta, kernel);
        return d;
    };
    return integrate(s0, t0, t1, rhs, surf, cfg, diag);
}

/// Run `count` independent jobs on a small worker pool; results land in a
/// vector indexed by job, so the outcome is independent of the worker
/// count.
template <class Job>
void run_indexed(std::size_t count, int workers, Job&& job) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(workers, (int)count);
    pool.reserve(n);
    for (int w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct SweepPointResult {
    double value = 0.0;      // grid coordinate
    double mu_prime = std::numeric_limits<double>::quiet_NaN();
    Trajectory trajectory;
};

struct SweepSummaryRow {
    double value = 0.0;
    double mu_prime = std::numeric_limits<double>::quiet_NaN();
    double min_separation = std::numeric_limits<double>::infinity();
    double max_separation = 0.0;
    double h_drift = std::numeric_limits<double>::quiet_NaN();
};

inline SweepSummaryRow summarize_sweep_point(const SweepPointResult& p) {
    SweepSummaryRow row;
    row.value = p.value;
    row.mu_prime = p.mu_prime;
    double h0 = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < p.trajectory.diagnostics.size(); ++i) {
        const auto& d = p.trajectory.diagnostics[i];
        row.min_separation = std::min(row.min_separation, d.min_separation);
        if (std::isfinite(d.min_separation))
            row.max_separation = std::max(row.max_separation, d.min_separation);
        if (std::isfinite(d.hamiltonian)) {
            if (!std::isfinite(h0)) {
                h0 = d.hamiltonian;
                row.h_drift = 0.0;
            }
            row.h_drift = std::max(row.h_drift,
                                   std::abs(d.hamiltonian - h0) / std::max(1.0, std::abs(h0)));
        }
    }
    return row;
}

/// Deterministic parameter sweep: `run(value)` produces the trajectory for
/// one grid point; points are processed on a worker pool and returned in
/// grid order regardless of the worker count.
template <class RunFn>
std::vector<SweepPointResult> sweep(const std::vector<double>& grid, RunFn&& run,
                                    int workers = 1) {
    std::vector<SweepPointResult> out(grid.size());
    run_indexed(grid.size(), workers,
                [&](std::size_t i) { out[i] = run(grid[i]); });
    return out;
}

inline std::vector<SweepSummaryRow> sweep_summary(const std::vector<SweepPointResult>& pts) {
    std::vector<SweepSummaryRow> rows;
    rows.reserve(pts.size());
    for (const auto& p : pts) rows.push_back(summarize_sweep_point(p));
    return rows;
}

}  // namespace pvx
