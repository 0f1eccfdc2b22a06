#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "pvx/integrate.hpp"

using namespace pvx;

namespace {

VortexState plane_pair(const Surface& s, double sep, double g1, double g2) {
    VortexState st;
    st.vortices.push_back({make_point(s, 0.5 * sep, 0.0), g1});
    st.vortices.push_back({make_point(s, -0.5 * sep, 0.0), g2});
    return st;
}

/// Closed-form co-rotating pair: both vortices of strength Gamma at
/// separation xi rotate about the fixed midpoint with angular frequency
/// Gamma / (pi xi^2).
SurfacePoint pair_orbit(const Surface& s, double t, double gamma, double xi, int which) {
    double omega = gamma / (kPi * xi * xi);
    double phase = omega * t + (which == 0 ? 0.0 : kPi);
    return make_point(s, 0.5 * xi * std::cos(phase), 0.5 * xi * std::sin(phase));
}

double max_state_error(const Surface& s, const VortexState& a, const VortexState& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, geodesic_distance(s, a.vortices[i].pos, b.vortices[i].pos));
    return m;
}

}  // namespace

TEST_CASE("frozen system returns the initial state exactly", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    IntegratorConfig cfg;
    cfg.scheme = Scheme::RK4;
    cfg.step = 0.1;
    cfg.sample_interval = 1.0;
    Trajectory traj = integrate_pv(st, 0.0, 10.0, BackgroundField::zero(s), GrowthRate{0.0, 0.0},
                                   k, cfg);
    REQUIRE_FALSE(traj.event.has_value());
    for (std::size_t i = 0; i < st.size(); ++i) {
        CHECK(traj.final_state().vortices[i].pos.r.x == st.vortices[i].pos.r.x);
        CHECK(traj.final_state().vortices[i].pos.r.y == st.vortices[i].pos.r.y);
    }
}

TEST_CASE("plane pair returns after one period", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    IntegratorConfig cfg;
    cfg.scheme = Scheme::AdaptiveRK45;
    cfg.rtol = cfg.atol = 1e-12;
    cfg.step = 1e-3;
    cfg.sample_interval = kPi / 8;
    // Angular frequency 2, period pi.
    Trajectory traj =
        integrate_pv(st, 0.0, kPi, BackgroundField::zero(s), GrowthRate{0.0, 1.0}, k, cfg);
    CHECK(max_state_error(s, traj.final_state(), st) < 1e-6);
    // Separation constant along the way.
    for (const auto& d : traj.diagnostics) CHECK(std::abs(d.min_separation - 1.0) < 1e-9);
    // Against the closed-form orbit at interior samples.
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        SurfacePoint q0 = pair_orbit(s, traj.times[i], 2.0 * kPi, 1.0, 0);
        CHECK(geodesic_distance(s, traj.states[i].vortices[0].pos, q0) < 1e-6);
    }
}

TEST_CASE("RK4 error drops sixteen-fold when the step is halved", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    BackgroundField bg = BackgroundField::zero(s);
    GrowthRate beta{0.0, 1.0};
    auto endpoint_error = [&](double h) {
        IntegratorConfig cfg;
        cfg.scheme = Scheme::RK4;
        cfg.step = h;
        cfg.sample_interval = kPi;  // endpoint only
        Trajectory tr = integrate_pv(st, 0.0, kPi, bg, beta, k, cfg);
        VortexState exact;
        exact.vortices.push_back({pair_orbit(s, kPi, 2.0 * kPi, 1.0, 0), 2.0 * kPi});
        exact.vortices.push_back({pair_orbit(s, kPi, 2.0 * kPi, 1.0, 1), 2.0 * kPi});
        return max_state_error(s, tr.final_state(), exact);
    };
    double e1 = endpoint_error(kPi / 200);
    double e2 = endpoint_error(kPi / 400);
    CHECK(e1 / e2 == Catch::Approx(16.0).epsilon(0.15));
}

TEST_CASE("RK4 endpoint error has log-log slope 4", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    BackgroundField bg = BackgroundField::zero(s);
    GrowthRate beta{0.0, 1.0};
    std::vector<double> hs, errs;
    for (int n : {100, 160, 250, 400, 640}) {
        IntegratorConfig cfg;
        cfg.scheme = Scheme::RK4;
        cfg.step = kPi / n;
        cfg.sample_interval = kPi;
        Trajectory tr = integrate_pv(st, 0.0, kPi, bg, beta, k, cfg);
        VortexState exact;
        exact.vortices.push_back({pair_orbit(s, kPi, 2.0 * kPi, 1.0, 0), 2.0 * kPi});
        exact.vortices.push_back({pair_orbit(s, kPi, 2.0 * kPi, 1.0, 1), 2.0 * kPi});
        hs.push_back(kPi / n);
        errs.push_back(max_state_error(s, tr.final_state(), exact));
    }
    double slope = loglog_slope(hs, errs);
    CHECK(slope == Catch::Approx(4.0).margin(0.1));
}

TEST_CASE("adaptive integration conserves the shear-pair Hamiltonian", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    BackgroundField bg = BackgroundField::linear_shear(s, 0.5);
    GrowthRate beta{1.0, 1.0};
    VortexState st;
    st.vortices.push_back({make_point(s, 0.3, 0.2), 2.0 * kPi});
    st.vortices.push_back({make_point(s, -0.3, -0.2), 2.0 * kPi});
    IntegratorConfig cfg;
    cfg.scheme = Scheme::AdaptiveRK45;
    cfg.rtol = cfg.atol = 1e-10;
    cfg.step = 1e-3;
    cfg.sample_interval = 0.25;
    Trajectory tr = integrate_pv(st, 0.0, 20.0, bg, beta, k, cfg);
    REQUIRE_FALSE(tr.event.has_value());
    double h0 = tr.diagnostics.front().hamiltonian;
    double drift = 0.0;
    for (const auto& d : tr.diagnostics)
        drift = std::max(drift, std::abs(d.hamiltonian - h0) / std::max(1.0, std::abs(h0)));
    CHECK(drift < 1e-8);
}

TEST_CASE("implicit midpoint keeps the energy bounded over long runs", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    BackgroundField bg = BackgroundField::zero(s);
    GrowthRate beta{0.0, 1.0};
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    IntegratorConfig cfg;
    cfg.scheme = Scheme::ImplicitMidpoint;
    cfg.step = 5e-3;
    cfg.sample_interval = 2.5;
    cfg.max_steps = 200000;
    Trajectory tr = integrate_pv(st, 0.0, 500.0, bg, beta, k, cfg);  // 1e5 steps
    REQUIRE(tr.accepted_steps >= 100000);
    double h0 = tr.diagnostics.front().hamiltonian;
    double first_window = 0.0, anywhere = 0.0;
    for (std::size_t i = 0; i < tr.diagnostics.size(); ++i) {
        double d = std::abs(tr.diagnostics[i].hamiltonian - h0);
        anywhere = std::max(anywhere, d);
        if (tr.times[i] <= 50.0) first_window = std::max(first_window, d);
    }
    CHECK(anywhere < 1e-8);
    // No secular growth: the long-run drift stays comparable to the early
    // drift.
    CHECK(anywhere < 10.0 * std::max(first_window, 1e-13));
}

TEST_CASE("plane impulses are conserved without background", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 5.0);
    IntegratorConfig cfg;
    cfg.rtol = cfg.atol = 1e-12;
    cfg.sample_interval = 0.5;
    Trajectory tr =
        integrate_pv(st, 0.0, 5.0, BackgroundField::zero(s), GrowthRate{0.0, 1.0}, k, cfg);
    Moments m0 = tr.diagnostics.front().moments;
    for (const auto& d : tr.diagnostics) {
        CHECK(std::abs(d.moments.linear.x - m0.linear.x) < 1e-10);
        CHECK(std::abs(d.moments.linear.y - m0.linear.y) < 1e-10);
        CHECK(std::abs(d.moments.angular - m0.angular) < 1e-9);
    }
}

TEST_CASE("sphere trajectories stay on the sphere and conserve the moment", "[integrate]") {
    Surface s = Surface::sphere(1.0);
    GreenKernel k(s);
    VortexState st;
    st.vortices.push_back({make_point(s, 1, 0, 0), 2.0 * kPi});
    st.vortices.push_back({make_point(s, 0, 1, 0.4), -3.0});
    st.vortices.push_back({make_point(s, -0.5, 0.2, 0.9), 5.0});
    IntegratorConfig cfg;
    cfg.rtol = cfg.atol = 1e-11;
    cfg.sample_interval = 0.2;
    Trajectory tr =
        integrate_pv(st, 0.0, 4.0, BackgroundField::zero(s), GrowthRate{0.0, 1.0}, k, cfg);
    Moments m0 = tr.diagnostics.front().moments;
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        for (const auto& v : tr.states[i].vortices)
            REQUIRE(std::abs(norm(v.pos.r) - 1.0) < 1e-10);
        const Moments& m = tr.diagnostics[i].moments;
        REQUIRE(norm(m.linear - m0.linear) < 1e-8);
    }
}

TEST_CASE("time rescaling by beta_omega", "[integrate]") {
    // With beta_X = 0 the flow satisfies q(t; beta_omega) = Q(beta_omega t).
    Surface s = Surface::plane();
    GreenKernel k(s);
    BackgroundField bg = BackgroundField::zero(s);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 4.0);
    IntegratorConfig cfg;
    cfg.rtol = cfg.atol = 1e-12;
    cfg.sample_interval = 0.1;
    const double bw = 0.4;
    Trajectory slow = integrate_pv(st, 0.0, 2.0, bg, GrowthRate{0.0, bw}, k, cfg);
    IntegratorConfig cfg1 = cfg;
    cfg1.sample_interval = 0.1 * bw;
    Trajectory ref = integrate_pv(st, 0.0, 2.0 * bw, bg, GrowthRate{0.0, 1.0}, k, cfg1);
    REQUIRE(slow.times.size() == ref.times.size());
    for (std::size_t i = 0; i < slow.times.size(); ++i) {
        REQUIRE(std::abs(ref.times[i] - bw * slow.times[i]) < 1e-12);
        REQUIRE(max_state_error(s, slow.states[i], ref.states[i]) < 1e-8);
    }
}

TEST_CASE("close approach is detected and located", "[integrate]") {
    // Adverse shear draws the identical pair together; a deliberately high
    // threshold turns the dip into an event.
    Surface s = Surface::plane();
    GreenKernel k(s);
    BackgroundField bg = BackgroundField::linear_shear(s, -1.0);
    GrowthRate beta{1.0, 1.0};
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    IntegratorConfig cfg;
    cfg.rtol = cfg.atol = 1e-10;
    cfg.sample_interval = 0.05;
    cfg.close_approach_threshold = 0.9;
    Trajectory tr = integrate_pv(st, 0.0, 10.0, bg, beta, k, cfg);
    REQUIRE(tr.event.has_value());
    CHECK(tr.event->min_separation >= 0.9);
    CHECK(tr.event->min_separation < 0.9 + 1e-3);
    CHECK(tr.final_time() == Catch::Approx(tr.event->time));
    // The recorded event state is the last one before crossing.
    CHECK(tr.event->state.min_pair_distance(s) >= 0.9);
}

TEST_CASE("max_steps exhaustion is a hard error", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    IntegratorConfig cfg;
    cfg.scheme = Scheme::RK4;
    cfg.step = 1e-4;
    cfg.max_steps = 10;
    CHECK_THROWS_AS(
        integrate_pv(st, 0.0, 1.0, BackgroundField::zero(s), GrowthRate{0.0, 1.0}, k, cfg),
        IntegrationError);
}

TEST_CASE("serial integration is bit-deterministic", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    BackgroundField bg = BackgroundField::linear_shear(s, 0.3);
    VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
    IntegratorConfig cfg;
    cfg.sample_interval = 0.1;
    Trajectory a = integrate_pv(st, 0.0, 3.0, bg, GrowthRate{1.0, 1.0}, k, cfg);
    Trajectory b = integrate_pv(st, 0.0, 3.0, bg, GrowthRate{1.0, 1.0}, k, cfg);
    REQUIRE(a.times.size() == b.times.size());
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        REQUIRE(std::memcmp(&a.times[i], &b.times[i], sizeof(double)) == 0);
        for (std::size_t j = 0; j < a.states[i].size(); ++j) {
            const Vec3& pa = a.states[i].vortices[j].pos.r;
            const Vec3& pb = b.states[i].vortices[j].pos.r;
            REQUIRE(std::memcmp(&pa, &pb, sizeof(Vec3)) == 0);
        }
    }
}

TEST_CASE("sweep is deterministic across worker counts", "[integrate]") {
    Surface s = Surface::plane();
    GreenKernel k(s);
    GrowthRate beta{1.0, 1.0};
    auto run_point = [&](double c) {
        BackgroundField bg = BackgroundField::linear_shear(s, c);
        VortexState st = plane_pair(s, 1.0, 2.0 * kPi, 2.0 * kPi);
        IntegratorConfig cfg;
        cfg.sample_interval = 0.02;
        SweepPointResult r;
        r.value = c;
        r.mu_prime = merger_threshold(c, 2.0 * kPi, 1.0, beta);
        r.trajectory = integrate_pv(st, 0.0, 1.2 * kPi, bg, beta, k, cfg);
        return r;
    };
    std::vector<double> grid = {-1.0, -0.5, 0.0, 0.5, 1.0};
    auto serial = sweep(grid, run_point, 1);
    auto parallel = sweep(grid, run_point, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        auto rs = summarize_sweep_point(serial[i]);
        auto rp = summarize_sweep_point(parallel[i]);
        REQUIRE(std::memcmp(&rs.min_separation, &rp.min_separation, sizeof(double)) == 0);
        REQUIRE(std::memcmp(&rs.max_separation, &rp.max_separation, sizeof(double)) == 0);
    }

    // Merger sign criterion across the grid.
    auto rows = sweep_summary(serial);
    for (const auto& row : rows) {
        if (row.mu_prime < 0.0) REQUIRE(row.min_separation < 1.0 - 1e-3);
        if (row.mu_prime > 0.0) REQUIRE(row.max_separation > 1.0 + 1e-3);
        if (row.mu_prime == 0.0) {
            REQUIRE(std::abs(row.min_separation - 1.0) < 1e-7);
            REQUIRE(std::abs(row.max_separation - 1.0) < 1e-7);
        }
    }

    // Empty grid; single-point grid equals a plain integrate call.
    CHECK(sweep(std::vector<double>{}, run_point).empty());
    auto single = sweep(std::vector<double>{0.5}, run_point, 3);
    REQUIRE(single.size() == 1);
    Trajectory direct = run_point(0.5).trajectory;
    REQUIRE(single[0].trajectory.times.size() == direct.times.size());
    CHECK(max_state_error(s, single[0].trajectory.final_state(), direct.final_state()) == 0.0);
}
