#include <catch_amalgamated.hpp>

#include <cmath>

#include "akooc/plant.hpp"

using namespace akooc;
using Eigen::MatrixXd;

TEST_CASE("conventional droop advances angle by the closed-form increment") {
    DerConfig cfg;
    cfg.droop_kind = DroopKind::Conventional;
    cfg.sigma_omega_pu = 0.02;
    cfg.sigma_v_pu = 0.05;
    cfg.v_ref = 1.0;
    DerState s;
    s.theta = 0.1;
    s.p_filt = 0.6;
    s.p_star = 0.5;
    s.q_filt = 0.3;
    s.q_star = 0.1;
    RefOffsets off;
    off.omega = 0.001;
    off.v = 0.002;
    const double dt = 1e-3;
    const double expected_dtheta = dt * kTwoPi * (off.omega - cfg.sigma_omega_pu * 0.1);
    droop_conventional_step(s, cfg, dt, off);
    CHECK(s.theta == Catch::Approx(0.1 + expected_dtheta).margin(1e-15));
    CHECK(s.v == Catch::Approx(1.0 + off.v - cfg.sigma_v_pu * 0.2).margin(1e-15));
}

TEST_CASE("conventional droop frequency deviation is zero at the reference power") {
    DerConfig cfg;
    cfg.droop_kind = DroopKind::Conventional;
    cfg.sigma_omega_pu = 0.02;
    DerState s;
    s.p_filt = 0.7;
    s.p_star = 0.7;
    CHECK(conventional_freq_dev(s, cfg) == 0.0);
}

TEST_CASE("modified droop converges to its analytic equilibrium") {
    DerConfig cfg;
    cfg.droop_kind = DroopKind::Modified;
    cfg.sigma_theta = 2.0;
    cfg.sigma_v_pu = 1.5;
    cfg.tau_theta = 0.5;
    cfg.tau_v = 0.25;
    cfg.theta_ref = 0.05;
    cfg.v_ref = 1.0;
    DerState s;
    s.theta = 0.3;
    s.v = 0.9;
    s.p_filt = 0.4;
    s.p_star = 0.1;
    s.q_filt = 0.2;
    s.q_star = 0.15;
    const double dt = 1e-4;
    for (int k = 0; k < 100000; ++k) droop_modified_step(s, cfg, dt);
    // Fixed point: theta = theta_ref - sigma_theta (p - p*), v = v_ref - sigma_v (q - q*).
    CHECK(s.theta == Catch::Approx(0.05 - 2.0 * 0.3).margin(1e-9));
    CHECK(s.v == Catch::Approx(1.0 - 1.5 * 0.05).margin(1e-9));
}

TEST_CASE("modified droop tracks the scalar exponential solution") {
    DerConfig cfg;
    cfg.droop_kind = DroopKind::Modified;
    cfg.sigma_theta = 0.0;
    cfg.sigma_v_pu = 0.0;
    cfg.tau_theta = 0.8;
    cfg.tau_v = 0.4;
    cfg.theta_ref = 0.0;
    cfg.v_ref = 1.0;
    DerState s;
    s.theta = 0.2;
    s.v = 1.1;
    const double dt = 1e-5, T = 0.5;
    const int n = static_cast<int>(T / dt);
    for (int k = 0; k < n; ++k) droop_modified_step(s, cfg, dt);
    CHECK(s.theta == Catch::Approx(0.2 * std::exp(-T / cfg.tau_theta)).epsilon(1e-3));
    CHECK(s.v - 1.0 == Catch::Approx(0.1 * std::exp(-T / cfg.tau_v)).epsilon(1e-3));
}

TEST_CASE("lowpass filter applies the exact one-step blend and saturates at dt >= tau") {
    DerState s;
    s.p_filt = 0.0;
    s.q_filt = 1.0;
    lowpass_filter_step(1.0, 0.0, s, 0.1, 0.02);
    CHECK(s.p_filt == Catch::Approx(0.2).margin(1e-15));
    CHECK(s.q_filt == Catch::Approx(0.8).margin(1e-15));
    // dt >= tau clamps alpha at 1: instantaneous tracking, no overshoot.
    lowpass_filter_step(0.5, 0.5, s, 0.1, 10.0);
    CHECK(s.p_filt == 0.5);
    CHECK(s.q_filt == 0.5);
    // tau <= 0 means no filtering.
    lowpass_filter_step(0.7, 0.3, s, 0.0, 1e-6);
    CHECK(s.p_filt == 0.7);
}

TEST_CASE("dynamic load recovers exponentially toward the voltage-scaled target") {
    LoadConfig cfg;
    cfg.p0 = 1.0;
    cfg.q0 = 0.5;
    cfg.alpha_p = 1.2;
    cfg.alpha_q = 2.0;
    cfg.tau = 2.0;
    LoadState s;
    s.xp = 1.0;
    s.xq = 0.5;
    const double v = 0.95;
    const double pt = std::pow(v, 1.2), qt = 0.5 * std::pow(v, 2.0);
    const double dt = 0.01;
    double prev_gap = std::abs(s.xp - pt);
    for (int k = 0; k < 50; ++k) {
        dynamic_load_step(s, v, cfg, dt);
        const double gap = std::abs(s.xp - pt);
        CHECK(gap <= prev_gap);  // monotone approach
        prev_gap = gap;
    }
    // One-step closed form from the fresh state.
    LoadState s2;
    s2.xp = 1.0;
    s2.xq = 0.5;
    dynamic_load_step(s2, v, cfg, dt);
    CHECK(s2.xp == Catch::Approx(1.0 + (dt / cfg.tau) * (pt - 1.0)).margin(1e-15));
    CHECK(s2.xq == Catch::Approx(0.5 + (dt / cfg.tau) * (qt - 0.5)).margin(1e-15));
}

TEST_CASE("dynamic load clamps at its target for very large steps") {
    LoadConfig cfg;
    cfg.p0 = 2.0;
    cfg.q0 = 1.0;
    cfg.alpha_p = 1.0;
    cfg.alpha_q = 1.0;
    cfg.tau = 3.0;
    LoadState s;
    dynamic_load_step(s, 1.1, cfg, 1e30);
    CHECK(s.xp == Catch::Approx(2.2));
    CHECK(s.xq == Catch::Approx(1.1));
}

TEST_CASE("static load (tau <= 0) is algebraic") {
    LoadConfig cfg;
    cfg.p0 = 1.0;
    cfg.alpha_p = 2.0;
    cfg.tau = 0.0;
    LoadState s;
    dynamic_load_step(s, 0.9, cfg, 1e-3);
    CHECK(s.xp == Catch::Approx(0.81));
}

TEST_CASE("reference updates rebase on the filtered power only in adaptive mode") {
    DerState s;
    s.p_filt = 0.6;
    s.q_filt = 0.2;
    apply_reference_update(s, 0.05, -0.01, ReferenceMode::Adaptive);
    CHECK(s.p_star == Catch::Approx(0.65));
    CHECK(s.q_star == Catch::Approx(0.19));
    apply_reference_update(s, 0.05, -0.01, ReferenceMode::FixedBaseline, 0.5, 0.1);
    CHECK(s.p_star == Catch::Approx(0.55));
    CHECK(s.q_star == Catch::Approx(0.09));
}

TEST_CASE("physical model matrices have the documented block structure") {
    const double ts = 0.06;
    DerConfig mod;
    mod.droop_kind = DroopKind::Modified;
    mod.sigma_theta = 2.0;
    mod.sigma_v_pu = 1.5;
    mod.tau_theta = 8.0;
    mod.tau_v = 4.0;
    DerConfig conv;
    conv.droop_kind = DroopKind::Conventional;
    conv.sigma_omega_pu = 0.02;
    conv.sigma_v_pu = 0.05;
    const std::vector<DerConfig> cfgs{mod, conv};
    const MatrixXd J = MatrixXd::Zero(4, 4);
    PhysicalModel pm = physical_model_matrices(cfgs, J, ts);
    REQUIRE(pm.A.rows() == 4);
    REQUIRE(pm.B.cols() == 4);
    // With J = 0 the A matrix is the diagonal decay.
    CHECK(pm.A(0, 0) == Catch::Approx(std::exp(-ts / 8.0)));
    CHECK(pm.A(2, 2) == Catch::Approx(std::exp(-ts / 4.0)));
    CHECK(pm.A(1, 1) == 1.0);  // conventional rows keep the identity
    CHECK(pm.A(3, 3) == 1.0);
    CHECK(pm.B(0, 0) == Catch::Approx(ts * 2.0 / 8.0));
    CHECK(pm.B(2, 2) == Catch::Approx(ts * 1.5 / 4.0));
    CHECK(pm.B(1, 1) == Catch::Approx(ts * kTwoPi * 0.02));
    CHECK(pm.B(3, 3) == Catch::Approx(0.05));  // sigma_v / ts * ts
    CHECK(pm.B.cwiseAbs().sum() == Catch::Approx(pm.B.diagonal().cwiseAbs().sum()));

    // Off-diagonal J couples through the gain diagonal: A = decay - ts * gain * J.
    MatrixXd J2 = MatrixXd::Zero(4, 4);
    J2(0, 1) = 3.0;
    PhysicalModel pm2 = physical_model_matrices(cfgs, J2, ts);
    CHECK(pm2.A(0, 1) == Catch::Approx(-ts * (2.0 / 8.0) * 3.0));

    CHECK_THROWS_AS(physical_model_matrices(cfgs, MatrixXd::Zero(3, 3), ts), DimensionMismatch);
}
