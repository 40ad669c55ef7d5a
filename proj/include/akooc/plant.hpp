#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "akooc/errors.hpp"

namespace akooc {

constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class DroopKind { Conventional, Modified };

/// Per-DER droop configuration. Droop gains are in per-unit on the system
/// base: sigma_omega_pu = sigma_omega[Hz/W] * S_base / f_base,
/// sigma_v_pu = sigma_v[V/Var] * S_base / V_base.
struct DerConfig {
    DroopKind droop_kind = DroopKind::Conventional;
    double sigma_omega_pu = 0.0;  // p.u. frequency per p.u. power (conventional)
    double sigma_v_pu = 0.0;      // p.u. voltage per p.u. reactive power
    double sigma_theta = 0.0;     // rad per p.u. power (modified)
    double tau_theta = 1.0;       // s (modified)
    double tau_v = 1.0;           // s (modified)
    double v_ref = 1.0;           // p.u.
    double theta_ref = 0.0;       // rad
    double lowpass_tau = 0.0318;  // s, power measurement filter
};

struct DerState {
    double theta = 0.0;   // rad
    double v = 1.0;       // p.u.
    double p_filt = 0.0;  // p.u.
    double q_filt = 0.0;  // p.u.
    double p_star = 0.0;  // p.u.
    double q_star = 0.0;  // p.u.
};

/// Reference offsets injected by ambient perturbation or the secondary-droop
/// baseline. omega is a per-unit frequency bias.
struct RefOffsets {
    double omega = 0.0;
    double v = 0.0;
    double theta = 0.0;
};

struct LoadConfig {
    int bus = -1;
    double p0 = 0.0;       // nominal active demand, p.u.
    double q0 = 0.0;       // nominal reactive demand, p.u.
    double alpha_p = 0.0;  // voltage exponent for P
    double alpha_q = 0.0;  // voltage exponent for Q
    double tau = 0.0;      // recovery time constant, s; <= 0 means static
    double v0 = 1.0;       // nominal voltage, p.u.
};

struct LoadState {
    double xp = 0.0;  // consumed active power, p.u.
    double xq = 0.0;  // consumed reactive power, p.u.
};

enum class ReferenceMode { Adaptive, FixedBaseline };

struct PhysicalModel {
    Eigen::MatrixXd A;  // 2N x 2N
    Eigen::MatrixXd B;  // 2N x 2N
    double ts = 0.0;
};

/// Per-unit frequency deviation implied by the conventional droop law.
inline double conventional_freq_dev(const DerState& s, const DerConfig& cfg,
                                    const RefOffsets& off = {}) {
    return off.omega - cfg.sigma_omega_pu * (s.p_filt - s.p_star);
}

/// Conventional droop: forward-Euler angle integration, algebraic voltage.
inline void droop_conventional_step(DerState& s, const DerConfig& cfg, double dt,
                                    const RefOffsets& off = {}) {
    s.theta += dt * kTwoPi * conventional_freq_dev(s, cfg, off);
    s.v = cfg.v_ref + off.v - cfg.sigma_v_pu * (s.q_filt - s.q_star);
}

/// Modified droop: forward Euler on both first-order ODEs.
inline void droop_modified_step(DerState& s, const DerConfig& cfg, double dt,
                                const RefOffsets& off = {}) {
    const double theta_ref = cfg.theta_ref + off.theta;
    const double dtheta = -(s.theta - theta_ref) / cfg.tau_theta -
                          (cfg.sigma_theta / cfg.tau_theta) * (s.p_filt - s.p_star) +
                          kTwoPi * off.omega;
    const double dv = -(s.v - (cfg.v_ref + off.v)) / cfg.tau_v -
                      (cfg.sigma_v_pu / cfg.tau_v) * (s.q_filt - s.q_star);
    s.theta += dt * dtheta;
    s.v += dt * dv;
}

/// First-order lag on the raw power measurements.
inline void lowpass_filter_step(double p_raw, double q_raw, DerState& s, double lowpass_tau,
                                double dt) {
    const double alpha = lowpass_tau > 0.0 ? std::min(dt / lowpass_tau, 1.0) : 1.0;
    s.p_filt += alpha * (p_raw - s.p_filt);
    s.q_filt += alpha * (q_raw - s.q_filt);
}

/// Exponential-recovery dynamic load: T_L * xdot = P0 (V/V0)^alpha - x.
/// tau <= 0 degenerates to the static voltage-exponent load.
inline void dynamic_load_step(LoadState& s, double v_bus, const LoadConfig& cfg, double dt) {
    const double ratio = cfg.v0 > 0.0 ? v_bus / cfg.v0 : 0.0;
    const double p_target = cfg.p0 * std::pow(ratio, cfg.alpha_p);
    const double q_target = cfg.q0 * std::pow(ratio, cfg.alpha_q);
    if (cfg.tau <= 0.0) {
        s.xp = p_target;
        s.xq = q_target;
    } else {
        const double alpha = std::min(dt / cfg.tau, 1.0);
        s.xp += alpha * (p_target - s.xp);
        s.xq += alpha * (q_target - s.xq);
    }
}

/// Reference-power update commanded by the secondary layer. In adaptive mode
/// the baseline is the present filtered power; in fixed-baseline mode it is
/// the supplied pre-event operating point.
inline void apply_reference_update(DerState& s, double dp_star, double dq_star,
                                   ReferenceMode mode, double p_base = 0.0, double q_base = 0.0) {
    if (mode == ReferenceMode::Adaptive) {
        s.p_star = s.p_filt + dp_star;
        s.q_star = s.q_filt + dq_star;
    } else {
        s.p_star = p_base + dp_star;
        s.q_star = q_base + dq_star;
    }
}

/// Discrete small-signal physical model over one secondary step T_s, with the
/// state ordered [dtheta_1..dtheta_N, dv_1..dv_N].
///
/// Modified branch: A = diag(exp(-Ts/tau)) - diag(sigma/tau) J Ts,
///                  B = Ts diag(sigma_theta/tau_theta, sigma_v/tau_v).
/// Conventional branch (Euler): A = I - Ts diag(s_eff) J, B = Ts diag(s_eff),
/// with effective per-step sensitivities s_eff = (2*pi*sigma_omega, sigma_v/Ts)
/// so B reproduces the plant's actual one-step response to [dP*, dQ*].
inline PhysicalModel physical_model_matrices(const std::vector<DerConfig>& cfgs,
                                             const Eigen::MatrixXd& J, double ts) {
    const int n = static_cast<int>(cfgs.size());
    if (J.rows() != 2 * n || J.cols() != 2 * n)
        throw DimensionMismatch("physical_model_matrices: J must be 2N x 2N");

    Eigen::VectorXd decay = Eigen::VectorXd::Ones(2 * n);  // conventional rows keep I
    Eigen::VectorXd gain(2 * n);
    for (int i = 0; i < n; ++i) {
        const DerConfig& c = cfgs[i];
        if (c.droop_kind == DroopKind::Modified) {
            decay(i) = std::exp(-ts / c.tau_theta);
            decay(n + i) = std::exp(-ts / c.tau_v);
            gain(i) = c.sigma_theta / c.tau_theta;
            gain(n + i) = c.sigma_v_pu / c.tau_v;
        } else {
            gain(i) = kTwoPi * c.sigma_omega_pu;
            gain(n + i) = ts > 0.0 ? c.sigma_v_pu / ts : 0.0;
        }
    }
    PhysicalModel pm;
    pm.ts = ts;
    pm.A = Eigen::MatrixXd(decay.asDiagonal()) - ts * gain.asDiagonal() * J;
    pm.B = ts * Eigen::MatrixXd(gain.asDiagonal());
    return pm;
}

}  // namespace akooc
