#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

namespace akooc {

/// PI secondary control gains; one integrator pair per DER.
struct PiConfig {
    double kp_f = 0.0;
    double ki_f = 0.0;
    double kp_v = 0.0;
    double ki_v = 0.0;
    double clamp = 1.0 / 15.0;  // anti-windup clamp = controller saturation bound
};

class PiController {
public:
    PiController(const PiConfig& cfg, int n_der)
        : cfg_(cfg), int_f_(Eigen::VectorXd::Zero(n_der)), int_v_(Eigen::VectorXd::Zero(n_der)) {}

    /// errors are per-DER (domega, dv); returns u = (dP*, dQ*) stacked
    /// [P-block; Q-block]. Integration halts while the output is clamped
    /// against the error's sign.
    Eigen::VectorXd step(const Eigen::VectorXd& domega, const Eigen::VectorXd& dv, double dt) {
        const int n = static_cast<int>(domega.size());
        Eigen::VectorXd u(2 * n);
        for (int i = 0; i < n; ++i) {
            u(i) = pi_channel(domega(i), int_f_(i), cfg_.kp_f, cfg_.ki_f, dt);
            u(n + i) = pi_channel(dv(i), int_v_(i), cfg_.kp_v, cfg_.ki_v, dt);
        }
        return u;
    }

    const Eigen::VectorXd& integrator_f() const { return int_f_; }
    const Eigen::VectorXd& integrator_v() const { return int_v_; }

private:
    double pi_channel(double err, double& integ, double kp, double ki, double dt) const {
        double u = -(kp * err + ki * integ);
        const bool hi = u > cfg_.clamp;
        const bool lo = u < -cfg_.clamp;
        const double push = -ki * err;  // integration's contribution to du/dt
        const bool outward = (hi && push > 0.0) || (lo && push < 0.0);
        if (!outward) {
            integ += err * dt;
            u = -(kp * err + ki * integ);
        }
        return std::clamp(u, -cfg_.clamp, cfg_.clamp);
    }

    PiConfig cfg_;
    Eigen::VectorXd int_f_;
    Eigen::VectorXd int_v_;
};

/// Simplified secondary droop restoration: integrators shifting the droop
/// references. The frequency offset integrates the DER-average frequency
/// deviation; voltage offsets integrate each DER's local deviation.
struct SecondaryDroopConfig {
    double k_omega = 0.0;  // 1/s on per-unit frequency deviation
    double k_v = 0.0;      // 1/s on per-unit voltage deviation
};

class SecondaryDroopController {
public:
    SecondaryDroopController(const SecondaryDroopConfig& cfg, int n_der)
        : cfg_(cfg), omega_off_(0.0), v_off_(Eigen::VectorXd::Zero(n_der)) {}

    void step(const Eigen::VectorXd& domega, const Eigen::VectorXd& dv, double dt) {
        omega_off_ += dt * (-cfg_.k_omega * domega.mean());
        v_off_ += dt * (-cfg_.k_v * dv);
    }

    double omega_offset() const { return omega_off_; }
    const Eigen::VectorXd& v_offsets() const { return v_off_; }

private:
    SecondaryDroopConfig cfg_;
    double omega_off_;
    Eigen::VectorXd v_off_;
};

}  // namespace akooc
