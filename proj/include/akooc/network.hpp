#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "akooc/errors.hpp"

namespace akooc {

enum class BusRole { Der, Load, Slack };

struct Line {
    int from = 0;
    int to = 0;
    double r = 0.0;  // series resistance, p.u.
    double x = 0.0;  // series reactance, p.u.
    bool in_service = true;
};

/// Shunt admittance stamped on a bus diagonal (used for fault modeling).
struct Shunt {
    int bus = 0;
    double g = 0.0;
    double b = 0.0;
};

/// Static electrical model: bus admittance split into conductance G and
/// susceptance B, plus the line list it was built from.
struct NetworkModel {
    int n_bus = 0;
    std::vector<Line> lines;
    std::vector<BusRole> bus_roles;
    Eigen::MatrixXd G;
    Eigen::MatrixXd B;
};

struct BusSolution {
    Eigen::VectorXd V;
    Eigen::VectorXd theta;
    Eigen::VectorXd P_inj;
    Eigen::VectorXd Q_inj;
    int iterations = 0;
};

/// Per-bus constraints for the power flow: fixed (V, theta) at DER/slack
/// buses, (P, Q) consumption at load buses (positive = consuming).
struct PowerFlowBoundary {
    std::vector<bool> fixed;
    Eigen::VectorXd V_fixed;
    Eigen::VectorXd theta_fixed;
    Eigen::VectorXd P_load;
    Eigen::VectorXd Q_load;
};

inline NetworkModel build_admittance(const std::vector<Line>& lines,
                                     const std::vector<BusRole>& bus_roles,
                                     const std::vector<Shunt>& shunts = {}) {
    const int n = static_cast<int>(bus_roles.size());
    NetworkModel model;
    model.n_bus = n;
    model.lines = lines;
    model.bus_roles = bus_roles;
    model.G = Eigen::MatrixXd::Zero(n, n);
    model.B = Eigen::MatrixXd::Zero(n, n);

    std::vector<bool> connected(n, false);
    for (const Line& ln : lines) {
        if (ln.from < 0 || ln.from >= n || ln.to < 0 || ln.to >= n)
            throw DimensionMismatch("line endpoint out of range");
        if (!ln.in_service) continue;
        const double z2 = ln.r * ln.r + ln.x * ln.x;
        if (z2 == 0.0)
            throw ZeroImpedanceLine("line " + std::to_string(ln.from) + "-" + std::to_string(ln.to));
        const double g = ln.r / z2;
        const double b = -ln.x / z2;
        model.G(ln.from, ln.from) += g;
        model.G(ln.to, ln.to) += g;
        model.G(ln.from, ln.to) -= g;
        model.G(ln.to, ln.from) -= g;
        model.B(ln.from, ln.from) += b;
        model.B(ln.to, ln.to) += b;
        model.B(ln.from, ln.to) -= b;
        model.B(ln.to, ln.from) -= b;
        connected[ln.from] = true;
        connected[ln.to] = true;
    }
    for (const Shunt& sh : shunts) {
        if (sh.bus < 0 || sh.bus >= n) throw DimensionMismatch("shunt bus out of range");
        model.G(sh.bus, sh.bus) += sh.g;
        model.B(sh.bus, sh.bus) += sh.b;
    }
    if (n > 1) {
        for (int i = 0; i < n; ++i) {
            if (!connected[i] && bus_roles[i] != BusRole::Slack)
                throw IslandedBusDetected("bus " + std::to_string(i));
        }
    }
    return model;
}

/// Bus injections P_i, Q_i from voltage magnitudes and phasor angles.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> injections(const Eigen::VectorXd& V,
                                                              const Eigen::VectorXd& theta,
                                                              const NetworkModel& model) {
    const int n = model.n_bus;
    if (V.size() != n || theta.size() != n) throw DimensionMismatch("injections: V/theta size");
    Eigen::VectorXd P = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd Q = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        double p = 0.0, q = 0.0;
        for (int j = 0; j < n; ++j) {
            const double dth = theta(i) - theta(j);
            const double c = std::cos(dth), s = std::sin(dth);
            p += V(j) * (model.G(i, j) * c + model.B(i, j) * s);
            q += V(j) * (model.G(i, j) * s - model.B(i, j) * c);
        }
        P(i) = V(i) * p;
        Q(i) = V(i) * q;
    }
    return {P, Q};
}

/// Analytic power-flow Jacobian [dP/dtheta, dP/dV; dQ/dtheta, dQ/dV], 2n x 2n.
inline Eigen::MatrixXd power_flow_jacobian(const Eigen::VectorXd& V, const Eigen::VectorXd& theta,
                                           const NetworkModel& model) {
    const int n = model.n_bus;
    if (V.size() != n || theta.size() != n) throw DimensionMismatch("jacobian: V/theta size");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        double dp_dthi = 0.0, dp_dvi = 0.0, dq_dthi = 0.0, dq_dvi = 0.0;
        for (int j = 0; j < n; ++j) {
            const double dth = theta(i) - theta(j);
            const double c = std::cos(dth), s = std::sin(dth);
            const double gc_bs = model.G(i, j) * c + model.B(i, j) * s;
            const double gs_bc = model.G(i, j) * s - model.B(i, j) * c;
            if (j != i) {
                J(i, j) = V(i) * V(j) * gs_bc;            // dP_i/dtheta_j
                J(i, n + j) = V(i) * gc_bs;               // dP_i/dV_j
                J(n + i, j) = -V(i) * V(j) * gc_bs;       // dQ_i/dtheta_j
                J(n + i, n + j) = V(i) * gs_bc;           // dQ_i/dV_j
                dp_dthi += -V(i) * V(j) * gs_bc;
                dq_dthi += V(i) * V(j) * gc_bs;
            }
            dp_dvi += V(j) * gc_bs;
            dq_dvi += V(j) * gs_bc;
        }
        J(i, i) = dp_dthi;
        J(i, n + i) = dp_dvi + V(i) * model.G(i, i);
        J(n + i, i) = dq_dthi;
        J(n + i, n + i) = dq_dvi - V(i) * model.B(i, i);
    }
    return J;
}

/// Newton-Raphson power flow with fixed (V, theta) at DER/slack buses and
/// (P, Q) demand at load buses. Converged when max mismatch < tol.
inline BusSolution solve_power_flow(const NetworkModel& model, const PowerFlowBoundary& boundary,
                                    const BusSolution& guess, double tol = 1e-8,
                                    int max_iter = 50) {
    const int n = model.n_bus;
    if (static_cast<int>(boundary.fixed.size()) != n)
        throw DimensionMismatch("boundary size != n_bus");

    Eigen::VectorXd V = guess.V.size() == n ? guess.V : Eigen::VectorXd::Ones(n);
    Eigen::VectorXd th = guess.theta.size() == n ? guess.theta : Eigen::VectorXd::Zero(n);
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
        if (boundary.fixed[i]) {
            V(i) = boundary.V_fixed(i);
            th(i) = boundary.theta_fixed(i);
        } else {
            free_idx.push_back(i);
        }
    }
    const int m = static_cast<int>(free_idx.size());

    BusSolution sol;
    for (int it = 0; it <= max_iter; ++it) {
        auto [P, Q] = injections(V, th, model);
        Eigen::VectorXd mismatch(2 * m);
        for (int k = 0; k < m; ++k) {
            const int i = free_idx[k];
            mismatch(k) = P(i) + boundary.P_load(i);
            mismatch(m + k) = Q(i) + boundary.Q_load(i);
        }
        if (m == 0 || mismatch.cwiseAbs().maxCoeff() < tol) {
            sol.V = V;
            sol.theta = th;
            sol.P_inj = P;
            sol.Q_inj = Q;
            sol.iterations = it;
            return sol;
        }
        if (it == max_iter) break;

        const Eigen::MatrixXd Jfull = power_flow_jacobian(V, th, model);
        Eigen::MatrixXd J(2 * m, 2 * m);
        for (int a = 0; a < m; ++a) {
            for (int b = 0; b < m; ++b) {
                J(a, b) = Jfull(free_idx[a], free_idx[b]);
                J(a, m + b) = Jfull(free_idx[a], n + free_idx[b]);
                J(m + a, b) = Jfull(n + free_idx[a], free_idx[b]);
                J(m + a, m + b) = Jfull(n + free_idx[a], n + free_idx[b]);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) throw SingularJacobian("power flow Jacobian singular");
        const Eigen::VectorXd step = lu.solve(-mismatch);
        if (!step.allFinite()) throw SingularJacobian("non-finite Newton step");
        for (int k = 0; k < m; ++k) {
            th(free_idx[k]) += step(k);
            V(free_idx[k]) += step(m + k);
        }
    }
    throw NonConvergence("power flow did not converge in " + std::to_string(max_iter) +
                         " iterations");
}

}  // namespace akooc
