#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "akooc/errors.hpp"
#include "akooc/koopman.hpp"
#include "akooc/linalg.hpp"

namespace akooc {

/// Fixed-point iteration of the discrete Riccati recursion
/// S <- Q + A^T (S - S B (R + B^T S B)^{-1} B^T S) A from S_0 = Q,
/// evaluated in the algebraically equivalent Joseph form
/// S <- Q + K^T R K + (A - B K)^T S (A - B K) with K = (R + B^T S B)^{-1} B^T S A,
/// which keeps the iterates symmetric positive semidefinite; the plain form
/// loses definiteness to rounding when the open loop is strongly unstable.
/// Stops when the max-norm step is below tol relative to max(1, |S|_inf).
inline Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                  double tol = 1e-10, int max_iter = 10000) {
    if (!A.allFinite() || !B.allFinite()) throw RiccatiDivergence("non-finite A/B");
    Eigen::MatrixXd S = Q;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd inner = R + B.transpose() * S * B;
        const Eigen::MatrixXd K = inner.ldlt().solve(B.transpose() * S * A);
        const Eigen::MatrixXd Acl = A - B * K;
        Eigen::MatrixXd S_next =
            Q + K.transpose() * R * K + Acl.transpose() * S * Acl;
        S_next = 0.5 * (S_next + S_next.transpose().eval());
        const double delta = (S_next - S).cwiseAbs().maxCoeff();
        S = S_next;
        if (!S.allFinite() || S.cwiseAbs().maxCoeff() > 1e12)
            throw RiccatiDivergence("iterates diverged");
        if (delta <= tol * std::max(1.0, S.cwiseAbs().maxCoeff())) return S;
    }
    throw RiccatiDivergence("no convergence in " + std::to_string(max_iter) + " iterations");
}

/// K = (B^T S B + R)^{-1} B^T S A.
inline Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const Eigen::MatrixXd& S, const Eigen::MatrixXd& R) {
    const Eigen::MatrixXd inner = B.transpose() * S * B + R;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(inner);
    if (!lu.isInvertible()) throw SingularInnerMatrix("B^T S B + R not invertible");
    return lu.solve(B.transpose() * S * A);
}

/// u = clamp(-K chi, lb, ub), element-wise.
inline Eigen::VectorXd compute_control(const Eigen::MatrixXd& K, const Eigen::VectorXd& chi,
                                       const Eigen::VectorXd& u_lb, const Eigen::VectorXd& u_ub) {
    Eigen::VectorXd u = -K * chi;
    return u.cwiseMax(u_lb).cwiseMin(u_ub);
}

inline double closed_loop_spectral_radius(const Eigen::MatrixXd& A_C, const Eigen::MatrixXd& B_C,
                                          const Eigen::MatrixXd& K) {
    return spectral_radius(A_C - B_C * K);
}

struct DiscMargin {
    double lower = 0.0;  // G_L
    double upper = 0.0;  // G_U
    bool valid = false;  // false when the discriminant is negative (margin undefined)
};

/// Per-input-channel disc gain margins of the discrete LQR design:
/// G_{L,U} = r_i/mu -/+ sqrt((1 + r_i/mu)^2 + (rho - r_i)/mu - 1) with
/// rho = sigma_min[Q] / sigma_max[K]^2 and mu = sigma_max[B_C^T S B_C].
inline std::vector<DiscMargin> disc_margins(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                            const Eigen::MatrixXd& K, const Eigen::MatrixXd& B_C,
                                            const Eigen::MatrixXd& S) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_q(Q);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_k(K);
    const double sk = svd_k.singularValues()(0);
    const double rho = sk > 0.0 ? svd_q.singularValues().minCoeff() / (sk * sk) : 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_m(B_C.transpose() * S * B_C);
    const double mu = svd_m.singularValues()(0);
    std::vector<DiscMargin> margins;
    margins.reserve(R.rows());
    for (Eigen::Index i = 0; i < R.rows(); ++i) {
        const double ri = R(i, i);
        DiscMargin m;
        if (mu > 0.0) {
            const double disc = (1.0 + ri / mu) * (1.0 + ri / mu) + (rho - ri) / mu - 1.0;
            if (disc >= 0.0) {
                m.lower = ri / mu - std::sqrt(disc);
                m.upper = ri / mu + std::sqrt(disc);
                m.valid = true;
            }
        }
        margins.push_back(m);
    }
    return margins;
}

enum class ControllerKind {
    Akooc,
    KoopmanLinear,       // C_M forced to 0: LQR on the linear-basis fit
    KoopmanFullNoEnsemble,
    Pi,
    PiAdaptive,
    SecondaryDroop,
    None,
};

/// LQR cost diagonals and synthesis knobs. Ordering of the lifted state chi is
/// [dtheta; dv; sin; cos; domega] blocks.
struct LqrCosts {
    double q_theta = 1e-5;
    double q_v = 1.0;
    double q_sin = 0.0;
    double q_cos = 0.0;
    double q_omega = 1e-5;
    double r_p = 1.0;
    double r_q = 1.0;
    double u_bound = 1.0 / 15.0;  // symmetric saturation, p.u.
    double dare_tol = 1e-10;
    int dare_max_iter = 10000;
    double eps_q = 0.0;  // added as eps_q*I on Riccati divergence, off by default
};

inline Eigen::MatrixXd lifted_cost_matrix(const LqrCosts& c, int n_der) {
    Eigen::VectorXd d(5 * n_der);
    d.segment(0, n_der).setConstant(c.q_theta);
    d.segment(n_der, n_der).setConstant(c.q_v);
    d.segment(2 * n_der, n_der).setConstant(c.q_sin);
    d.segment(3 * n_der, n_der).setConstant(c.q_cos);
    d.segment(4 * n_der, n_der).setConstant(c.q_omega);
    return d.asDiagonal();
}

inline Eigen::MatrixXd input_cost_matrix(const LqrCosts& c, int n_der) {
    Eigen::VectorXd d(2 * n_der);
    d.segment(0, n_der).setConstant(c.r_p);
    d.segment(n_der, n_der).setConstant(c.r_q);
    return d.asDiagonal();
}

struct StepDiagnostics {
    bool warmup = false;
    bool fallback = false;
    double regression_error = std::numeric_limits<double>::quiet_NaN();
    int learner_iterations = 0;
    double spectral_radius = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = 0.0;
    std::string fail_reason;  // empty unless the design step failed
};

/// Secondary controller running the identified-model LQR loop each step:
/// window assembly, C_M/B_M estimation, iterative ensemble learning, model
/// assembly, Riccati synthesis, saturated state feedback. On identification
/// or synthesis failure (including a non-Schur closed loop) the previous
/// gain is held and the step is flagged as fallback.
class KoopmanLqrController {
public:
    KoopmanLqrController(ControllerKind kind, int n_der, const Eigen::MatrixXd& B,
                         const LearnerParams& learner, const LqrCosts& costs, double ts)
        : kind_(kind), n_der_(n_der), B_(B), learner_(learner), costs_(costs), ts_(ts) {}

    /// x_hist: measured state samples at secondary ticks (newest last);
    /// u_hist: applied controls, u_hist[j] in force between samples j and j+1.
    Eigen::VectorXd step(const std::vector<Eigen::VectorXd>& x_hist,
                         const std::vector<Eigen::VectorXd>& u_hist, StepDiagnostics& diag) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto stamp = [&t0, &diag] {
            diag.wall_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
        };
        diag = StepDiagnostics{};
        Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n_der_);
        if (static_cast<int>(x_hist.size()) < learner_.window + 1) {
            diag.warmup = true;
            stamp();
            return u;
        }
        bool designed = false;
        try {
            const KoopmanDataset ds = assemble_window(x_hist, u_hist, learner_.window, ts_);
            designed = design(ds, diag);
        } catch (const Error& e) {
            designed = false;
            diag.fail_reason = e.what();
        }
        if (!designed) {
            diag.fallback = true;
            if (!have_gain_) {
                diag.warmup = true;
                stamp();
                return u;  // nothing to hold yet
            }
        }
        const Eigen::VectorXd chi = latest_chi(x_hist);
        const Eigen::VectorXd lb = Eigen::VectorXd::Constant(2 * n_der_, -costs_.u_bound);
        const Eigen::VectorXd ub = Eigen::VectorXd::Constant(2 * n_der_, costs_.u_bound);
        u = compute_control(K_, chi.head(K_.cols()), lb, ub);
        if (!u.allFinite()) u.setZero();
        stamp();
        return u;
    }

    const EnsembleModel& model() const { return model_; }
    bool has_gain() const { return have_gain_; }
    const Eigen::MatrixXd& gain() const { return K_; }

private:
    bool design(const KoopmanDataset& ds, StepDiagnostics& diag) {
        try {
            if (kind_ == ControllerKind::KoopmanLinear) {
                // Linear-basis special case: C_M = 0, plain EDMDc on x.
                model_.A_E = fit_linear_only(ds, B_, learner_.ridge);
                model_.B = B_;
                model_.C_M = Eigen::MatrixXd::Zero(2 * n_der_, 3 * n_der_);
                model_.B_M_hat = Eigen::MatrixXd::Zero(3 * n_der_, 2 * n_der_);
                model_.A_EM = Eigen::MatrixXd::Zero(3 * n_der_, 3 * n_der_);
                model_.A_C = model_.A_E;
                model_.B_C = B_;
                model_.regression_error =
                    (ds.Xp - model_.A_E * ds.X - B_ * ds.U).norm() /
                    std::sqrt(std::max(1.0, static_cast<double>(ds.window - ds.X.rows())));
                diag.regression_error = model_.regression_error;
                const Eigen::MatrixXd Q = lifted_cost_matrix(costs_, n_der_)
                                              .topLeftCorner(2 * n_der_, 2 * n_der_);
                return synthesize(model_.A_C, model_.B_C, Q, diag);
            }
            if (kind_ == ControllerKind::KoopmanFullNoEnsemble) {
                std::tie(model_.A_C, model_.B_C) = fit_full_no_ensemble(ds, learner_.ridge);
                model_.B = B_;
                model_.regression_error =
                    (ds.Xp - (model_.A_C * stack_chi(ds) + model_.B_C * ds.U).topRows(2 * n_der_))
                        .norm() /
                    std::sqrt(std::max(1.0, static_cast<double>(ds.window - ds.X.rows())));
                diag.regression_error = model_.regression_error;
                return synthesize(model_.A_C, model_.B_C, lifted_cost_matrix(costs_, n_der_),
                                  diag);
            }
            // Full AKOOC pipeline.
            auto [cm, bm] = estimate_cm_bm(ds.X, ds.Z, B_, learner_.ridge, learner_.cm_tol);
            if (!warm_) {
                A_E_warm_ = Eigen::MatrixXd::Identity(2 * n_der_, 2 * n_der_);
                A_EM_warm_ = Eigen::MatrixXd::Identity(3 * n_der_, 3 * n_der_);
            }
            // Continue the relaxation schedule across windows (capped so the
            // step size never vanishes): one N-sample window is far too short
            // to re-solve the fit from scratch, so each window applies a
            // bounded correction to the running model instead.
            const int l0 = std::min(l_cum_, learner_.l_max);
            IterateResult it = iterate_ensemble(ds, A_E_warm_, A_EM_warm_, cm, bm, B_, learner_, l0);
            A_E_warm_ = it.A_E;
            A_EM_warm_ = it.A_EM;
            l_cum_ += it.iterations;
            warm_ = true;
            model_.A_E = it.A_E;
            model_.A_EM = it.A_EM;
            model_.C_M = cm;
            model_.B_M_hat = bm;
            model_.B = B_;
            model_.regression_error = it.error_trace.back();
            model_.iterations_used = it.iterations;
            std::tie(model_.A_C, model_.B_C) = assemble_koopman(it.A_E, it.A_EM, cm, bm, B_, learner_.cm_tol);
            if (std::getenv("AKOOC_DEBUG"))
                std::fprintf(stderr, "fit rho(A_C)=%.3f |A_E|=%.2f |A_EM|=%.2f l0=%d\n",
                             spectral_radius(model_.A_C), it.A_E.norm(), it.A_EM.norm(), l0);
            diag.regression_error = model_.regression_error;
            diag.learner_iterations = it.iterations;
            return synthesize(model_.A_C, model_.B_C, lifted_cost_matrix(costs_, n_der_), diag);
        } catch (const Error& e) {
            diag.fail_reason = e.what();
            return false;
        }
    }

    bool synthesize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                    const Eigen::MatrixXd& Q, StepDiagnostics& diag) {
        // Identification sanity gate: the plant under the adaptive reference
        // update has open-loop spectral radius ~1 (free common angle mode);
        // a window fit far above that is noise overfit, not dynamics, and
        // the optimal gain for such a model rails the actuators. Reject it.
        const double rho_open = spectral_radius(A);
        if (!std::isfinite(rho_open) || rho_open > 1.1) {
            diag.fail_reason = "implausible open-loop spectrum (rho=" + std::to_string(rho_open) + ")";
            return false;
        }
        const Eigen::MatrixXd R = input_cost_matrix(costs_, n_der_);
        Eigen::MatrixXd S;
        try {
            S = solve_dare(A, B, Q, R, costs_.dare_tol, costs_.dare_max_iter);
        } catch (const RiccatiDivergence& e) {
            diag.fail_reason = e.what();
            if (costs_.eps_q <= 0.0) return false;
            const Eigen::MatrixXd Qr =
                Q + costs_.eps_q * Eigen::MatrixXd::Identity(Q.rows(), Q.cols());
            try {
                S = solve_dare(A, B, Qr, R, costs_.dare_tol, costs_.dare_max_iter);
            } catch (const RiccatiDivergence&) {
                return false;
            }
        }
        Eigen::MatrixXd K;
        try {
            K = lqr_gain(A, B, S, R);
        } catch (const SingularInnerMatrix&) {
            return false;
        }
        const double rho = closed_loop_spectral_radius(A, B, K);
        diag.spectral_radius = rho;
        if (!std::isfinite(rho) || rho >= 1.0) {  // non-Schur design
            diag.fail_reason = "non-Schur closed loop";
            return false;
        }
        K_ = K;
        S_ = S;
        have_gain_ = true;
        return true;
    }

    Eigen::MatrixXd stack_chi(const KoopmanDataset& ds) const {
        Eigen::MatrixXd chi(5 * n_der_, ds.X.cols());
        chi.topRows(2 * n_der_) = ds.X;
        chi.bottomRows(3 * n_der_) = ds.Z;
        return chi;
    }

    /// Lifted state relative to the equilibrium lift of x = 0 (whose cos
    /// block is 1, not 0), so the feedback is unbiased at the fixed point.
    Eigen::VectorXd latest_chi(const std::vector<Eigen::VectorXd>& x_hist) const {
        const Eigen::VectorXd& xk = x_hist.back();
        const Eigen::VectorXd& xp = x_hist[x_hist.size() - 2];
        Eigen::VectorXd chi(5 * n_der_);
        chi.head(2 * n_der_) = xk;
        chi.tail(3 * n_der_) = embed(xk, xp, ts_);
        chi.segment(3 * n_der_, n_der_).array() -= 1.0;
        return chi;
    }

    ControllerKind kind_;
    int n_der_;
    Eigen::MatrixXd B_;
    LearnerParams learner_;
    LqrCosts costs_;
    double ts_;
    EnsembleModel model_;
    Eigen::MatrixXd A_E_warm_, A_EM_warm_;
    bool warm_ = false;
    int l_cum_ = 0;  // continued relaxation index across windows
    Eigen::MatrixXd K_, S_;
    bool have_gain_ = false;
};

}  // namespace akooc
