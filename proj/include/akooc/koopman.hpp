#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "akooc/errors.hpp"
#include "akooc/linalg.hpp"

namespace akooc {

/// Rolling regression window. States x = [dtheta-block; dv-block] (2N_DER),
/// lifted z = [sin(dtheta); cos(dtheta); domega] (3N_DER), controls
/// u = [dP*-block; dQ*-block] (2N_DER). N-1 columns per window.
struct KoopmanDataset {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Xp;  // one-step-shifted X
    Eigen::MatrixXd Z;
    Eigen::MatrixXd Zp;
    Eigen::MatrixXd U;
    double ts = 0.0;
    int window = 0;
};

struct LearnerParams {
    int window = 10;        // N
    double gamma = 5.0;     // relaxation constant
    int n_iter = 150;       // max iterations
    double epsilon = 1e-16; // stopping threshold on |e_{l+1} - e_l|
    // Cap on the continued relaxation index in online operation. Warm-started
    // windows resume the eta_l schedule where the previous one left off, so a
    // single short noisy window can only nudge the running model; the cap
    // keeps eta_l floored at gamma/(gamma+l_max) so adaptation never freezes.
    int l_max = 3000;
    // Relative Tikhonov regularization of the least-squares steps. On an
    // N-sample window with measurement noise the exact pseudoinverse overfits
    // badly; the ridge bounds the fitted operators and shrinks unobserved
    // directions toward zero. 0 keeps the exact pseudoinverse.
    double ridge = 0.0;
    // Relative truncation for pseudoinverses of C_M (see kCmDaggerTol).
    double cm_tol = 1e-2;
};

struct EnsembleModel {
    Eigen::MatrixXd A_E;       // 2N x 2N
    Eigen::MatrixXd A_EM;      // 3N x 3N
    Eigen::MatrixXd C_M;       // 2N x 3N
    Eigen::MatrixXd B_M_hat;   // 3N x 2N
    Eigen::MatrixXd B;         // 2N x 2N, from the physical model
    Eigen::MatrixXd A_C;       // 5N x 5N
    Eigen::MatrixXd B_C;       // 5N x 2N
    double regression_error = 0.0;
    int iterations_used = 0;
};

/// Lift one state sample: z = [sin(dtheta); cos(dtheta); (dtheta - dtheta_prev)/ts]
/// with per-channel blocks over the DERs.
inline Eigen::VectorXd embed(const Eigen::VectorXd& x_k, const Eigen::VectorXd& x_prev,
                             double ts) {
    const int n = static_cast<int>(x_k.size()) / 2;
    if (x_k.size() != 2 * n || x_prev.size() != x_k.size())
        throw DimensionMismatch("embed: state size");
    Eigen::VectorXd z(3 * n);
    for (int i = 0; i < n; ++i) {
        z(i) = std::sin(x_k(i));
        z(n + i) = std::cos(x_k(i));
        z(2 * n + i) = (x_k(i) - x_prev(i)) / ts;
    }
    return z;
}

/// Build the rolling window from the newest N+1 state samples and the N-1
/// controls aligned with the X columns. u_hist[j] is the control in force
/// between x_hist[j] and x_hist[j+1].
inline KoopmanDataset assemble_window(const std::vector<Eigen::VectorXd>& x_hist,
                                      const std::vector<Eigen::VectorXd>& u_hist, int n_window,
                                      double ts) {
    const int needed = n_window + 1;
    if (static_cast<int>(x_hist.size()) < needed ||
        static_cast<int>(u_hist.size()) + 1 < static_cast<int>(x_hist.size()))
        throw InsufficientHistory("need " + std::to_string(needed) + " state samples");
    const int m = static_cast<int>(x_hist.size());
    const int mu = static_cast<int>(u_hist.size());
    const int cols = n_window - 1;
    const int nx = static_cast<int>(x_hist.back().size());
    const int nu = static_cast<int>(u_hist.back().size());

    KoopmanDataset ds;
    ds.ts = ts;
    ds.window = n_window;
    ds.X.resize(nx, cols);
    ds.Xp.resize(nx, cols);
    ds.Z.resize(3 * nx / 2, cols);
    ds.Zp.resize(3 * nx / 2, cols);
    ds.U.resize(nu, cols);
    const int base = m - needed;           // index of x_{k-N}
    const int ubase = mu - (m - 1 - base); // u aligned so u[ubase+c] drives x[base+c]
    for (int c = 0; c < cols; ++c) {
        ds.X.col(c) = x_hist[base + 1 + c];
        ds.Xp.col(c) = x_hist[base + 2 + c];
        ds.Z.col(c) = embed(x_hist[base + 1 + c], x_hist[base + c], ts);
        ds.Zp.col(c) = embed(x_hist[base + 2 + c], x_hist[base + 1 + c], ts);
        ds.U.col(c) = u_hist[ubase + 1 + c];
    }
    if (!ds.X.allFinite() || !ds.Xp.allFinite() || !ds.Z.allFinite() || !ds.Zp.allFinite() ||
        !ds.U.allFinite())
        throw InsufficientHistory("window contains non-finite samples");
    return ds;
}

/// Truncation level for pseudoinverses of C_M. C_M maps the lifted basis to
/// the linear one; its trailing singular values correspond to lifted
/// directions with almost no linear-state footprint, and inverting them
/// amplifies short-window noise into enormous A_EM / B_M_hat entries.
constexpr double kCmDaggerTol = 1e-2;

/// C_M = X Z^+, B_M_hat = C_M^+ B.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> estimate_cm_bm(const Eigen::MatrixXd& X,
                                                                  const Eigen::MatrixXd& Z,
                                                                  const Eigen::MatrixXd& B,
                                                                  double ridge = 0.0,
                                                                  double cm_tol = kCmDaggerTol) {
    if (Z.norm() == 0.0) throw DegenerateWindow("Z has rank 0");
    const Eigen::MatrixXd C_M = X * pinv_ridge(Z, ridge);
    const Eigen::MatrixXd B_M_hat = pinv(C_M, cm_tol) * B;
    return {C_M, B_M_hat};
}

/// Frobenius regression error of the ensemble model on a window, normalized
/// by 1/sqrt(N - N_r) with N_r = 2 N_DER.
inline double regression_error(const KoopmanDataset& ds, const Eigen::MatrixXd& A_E,
                               const Eigen::MatrixXd& A_EM, const Eigen::MatrixXd& C_M,
                               const Eigen::MatrixXd& B_M_hat, const Eigen::MatrixXd& B) {
    const double denom =
        std::sqrt(std::max(1.0, static_cast<double>(ds.window - ds.X.rows())));
    const Eigen::MatrixXd resid =
        ds.Xp - (A_E * ds.X + B * ds.U) - C_M * (A_EM * ds.Z + B_M_hat * ds.U);
    return resid.norm() / denom;
}

struct IterateResult {
    Eigen::MatrixXd A_E;
    Eigen::MatrixXd A_EM;
    std::vector<double> error_trace;
    int iterations = 0;
};

/// Alternating relaxed pseudoinverse updates of (A_EM, A_E) with learning
/// rate eta_l = gamma / (gamma + l), warm-started from init. Stops when
/// |e_{l+1} - e_l| <= epsilon or the iteration cap is hit. l0 offsets the
/// relaxation schedule (0 restarts it for a fresh window).
///
/// The A_EM step targets the consistent lifted image C_M^+ X' of the shifted
/// states rather than the raw Z': with exact pseudoinverses both steps are
/// then relaxed exact line minimizations of the single (jointly convex)
/// regression objective, so the error trace is non-increasing and the
/// iteration converges to a global minimizer of the ensemble residual.
inline IterateResult iterate_ensemble(const KoopmanDataset& ds, const Eigen::MatrixXd& A_E0,
                                      const Eigen::MatrixXd& A_EM0, const Eigen::MatrixXd& C_M,
                                      const Eigen::MatrixXd& B_M_hat, const Eigen::MatrixXd& B,
                                      const LearnerParams& params, int l0 = 0) {
    const Eigen::MatrixXd Zd = pinv_ridge(ds.Z, params.ridge);
    const Eigen::MatrixXd Xd = pinv_ridge(ds.X, params.ridge);
    const Eigen::MatrixXd Cd = pinv(C_M, params.cm_tol);
    const Eigen::MatrixXd Zp_hat = Cd * ds.Xp;
    const Eigen::MatrixXd TU_z = (B_M_hat + Cd * B) * ds.U;
    const Eigen::MatrixXd TU_x = (B + C_M * B_M_hat) * ds.U;

    IterateResult res;
    res.A_E = A_E0;
    res.A_EM = A_EM0;
    double e_prev = regression_error(ds, res.A_E, res.A_EM, C_M, B_M_hat, B);
    res.error_trace.push_back(e_prev);
    for (int l = 0; l < params.n_iter; ++l) {
        const double eta = params.gamma / (params.gamma + static_cast<double>(l0 + l));
        res.A_EM = (1.0 - eta) * res.A_EM +
                   eta * (Zp_hat - Cd * res.A_E * ds.X - TU_z) * Zd;
        res.A_E = (1.0 - eta) * res.A_E +
                  eta * (ds.Xp - C_M * res.A_EM * ds.Z - TU_x) * Xd;
        if (!res.A_E.allFinite() || !res.A_EM.allFinite())
            throw NonFiniteUpdate("iteration " + std::to_string(l));
        const double e = regression_error(ds, res.A_E, res.A_EM, C_M, B_M_hat, B);
        res.error_trace.push_back(e);
        res.iterations = l + 1;
        if (!std::isfinite(e)) throw NonFiniteUpdate("non-finite regression error");
        if (std::abs(e - e_prev) <= params.epsilon) break;
        e_prev = e;
    }
    return res;
}

/// Block assembly of the lifted model:
/// A_C = [[A_E, C_M A_EM], [C_M^+ A_E, A_EM]],
/// B_C = [[B + C_M B_M_hat], [B_M_hat + C_M^+ B]].
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble_koopman(
    const Eigen::MatrixXd& A_E, const Eigen::MatrixXd& A_EM, const Eigen::MatrixXd& C_M,
    const Eigen::MatrixXd& B_M_hat, const Eigen::MatrixXd& B, double cm_tol = kCmDaggerTol) {
    const Eigen::Index nx = A_E.rows();
    const Eigen::Index nz = A_EM.rows();
    if (C_M.rows() != nx || C_M.cols() != nz || B_M_hat.rows() != nz || B.rows() != nx)
        throw DimensionMismatch("assemble_koopman: block sizes");
    const Eigen::MatrixXd Cd = pinv(C_M, cm_tol);
    Eigen::MatrixXd A_C(nx + nz, nx + nz);
    A_C.topLeftCorner(nx, nx) = A_E;
    A_C.topRightCorner(nx, nz) = C_M * A_EM;
    A_C.bottomLeftCorner(nz, nx) = Cd * A_E;
    A_C.bottomRightCorner(nz, nz) = A_EM;
    Eigen::MatrixXd B_C(nx + nz, B.cols());
    B_C.topRows(nx) = B + C_M * B_M_hat;
    B_C.bottomRows(nz) = B_M_hat + Cd * B;
    return {A_C, B_C};
}

/// One-step state prediction of the ensemble model.
inline Eigen::VectorXd predict_one_step(const EnsembleModel& m, const Eigen::VectorXd& x_k,
                                        const Eigen::VectorXd& z_k, const Eigen::VectorXd& u_k) {
    return m.A_E * x_k + m.B * u_k + m.C_M * (m.A_EM * z_k + m.B_M_hat * u_k);
}

/// Dimension-normalized one-step prediction error.
inline double prediction_error(const Eigen::VectorXd& x_true, const Eigen::VectorXd& x_hat) {
    if (x_true.size() != x_hat.size()) throw DimensionMismatch("prediction_error");
    return (x_true - x_hat).norm() / std::sqrt(static_cast<double>(x_true.size()));
}

/// Fit the whole learner on one window from identity init (cold start).
inline EnsembleModel fit_ensemble(const KoopmanDataset& ds, const Eigen::MatrixXd& B,
                                  const LearnerParams& params) {
    EnsembleModel m;
    m.B = B;
    std::tie(m.C_M, m.B_M_hat) = estimate_cm_bm(ds.X, ds.Z, B, params.ridge, params.cm_tol);
    const Eigen::Index nx = ds.X.rows();
    const Eigen::Index nz = ds.Z.rows();
    IterateResult it = iterate_ensemble(ds, Eigen::MatrixXd::Identity(nx, nx),
                                        Eigen::MatrixXd::Identity(nz, nz), m.C_M, m.B_M_hat, B,
                                        params);
    m.A_E = it.A_E;
    m.A_EM = it.A_EM;
    m.regression_error = it.error_trace.back();
    m.iterations_used = it.iterations;
    std::tie(m.A_C, m.B_C) = assemble_koopman(m.A_E, m.A_EM, m.C_M, m.B_M_hat, B, params.cm_tol);
    return m;
}

/// Direct pseudoinverse fit of the linear-basis model x_{k+1} = A x_k + B u_k
/// with B known; returns A.
inline Eigen::MatrixXd fit_linear_only(const KoopmanDataset& ds, const Eigen::MatrixXd& B,
                                       double ridge = 0.0) {
    return (ds.Xp - B * ds.U) * pinv_ridge(ds.X, ridge);
}

/// Single-pass joint EDMDc fit on the full lifted state chi = [x; z] without
/// the ensemble structure: [A_C B_C] = chi' [chi; U]^+.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> fit_full_no_ensemble(
    const KoopmanDataset& ds, double ridge = 0.0) {
    const Eigen::Index nx = ds.X.rows();
    const Eigen::Index nz = ds.Z.rows();
    const Eigen::Index nu = ds.U.rows();
    const Eigen::Index cols = ds.X.cols();
    Eigen::MatrixXd lhs(nx + nz, cols), rhs(nx + nz + nu, cols);
    lhs.topRows(nx) = ds.Xp;
    lhs.bottomRows(nz) = ds.Zp;
    rhs.topRows(nx) = ds.X;
    rhs.middleRows(nx, nz) = ds.Z;
    rhs.bottomRows(nu) = ds.U;
    const Eigen::MatrixXd AB = lhs * pinv_ridge(rhs, ridge);
    return {AB.leftCols(nx + nz), AB.rightCols(nu)};
}

struct ResidualComparison {
    double e_ensemble = 0.0;
    double e_linear_only = 0.0;
    double e_nonlinear_only = 0.0;
};

/// Frobenius residuals of the converged ensemble vs each individually refit
/// model on the same window (linear basis alone, nonlinear basis alone).
inline ResidualComparison residual_comparison(const KoopmanDataset& ds, const EnsembleModel& m) {
    ResidualComparison rc;
    rc.e_ensemble = (ds.Xp - (m.A_E * ds.X + m.B * ds.U) -
                     m.C_M * (m.A_EM * ds.Z + m.B_M_hat * ds.U))
                        .norm();
    const Eigen::MatrixXd A_lin = (ds.Xp - m.B * ds.U) * pinv(ds.X);
    rc.e_linear_only = (ds.Xp - (A_lin * ds.X + m.B * ds.U)).norm();
    const Eigen::MatrixXd A_nl =
        pinv(m.C_M) * (ds.Xp - m.C_M * m.B_M_hat * ds.U) * pinv(ds.Z);
    rc.e_nonlinear_only = (ds.Xp - m.C_M * (A_nl * ds.Z + m.B_M_hat * ds.U)).norm();
    return rc;
}

}  // namespace akooc
