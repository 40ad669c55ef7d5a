#pragma once

#include <Eigen/Dense>

namespace akooc {

/// Moore-Penrose pseudoinverse via SVD with relative singular value truncation.
/// Singular values below rel_tol * sigma_max are dropped. A zero matrix maps to
/// the zero pseudoinverse.
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rel_tol = 1e-10) {
    if (m.size() == 0) return m.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = rel_tol * (sv.size() > 0 ? sv(0) : 0.0);
    Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) inv_sv(i) = 1.0 / sv(i);
    }
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

/// Tikhonov-regularized pseudoinverse: singular values are inverted as
/// sigma/(sigma^2 + (rel_ridge*sigma_max)^2), shrinking the contribution of
/// weakly observed directions instead of amplifying them. rel_ridge = 0
/// reduces to the exact Moore-Penrose pseudoinverse.
inline Eigen::MatrixXd pinv_ridge(const Eigen::MatrixXd& m, double rel_ridge) {
    if (rel_ridge <= 0.0) return pinv(m);
    if (m.size() == 0) return m.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double lam = rel_ridge * (sv.size() > 0 ? sv(0) : 0.0);
    Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 0.0) inv_sv(i) = sv(i) / (sv(i) * sv(i) + lam * lam);
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

/// Spectral radius (largest eigenvalue magnitude) of a square matrix.
inline double spectral_radius(const Eigen::MatrixXd& a) {
    if (a.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace akooc
