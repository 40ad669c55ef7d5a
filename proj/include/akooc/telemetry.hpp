#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "akooc/errors.hpp"

namespace akooc {

/// Declared neighbor pair used to impute one missing DER's measurements.
struct ImputationRule {
    int missing = -1;
    int neighbor_a = -1;
    int neighbor_b = -1;
};

struct TelemetryConfig {
    double noise_std = 0.0;    // p.u., Gaussian, per channel
    double delay_mean = 0.0;   // s, control-path delay
    double delay_std = 0.0;    // s
    std::vector<ImputationRule> missing;
    std::uint64_t rng_seed = 0;
};

/// measurement = truth + N(0, noise_std^2) i.i.d. per channel.
inline Eigen::VectorXd sample_pmu(const Eigen::VectorXd& truth, double noise_std,
                                  std::mt19937_64& rng) {
    if (noise_std <= 0.0) return truth;
    std::normal_distribution<double> dist(0.0, noise_std);
    Eigen::VectorXd out = truth;
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += dist(rng);
    return out;
}

/// Control-path delay sample, truncated at zero from below.
inline double sample_delay(const TelemetryConfig& cfg, std::mt19937_64& rng) {
    if (cfg.delay_mean == 0.0 && cfg.delay_std == 0.0) return 0.0;
    std::normal_distribution<double> dist(cfg.delay_mean, cfg.delay_std);
    return std::max(0.0, dist(rng));
}

/// Convex-combination imputation for missing DER channels. Measurements are
/// stacked [dtheta-block; dv-block] over n_der DERs; both channels of a
/// missing DER are replaced by (1-r) x_a + r x_b with the same r ~ U(0,1),
/// redrawn each call.
inline Eigen::VectorXd impute_missing(const Eigen::VectorXd& measurements,
                                      const std::vector<ImputationRule>& rules, int n_der,
                                      std::mt19937_64& rng) {
    if (measurements.size() != 2 * n_der)
        throw DimensionMismatch("impute_missing: expected 2*n_der channels");
    Eigen::VectorXd out = measurements;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const ImputationRule& rule : rules) {
        if (rule.missing < 0 || rule.missing >= n_der || rule.neighbor_a < 0 ||
            rule.neighbor_a >= n_der || rule.neighbor_b < 0 || rule.neighbor_b >= n_der ||
            rule.neighbor_a == rule.missing || rule.neighbor_b == rule.missing)
            throw InsufficientNeighbors("missing DER " + std::to_string(rule.missing));
        const double r = unit(rng);
        for (int ch = 0; ch < 2; ++ch) {
            const int m = ch * n_der + rule.missing;
            const int a = ch * n_der + rule.neighbor_a;
            const int b = ch * n_der + rule.neighbor_b;
            out(m) = (1.0 - r) * measurements(a) + r * measurements(b);
        }
    }
    return out;
}

}  // namespace akooc
