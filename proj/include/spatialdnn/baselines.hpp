#pragma once

// Comparison estimators: Nadaraya-Watson kernel regression and an additive
// model of penalized cubic B-splines fitted by backfitting.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace spatialdnn::baselines {

enum class KernelKind { gaussian, epanechnikov };

struct KernelSpec {
    KernelKind kind = KernelKind::gaussian;
    double bandwidth = 1.0;

    void validate() const;
};

struct NwModel {
    Eigen::MatrixXd x;  // training covariates, one row per observation
    Eigen::VectorXd y;
    KernelSpec kernel;
};

[[nodiscard]] NwModel nw_fit(Eigen::MatrixXd x, Eigen::VectorXd y, KernelSpec kernel);

/// Kernel-weighted mean of the training responses. Falls back to the response
/// of the nearest training covariate when every kernel weight is zero.
[[nodiscard]] double nw_predict(const NwModel& model, std::span<const double> x);
[[nodiscard]] Eigen::VectorXd nw_predict_batch(const NwModel& model, const Eigen::MatrixXd& x);

enum class BandwidthRule { rule_of_thumb, cv };

/// n^{-1/(4+d)} times the mean per-coordinate standard deviation.
[[nodiscard]] double rule_of_thumb_bandwidth(const Eigen::MatrixXd& x);

/// Ten log-spaced candidates from h0/5 to 5*h0.
[[nodiscard]] std::vector<double> bandwidth_grid(double h0);

/// Cross-validation uses at most this many (randomly chosen) observations.
inline constexpr Eigen::Index kBandwidthCvMaxRows = 2000;

[[nodiscard]] double bandwidth_select(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, BandwidthRule rule,
                                      KernelKind kind = KernelKind::gaussian, std::uint64_t seed = 0);

/// One fitted additive component g_j on [lo, hi]; linear beyond the ends.
struct SplineComponent {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> knots;  // full clamped knot vector on the unit interval
    Eigen::VectorXd coef;       // empty for a constant covariate
    double offset = 0.0;        // subtracted so the training mean is zero
    double value_lo = 0.0, value_hi = 0.0;
    double slope_lo = 0.0, slope_hi = 0.0;

    [[nodiscard]] double operator()(double x) const;
};

struct GamConfig {
    int knots = -1;                  // interior knots per covariate; -1 -> min(20, n/4)
    double penalty = -1.0;           // lambda; negative -> chosen by 5-fold CV over penalty_grid
    std::vector<double> penalty_grid{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    int max_sweeps = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;
};

struct GamModel {
    double intercept = 0.0;
    std::vector<SplineComponent> components;
    double penalty = 0.0;
    bool converged = false;
    int sweeps = 0;
    std::vector<double> rss_trace;        // training RSS after each sweep
    std::vector<double> objective_trace;  // RSS/n + penalty terms after each sweep
};

[[nodiscard]] GamModel gam_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GamConfig& config = {});
[[nodiscard]] double gam_predict(const GamModel& model, std::span<const double> x);
[[nodiscard]] Eigen::VectorXd gam_predict_batch(const GamModel& model, const Eigen::MatrixXd& x);

/// Clamped cubic B-spline basis (values) on `knots` at u in [0, 1].
[[nodiscard]] Eigen::VectorXd bspline_basis(const std::vector<double>& knots, double u);
/// Derivative of order 1 or 2 of every basis function at u.
[[nodiscard]] Eigen::VectorXd bspline_basis_derivative(const std::vector<double>& knots, double u, int order);

[[nodiscard]] nlohmann::json to_json(const NwModel& model);
[[nodiscard]] nlohmann::json to_json(const GamModel& model);
[[nodiscard]] GamModel gam_from_json(const nlohmann::json& doc);

}  // namespace spatialdnn::baselines
