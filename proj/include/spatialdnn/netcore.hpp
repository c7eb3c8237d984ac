#pragma once

// Sparse ReLU feedforward networks with shifted activations, trained by
// mini-batch Adam followed by an l1 proximal (soft-threshold) step.
//
//   f(x) = W_L s_{v_L}( ... W_1 s_{v_1}(W_0 x) ),   s_v(z) = max(0, z - v)
//
// There is no output bias and no shift on the input layer.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spatialdnn::net {

struct NetworkShape {
    /// (p_0, ..., p_{L+1}); p_0 is the input dimension and p_{L+1} must be 1.
    std::vector<int> widths;

    void validate() const;
    [[nodiscard]] int depth() const noexcept { return static_cast<int>(widths.size()) - 2; }
    [[nodiscard]] int input_dim() const noexcept { return widths.front(); }

    /// d inputs, `depth` hidden layers of equal `width`, scalar output.
    [[nodiscard]] static NetworkShape uniform(int input_dim, int depth, int width);
};

struct NetworkParams {
    std::vector<Eigen::MatrixXd> weights;  // W_0..W_L, W_l is p_{l+1} x p_l
    std::vector<Eigen::VectorXd> shifts;   // v_1..v_L, shifts[l-1] has length p_l

    [[nodiscard]] NetworkShape shape() const;
    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] NetworkParams zeros_like() const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double l1_lambda = 1e-4;
    int epochs = 500;
    int batch_size = 32;
    double clamp = 10.0;  // F, applied to predictions only
    std::uint64_t seed = 0;
    int restarts = 3;

    void validate() const;
};

struct FitResult {
    NetworkParams params;
    std::vector<double> loss_trace;  // per-epoch mean mini-batch MSE of the selected restart
    double final_mse = 0.0;          // full-data training MSE of the selected restart
    std::size_t tau_hat = 0;         // exact nonzero count after the last proximal step
    double delta_hat = 0.0;          // restart-gap proxy for the optimisation gap, not the true gap
    std::vector<double> restart_mse;
    TrainConfig selected_config;
};

[[nodiscard]] NetworkParams init_params(const NetworkShape& shape, std::uint64_t seed);

[[nodiscard]] double forward(const NetworkParams& params, std::span<const double> x,
                             std::optional<double> clamp = std::nullopt);

/// Row i of `x` is one input; returns one prediction per row.
[[nodiscard]] Eigen::VectorXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& x,
                                            std::optional<double> clamp = std::nullopt);

struct LossAndGrads {
    double mse = 0.0;
    NetworkParams grads;
};

/// Mean squared error over the batch and its exact gradient. The ReLU
/// derivative at 0 is taken as 0. No clamping.
[[nodiscard]] LossAndGrads loss_and_grads(const NetworkParams& params, const Eigen::MatrixXd& x,
                                          const Eigen::VectorXd& y);

struct AdamState {
    NetworkParams first_moment;
    NetworkParams second_moment;
    long step = 0;

    [[nodiscard]] static AdamState fresh(const NetworkParams& params);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(NetworkParams& params, AdamState& state, const NetworkParams& grads, const TrainConfig& config);

/// Soft-thresholds every weight entry; shifts are left untouched.
[[nodiscard]] NetworkParams prox_l1(NetworkParams params, double threshold);
void prox_l1_inplace(NetworkParams& params, double threshold);

/// Trains `config.restarts` seeded networks and keeps the one with the lowest
/// final training MSE. Rows of `x` are observations.
[[nodiscard]] FitResult fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const NetworkShape& shape,
                            const TrainConfig& config);

/// Number of weight and shift entries with |entry| > tol.
[[nodiscard]] std::size_t sparsity(const NetworkParams& params, double tol);

struct MembershipReport {
    bool max_norm_ok = false;  // max_j (|W_j|_inf + |v_j|_inf) <= 1
    bool sparsity_ok = false;  // sparsity(params, tol) <= tau
    bool clamp_enabled = false;
    double max_norm = 0.0;
    std::size_t nonzeros = 0;
};

[[nodiscard]] MembershipReport class_check(const NetworkParams& params, std::size_t tau,
                                           std::optional<double> clamp, double tol);

inline constexpr int kJsonFormatVersion = 1;

[[nodiscard]] nlohmann::json to_json(const NetworkParams& params);
[[nodiscard]] NetworkParams params_from_json(const nlohmann::json& doc);

}  // namespace spatialdnn::net
