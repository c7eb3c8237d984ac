#pragma once

// Closed-form calculators for the compositional smoothness bookkeeping and
// the risk bounds of the sparse-network estimator. Every bound is an order
// of magnitude statement: suppressed universal constants are set to 1, so the
// outputs are scales, not values.

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace spatialdnn::theory {

/// Hoelder smoothness index; infinite smoothness is a distinct state, never a
/// large float.
class Smoothness {
public:
    constexpr Smoothness() = default;
    constexpr explicit Smoothness(double value) : value_(value) {}
    [[nodiscard]] static constexpr Smoothness infinite() {
        Smoothness s;
        s.infinite_ = true;
        return s;
    }

    [[nodiscard]] constexpr bool is_infinite() const noexcept { return infinite_; }
    /// Finite value; only meaningful when !is_infinite().
    [[nodiscard]] constexpr double value() const noexcept { return value_; }
    /// min(beta, 1), with infinity mapped to 1.
    [[nodiscard]] constexpr double capped() const noexcept { return infinite_ ? 1.0 : (value_ < 1.0 ? value_ : 1.0); }
    /// Value as a double, +inf for the infinite marker.
    [[nodiscard]] constexpr double as_double() const noexcept {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

    friend constexpr bool operator==(const Smoothness&, const Smoothness&) = default;

private:
    double value_ = 1.0;
    bool infinite_ = false;
};

using LayerFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Compositional structure f = g_{L*} o ... o g_0.
struct CsSpec {
    int depth = 0;                   // L*
    std::vector<int> r;              // r_0..r_{L*+1}, r_{L*+1} = 1
    std::vector<int> r_active;       // r~_0..r~_{L*}
    std::vector<Smoothness> beta;    // beta_0..beta_{L*}
    std::vector<double> a, b;        // a_0..a_{L*+1}, b_0..b_{L*+1}: layer domains [a_i, b_i]
    std::vector<double> c;           // C_0..C_{L*}
    std::vector<LayerFn> layers;     // optional g_0..g_{L*}

    void validate() const;
};

struct IntrinsicSummary {
    std::vector<Smoothness> beta_star_per_layer;
    int argmin = 0;  // i*
    Smoothness beta_star;
    int r_star = 1;
    /// prod_{l=1}^{L*} (beta_l ^ 1), the exponent of the depth term.
    double upper_layer_exponent = 1.0;
    bool degenerate = false;  // every beta infinite
};

[[nodiscard]] IntrinsicSummary intrinsic(const CsSpec& spec);

/// Evaluates the composition, checking every intermediate against the
/// declared layer domain (tolerance 1e-9).
[[nodiscard]] double eval_cs(const CsSpec& spec, const Eigen::VectorXd& z);

/// log covering number bound (1+tau) log(2^{5+2L} delta^{-1} (L+1) tau^{2L} d^2).
[[nodiscard]] double covering_bound(double depth, double tau, double input_dim, double delta);

struct BoundInputs {
    double n = 100;
    double tau = 1;
    double depth = 1;  // L
    double width = 1;  // N
    double m = 1;
    double input_dim = 1;  // d
    double delta = 1;
    double eps = 1;
    double sigma = 1;
    double tr_gamma = 100;
    double tr_gamma_sq = 100;
};

/// Stochastic-error term of the oracle inequality (scale).
[[nodiscard]] double zeta_bound(const BoundInputs& in);

struct RateTerms {
    double approx_depth = 0.0;  // (N 2^{-L})^{2 prod beta_l ^ 1}
    double approx_width = 0.0;  // N^{-2 beta*/r*}
    double stochastic = 0.0;    // (tr(G^2)+n)(LN log(Ln^2) + L^2 N log(LN)) / n^2
    double optimisation = 0.0;  // supplied gap proxy
    double total = 0.0;
};

/// Convergence-rate scale with the optimisation gap replaced by `delta_proxy`.
[[nodiscard]] RateTerms varsigma_rate(const BoundInputs& in, const IntrinsicSummary& summary, double delta_proxy);

struct ApproxSizing {
    int depth = 0;         // L = 3 L* + sum L_i
    double width = 0.0;    // 6 eta N
    double tau_cap = 0.0;  // sum r_{i+1} (tau_i + 4)
    double eta = 0.0;
    std::vector<int> layer_depths;    // L_i
    std::vector<double> layer_tau;    // tau_i
    std::vector<double> c_tilde;      // C~_i
};

struct ApproxBound {
    double bound = 0.0;
    double log_bound = 0.0;
    ApproxSizing sizing;
};

/// Minimum width N accepted by approx_bound for `spec`.
[[nodiscard]] double approx_min_width(const CsSpec& spec);

/// Sup-norm approximation bound for a compositional function by a sparse
/// ReLU network, with the architecture that achieves it.
[[nodiscard]] ApproxBound approx_bound(const CsSpec& spec, double width, int m);

/// Compositional form of a generalized additive model phi(sum_i h_i(z_i)):
/// L* = 2, r = (d, d, 1, 1), r~ = (d, d, 1), beta = (beta_h, inf, beta_phi).
[[nodiscard]] CsSpec additive_structure(int d, double beta_h, double beta_phi);

}  // namespace spatialdnn::theory
