#include "spatialdnn/netcore.hpp"

#include "spatialdnn/error.hpp"
#include "spatialdnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace spatialdnn::net {

namespace {

constexpr const char* kModule = "netcore";

// Forward pass over a batch stored column-wise (p_0 x b). Keeps the
// pre-shift values of every hidden layer and the activations for backprop.
struct Trace {
    std::vector<Eigen::MatrixXd> pre;  // pre[l] = input of s_{v_{l+1}}, p_{l+1} x b
    std::vector<Eigen::MatrixXd> act;  // act[l] = s_{v_{l+1}}(pre[l])
    Eigen::RowVectorXd out;
};

void run_forward(const NetworkParams& p, const Eigen::MatrixXd& cols, Trace& t) {
    const std::size_t depth = p.shifts.size();
    t.pre.resize(depth);
    t.act.resize(depth);
    Eigen::MatrixXd z = p.weights[0] * cols;
    for (std::size_t l = 0; l < depth; ++l) {
        t.pre[l] = std::move(z);
        t.act[l] = (t.pre[l].colwise() - p.shifts[l]).cwiseMax(0.0);
        z = p.weights[l + 1] * t.act[l];
    }
    t.out = z.row(0);
}

double clamp_value(double v, std::optional<double> clamp) {
    if (!clamp) return v;
    return std::clamp(v, -*clamp, *clamp);
}

}  // namespace

void NetworkShape::validate() const {
    if (widths.size() < 2) throw InvalidInput(kModule, "shape needs at least input and output widths");
    for (int w : widths) {
        if (w <= 0) throw InvalidInput(kModule, "all widths must be positive");
    }
    if (widths.back() != 1) throw InvalidInput(kModule, "output width must be 1");
}

NetworkShape NetworkShape::uniform(int input_dim, int depth, int width) {
    NetworkShape s;
    s.widths.push_back(input_dim);
    for (int l = 0; l < depth; ++l) s.widths.push_back(width);
    s.widths.push_back(1);
    s.validate();
    return s;
}

NetworkShape NetworkParams::shape() const {
    NetworkShape s;
    if (weights.empty()) return s;
    s.widths.push_back(static_cast<int>(weights.front().cols()));
    for (const auto& w : weights) s.widths.push_back(static_cast<int>(w.rows()));
    return s;
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& v : shifts) n += static_cast<std::size_t>(v.size());
    return n;
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z;
    for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& v : shifts) z.shifts.push_back(Eigen::VectorXd::Zero(v.size()));
    return z;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidInput(kModule, "learning_rate must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw InvalidInput(kModule, "Adam betas must lie in (0, 1)");
    }
    if (!(adam_eps > 0.0)) throw InvalidInput(kModule, "adam_eps must be positive");
    if (!(l1_lambda >= 0.0)) throw InvalidInput(kModule, "l1_lambda must be nonnegative");
    if (epochs <= 0) throw InvalidInput(kModule, "epochs must be positive");
    if (batch_size <= 0) throw InvalidInput(kModule, "batch_size must be positive");
    if (!(clamp >= 1.0)) throw InvalidInput(kModule, "clamp F must be at least 1");
    if (restarts <= 0) throw InvalidInput(kModule, "restarts must be positive");
}

NetworkParams init_params(const NetworkShape& shape, std::uint64_t seed) {
    shape.validate();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    NetworkParams p;
    const int depth = shape.depth();
    for (int l = 0; l <= depth; ++l) {
        const int fan_in = shape.widths[l];
        const int fan_out = shape.widths[l + 1];
        const double scale = std::sqrt(2.0 / fan_in);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * normal(rng);
        }
        p.weights.push_back(std::move(w));
    }
    for (int l = 1; l <= depth; ++l) p.shifts.push_back(Eigen::VectorXd::Zero(shape.widths[l]));
    return p;
}

double forward(const NetworkParams& params, std::span<const double> x, std::optional<double> clamp) {
    if (params.weights.empty()) throw InvalidInput(kModule, "empty network");
    if (static_cast<Eigen::Index>(x.size()) != params.weights.front().cols()) {
        throw InvalidInput(kModule, "input has length " + std::to_string(x.size()) + ", network expects " +
                                        std::to_string(params.weights.front().cols()));
    }
    Eigen::VectorXd h = params.weights[0] * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < params.shifts.size(); ++l) {
        h = params.weights[l + 1] * (h - params.shifts[l]).cwiseMax(0.0);
    }
    return clamp_value(h(0), clamp);
}

Eigen::VectorXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& x, std::optional<double> clamp) {
    if (params.weights.empty()) throw InvalidInput(kModule, "empty network");
    if (x.cols() != params.weights.front().cols()) throw InvalidInput(kModule, "input dimension mismatch");
    Trace t;
    run_forward(params, x.transpose(), t);
    Eigen::VectorXd out = t.out.transpose();
    if (clamp) {
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = clamp_value(out(i), clamp);
    }
    return out;
}

namespace {

// Gradient of the batch MSE, batch given column-wise (p_0 x b).
double backprop(const NetworkParams& p, const Eigen::MatrixXd& cols, const Eigen::RowVectorXd& y, Trace& t,
                NetworkParams& g) {
    run_forward(p, cols, t);
    const double b = static_cast<double>(cols.cols());
    const Eigen::RowVectorXd resid = y - t.out;
    const double mse = resid.squaredNorm() / b;

    Eigen::MatrixXd delta = (-2.0 / b) * resid;  // d mse / d output, 1 x b
    const std::size_t depth = p.shifts.size();
    for (std::size_t l = depth; l >= 1; --l) {
        g.weights[l].noalias() = delta * t.act[l - 1].transpose();
        Eigen::MatrixXd back = p.weights[l].transpose() * delta;
        // ReLU mask: derivative 1 where pre - v > 0, else 0.
        back = back.cwiseProduct((t.act[l - 1].array() > 0.0).cast<double>().matrix());
        g.shifts[l - 1] = -back.rowwise().sum();
        delta = std::move(back);
    }
    g.weights[0].noalias() = delta * cols.transpose();
    return mse;
}

}  // namespace

LossAndGrads loss_and_grads(const NetworkParams& params, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0) throw InvalidInput(kModule, "empty batch");
    if (x.rows() != y.size()) throw InvalidInput(kModule, "batch covariates and responses differ in length");
    if (x.cols() != params.weights.front().cols()) throw InvalidInput(kModule, "input dimension mismatch");
    LossAndGrads out;
    out.grads = params.zeros_like();
    Trace t;
    out.mse = backprop(params, x.transpose(), y.transpose(), t, out.grads);
    return out;
}

AdamState AdamState::fresh(const NetworkParams& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
}

namespace {

template <typename Block>
void adam_block(Block& theta, Block& m, Block& v, const Block& g, const TrainConfig& c, double corr1, double corr2) {
    m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * g;
    v = c.adam_beta2 * v + (1.0 - c.adam_beta2) * g.cwiseProduct(g);
    theta.array() -= c.learning_rate * (m.array() / corr1) / ((v.array() / corr2).sqrt() + c.adam_eps);
}

}  // namespace

void adam_step(NetworkParams& params, AdamState& state, const NetworkParams& grads, const TrainConfig& config) {
    ++state.step;
    const double corr1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        adam_block(params.weights[l], state.first_moment.weights[l], state.second_moment.weights[l],
                   grads.weights[l], config, corr1, corr2);
    }
    for (std::size_t l = 0; l < params.shifts.size(); ++l) {
        adam_block(params.shifts[l], state.first_moment.shifts[l], state.second_moment.shifts[l], grads.shifts[l],
                   config, corr1, corr2);
    }
}

void prox_l1_inplace(NetworkParams& params, double threshold) {
    if (!(threshold >= 0.0)) throw InvalidInput(kModule, "threshold must be nonnegative");
    if (threshold == 0.0) return;
    for (auto& w : params.weights) {
        w = w.unaryExpr([threshold](double a) {
            const double mag = std::abs(a) - threshold;
            return mag > 0.0 ? std::copysign(mag, a) : 0.0;
        });
    }
}

NetworkParams prox_l1(NetworkParams params, double threshold) {
    prox_l1_inplace(params, threshold);
    return params;
}

FitResult fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const NetworkShape& shape,
              const TrainConfig& config) {
    config.validate();
    shape.validate();
    const Eigen::Index n = x.rows();
    if (n == 0 || y.size() != n) throw InvalidInput(kModule, "covariates and responses must be nonempty and aligned");
    if (x.cols() != shape.input_dim()) throw InvalidInput(kModule, "covariate dimension does not match the network input");
    if (config.batch_size > n) {
        throw InvalidInput(kModule, "batch_size " + std::to_string(config.batch_size) + " exceeds n = " + std::to_string(n));
    }

    const Eigen::MatrixXd cols = x.transpose();
    const double threshold = config.learning_rate * config.l1_lambda;

    FitResult best;
    double best_mse = std::numeric_limits<double>::infinity();
    std::vector<double> finals;

    for (int r = 0; r < config.restarts; ++r) {
        const std::uint64_t restart_seed = derive_seed(config.seed, {static_cast<std::uint64_t>(r)});
        NetworkParams params = init_params(shape, derive_seed(restart_seed, {1}));
        AdamState state = AdamState::fresh(params);
        NetworkParams grads = params.zeros_like();
        Rng shuffler(derive_seed(restart_seed, {2}));

        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::vector<double> trace;
        trace.reserve(static_cast<std::size_t>(config.epochs));
        Trace scratch;
        Eigen::MatrixXd batch_x;
        Eigen::RowVectorXd batch_y;

        for (int epoch = 1; epoch <= config.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), shuffler);
            double sum = 0.0;
            for (Eigen::Index start = 0; start < n; start += config.batch_size) {
                const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
                batch_x.resize(cols.rows(), b);
                batch_y.resize(b);
                for (Eigen::Index k = 0; k < b; ++k) {
                    const Eigen::Index i = order[static_cast<std::size_t>(start + k)];
                    batch_x.col(k) = cols.col(i);
                    batch_y(k) = y(i);
                }
                const double mse = backprop(params, batch_x, batch_y, scratch, grads);
                if (!std::isfinite(mse)) throw TrainingDiverged(kModule, epoch);
                sum += mse * static_cast<double>(b);
                adam_step(params, state, grads, config);
                prox_l1_inplace(params, threshold);
            }
            const double epoch_mse = sum / static_cast<double>(n);
            if (!std::isfinite(epoch_mse)) throw TrainingDiverged(kModule, epoch);
            trace.push_back(epoch_mse);
        }

        const Eigen::VectorXd pred = forward_batch(params, x);
        const double final_mse = (y - pred).squaredNorm() / static_cast<double>(n);
        if (!std::isfinite(final_mse)) throw TrainingDiverged(kModule, config.epochs);
        finals.push_back(final_mse);
        if (final_mse < best_mse) {
            best_mse = final_mse;
            best.params = std::move(params);
            best.loss_trace = std::move(trace);
        }
    }

    best.final_mse = best_mse;
    best.restart_mse = finals;
    const double mean_final = std::accumulate(finals.begin(), finals.end(), 0.0) / static_cast<double>(finals.size());
    best.delta_hat = std::max(0.0, mean_final - best_mse);
    best.tau_hat = sparsity(best.params, 0.0);
    best.selected_config = config;
    return best;
}

std::size_t sparsity(const NetworkParams& params, double tol) {
    if (!(tol >= 0.0)) throw InvalidInput(kModule, "tolerance must be nonnegative");
    std::size_t count = 0;
    for (const auto& w : params.weights) count += static_cast<std::size_t>((w.array().abs() > tol).count());
    for (const auto& v : params.shifts) count += static_cast<std::size_t>((v.array().abs() > tol).count());
    return count;
}

MembershipReport class_check(const NetworkParams& params, std::size_t tau, std::optional<double> clamp, double tol) {
    MembershipReport r;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        double norm = params.weights[l].size() ? params.weights[l].cwiseAbs().maxCoeff() : 0.0;
        // v_0 is identically zero; W_l pairs with v_l for l >= 1.
        if (l >= 1 && params.shifts[l - 1].size()) norm += params.shifts[l - 1].cwiseAbs().maxCoeff();
        r.max_norm = std::max(r.max_norm, norm);
    }
    r.max_norm_ok = r.max_norm <= 1.0;
    r.nonzeros = sparsity(params, tol);
    r.sparsity_ok = r.nonzeros <= tau;
    r.clamp_enabled = clamp.has_value();
    return r;
}

nlohmann::json to_json(const NetworkParams& params) {
    nlohmann::json doc;
    doc["format"] = "spatialdnn-network";
    doc["version"] = kJsonFormatVersion;
    doc["widths"] = params.shape().widths;
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : params.weights) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(w.cols()));
            for (Eigen::Index j = 0; j < w.cols(); ++j) row[static_cast<std::size_t>(j)] = w(i, j);
            rows.push_back(row);
        }
        weights.push_back(std::move(rows));
    }
    doc["weights"] = std::move(weights);
    nlohmann::json shifts = nlohmann::json::array();
    for (const auto& v : params.shifts) shifts.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    doc["shifts"] = std::move(shifts);
    return doc;
}

NetworkParams params_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "spatialdnn-network") {
            throw InvalidInput(kModule, "not a spatialdnn network document");
        }
        if (doc.at("version").get<int>() != kJsonFormatVersion) {
            throw InvalidInput(kModule, "unsupported network format version");
        }
        NetworkShape shape{doc.at("widths").get<std::vector<int>>()};
        shape.validate();
        const auto& weights = doc.at("weights");
        const auto& shifts = doc.at("shifts");
        const std::size_t depth = static_cast<std::size_t>(shape.depth());
        if (weights.size() != depth + 1 || shifts.size() != depth) {
            throw InvalidInput(kModule, "layer count does not match widths");
        }
        NetworkParams p;
        for (std::size_t l = 0; l <= depth; ++l) {
            const int rows = shape.widths[l + 1];
            const int cols = shape.widths[l];
            if (weights[l].size() != static_cast<std::size_t>(rows)) throw InvalidInput(kModule, "weight rows mismatch");
            Eigen::MatrixXd w(rows, cols);
            for (int i = 0; i < rows; ++i) {
                const auto row = weights[l][static_cast<std::size_t>(i)].get<std::vector<double>>();
                if (row.size() != static_cast<std::size_t>(cols)) throw InvalidInput(kModule, "weight columns mismatch");
                for (int j = 0; j < cols; ++j) w(i, j) = row[static_cast<std::size_t>(j)];
            }
            p.weights.push_back(std::move(w));
        }
        for (std::size_t l = 0; l < depth; ++l) {
            const auto v = shifts[l].get<std::vector<double>>();
            if (v.size() != static_cast<std::size_t>(shape.widths[l + 1])) throw InvalidInput(kModule, "shift length mismatch");
            p.shifts.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(kModule, std::string("malformed network document: ") + e.what());
    }
}

}  // namespace spatialdnn::net
