#include "spatialdnn/baselines.hpp"

#include "spatialdnn/error.hpp"
#include "spatialdnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace spatialdnn::baselines {

namespace {

constexpr const char* kModule = "baselines";
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void check_training_set(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0) throw InvalidInput(kModule, "training set is empty");
    if (x.rows() != y.size()) throw InvalidInput(kModule, "covariates and responses differ in length");
}

double sample_sd(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Nadaraya-Watson

void KernelSpec::validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidInput(kModule, "bandwidth must be positive");
}

NwModel nw_fit(Eigen::MatrixXd x, Eigen::VectorXd y, KernelSpec kernel) {
    check_training_set(x, y);
    kernel.validate();
    return {std::move(x), std::move(y), kernel};
}

double nw_predict(const NwModel& model, std::span<const double> query) {
    const Eigen::Index n = model.x.rows();
    const Eigen::Index d = model.x.cols();
    if (static_cast<Eigen::Index>(query.size()) != d) throw InvalidInput(kModule, "query dimension mismatch");
    const Eigen::Map<const Eigen::RowVectorXd> q(query.data(), d);
    const double h = model.kernel.bandwidth;

    if (model.kernel.kind == KernelKind::gaussian) {
        // Product of standard normal densities, weighted in log space; the
        // common normalising factor cancels in the ratio.
        Eigen::VectorXd logk(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            logk(i) = -0.5 * (model.x.row(i) - q).squaredNorm() / (h * h) - static_cast<double>(d) * kLogSqrt2Pi;
        }
        const double top = logk.maxCoeff();
        const Eigen::VectorXd w = (logk.array() - top).exp();
        return w.dot(model.y) / w.sum();
    }

    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double k = 1.0;
        for (Eigen::Index j = 0; j < d && k > 0.0; ++j) {
            const double u = (q(j) - model.x(i, j)) / h;
            k *= u * u < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
        }
        num += k * model.y(i);
        den += k;
    }
    if (den > 0.0) return num / den;

    Eigen::Index nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dist = (model.x.row(i) - q).squaredNorm();
        if (dist < best) {
            best = dist;
            nearest = i;
        }
    }
    return model.y(nearest);
}

Eigen::VectorXd nw_predict_batch(const NwModel& model, const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out(i) = nw_predict(model, row);
    }
    return out;
}

double rule_of_thumb_bandwidth(const Eigen::MatrixXd& x) {
    if (x.rows() < 2) throw InvalidInput(kModule, "bandwidth selection needs at least two observations");
    double mean_sd = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) mean_sd += sample_sd(x.col(j));
    mean_sd /= static_cast<double>(x.cols());
    if (!(mean_sd > 0.0)) throw InvalidInput(kModule, "covariates are degenerate (zero spread in every coordinate)");
    const double n = static_cast<double>(x.rows());
    return std::pow(n, -1.0 / (4.0 + static_cast<double>(x.cols()))) * mean_sd;
}

std::vector<double> bandwidth_grid(double h0) {
    std::vector<double> grid;
    const double lo = std::log(h0 / 5.0);
    const double hi = std::log(h0 * 5.0);
    for (int k = 0; k < 10; ++k) grid.push_back(std::exp(lo + (hi - lo) * k / 9.0));
    return grid;
}

double bandwidth_select(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, BandwidthRule rule, KernelKind kind,
                        std::uint64_t seed) {
    check_training_set(x, y);
    const double h0 = rule_of_thumb_bandwidth(x);
    if (rule == BandwidthRule::rule_of_thumb) return h0;
    if (x.rows() < 10) throw InvalidInput(kModule, "cross-validated bandwidth needs n >= 10");

    Eigen::MatrixXd xs = x;
    Eigen::VectorXd ys = y;
    if (x.rows() > kBandwidthCvMaxRows) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        Rng rng(derive_seed(seed, {tag_hash("nw-subsample")}));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(kBandwidthCvMaxRows));
        std::sort(idx.begin(), idx.end());
        xs.resize(kBandwidthCvMaxRows, x.cols());
        ys.resize(kBandwidthCvMaxRows);
        for (Eigen::Index k = 0; k < kBandwidthCvMaxRows; ++k) {
            xs.row(k) = x.row(idx[static_cast<std::size_t>(k)]);
            ys(k) = y(idx[static_cast<std::size_t>(k)]);
        }
    }

    const int k = 5;
    const auto folds = kfold_assignment(static_cast<std::size_t>(xs.rows()), k, seed);
    const auto grid = bandwidth_grid(h0);
    double best_h = grid.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double h : grid) {
        double sse = 0.0;
        for (int f = 0; f < k; ++f) {
            std::vector<Eigen::Index> tr, te;
            for (Eigen::Index i = 0; i < xs.rows(); ++i) (folds[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
            NwModel m = nw_fit(xs(tr, Eigen::all), ys(tr), {kind, h});
            const Eigen::VectorXd pred = nw_predict_batch(m, xs(te, Eigen::all));
            sse += (pred - ys(te)).squaredNorm();
        }
        const double score = sse / static_cast<double>(xs.rows());
        if (score < best_score) {
            best_score = score;
            best_h = h;
        }
    }
    return best_h;
}

// ---------------------------------------------------------------------------
// B-splines

namespace {

// All B-splines of degree p on knot vector t at u (Cox-de Boor), with the
// right end of the domain assigned to the last nonempty interval.
Eigen::VectorXd basis_of_degree(const std::vector<double>& t, int p, double u) {
    const int m = static_cast<int>(t.size()) - 1;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    int span = -1;
    for (int i = 0; i < m; ++i) {
        if (t[i] < t[i + 1] && t[i] <= u && u < t[i + 1]) {
            span = i;
            break;
        }
    }
    if (span < 0) {
        for (int i = m - 1; i >= 0; --i) {
            if (t[i] < t[i + 1]) {
                if (u >= t[i + 1]) span = i;
                break;
            }
        }
    }
    if (span >= 0) b(span) = 1.0;
    for (int k = 1; k <= p; ++k) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(m - k);
        for (int i = 0; i < m - k; ++i) {
            const double dl = t[i + k] - t[i];
            const double dr = t[i + k + 1] - t[i + 1];
            double v = 0.0;
            if (dl > 0.0) v += (u - t[i]) / dl * b(i);
            if (dr > 0.0) v += (t[i + k + 1] - u) / dr * b(i + 1);
            next(i) = v;
        }
        b = std::move(next);
    }
    return b;
}

Eigen::VectorXd derivative_of_degree(const std::vector<double>& t, int p, double u, int order) {
    if (order == 0) return basis_of_degree(t, p, u);
    const Eigen::VectorXd lower = derivative_of_degree(t, p - 1, u, order - 1);
    const int count = static_cast<int>(t.size()) - p - 1;
    Eigen::VectorXd out(count);
    for (int i = 0; i < count; ++i) {
        const double dl = t[i + p] - t[i];
        const double dr = t[i + p + 1] - t[i + 1];
        double v = 0.0;
        if (dl > 0.0) v += lower(i) / dl;
        if (dr > 0.0) v -= lower(i + 1) / dr;
        out(i) = p * v;
    }
    return out;
}

// Integrated squared second derivative Gram matrix on [0, 1]; B'' is
// piecewise linear so Simpson's rule per knot interval is exact.
Eigen::MatrixXd curvature_gram(const std::vector<double>& t) {
    const int count = static_cast<int>(t.size()) - 4;
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(count, count);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double a = t[k];
        const double b = t[k + 1];
        if (!(b > a)) continue;
        const double mid = 0.5 * (a + b);
        // Evaluate just inside the interval so both ends use this piece.
        const double eps = 1e-12 * (b - a);
        const Eigen::VectorXd fa = derivative_of_degree(t, 3, a + eps, 2);
        const Eigen::VectorXd fm = derivative_of_degree(t, 3, mid, 2);
        const Eigen::VectorXd fb = derivative_of_degree(t, 3, b - eps, 2);
        omega += (b - a) / 6.0 * (fa * fa.transpose() + 4.0 * fm * fm.transpose() + fb * fb.transpose());
    }
    return omega;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

Eigen::VectorXd bspline_basis(const std::vector<double>& knots, double u) {
    return basis_of_degree(knots, 3, u);
}

Eigen::VectorXd bspline_basis_derivative(const std::vector<double>& knots, double u, int order) {
    if (order < 1 || order > 2) throw InvalidInput(kModule, "derivative order must be 1 or 2");
    return derivative_of_degree(knots, 3, u, order);
}

double SplineComponent::operator()(double x) const {
    if (coef.size() == 0) return 0.0;
    if (x < lo) return value_lo + slope_lo * (x - lo);
    if (x > hi) return value_hi + slope_hi * (x - hi);
    const double u = (x - lo) / (hi - lo);
    return basis_of_degree(knots, 3, u).dot(coef) - offset;
}

// ---------------------------------------------------------------------------
// Additive model

namespace {

struct ComponentSystem {
    SplineComponent comp;
    Eigen::MatrixXd basis;  // n x nb
    Eigen::MatrixXd omega;
    Eigen::LDLT<Eigen::MatrixXd> solver;
};

ComponentSystem prepare_component(const Eigen::VectorXd& xj, int interior, double penalty) {
    ComponentSystem sys;
    const Eigen::Index n = xj.size();
    sys.comp.lo = xj.minCoeff();
    sys.comp.hi = xj.maxCoeff();
    if (!(sys.comp.hi > sys.comp.lo)) return sys;  // constant covariate: zero component

    std::vector<double> sorted(xj.data(), xj.data() + n);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> knots{0.0, 0.0, 0.0, 0.0};
    const double span = sys.comp.hi - sys.comp.lo;
    for (int k = 1; k <= interior; ++k) {
        const double u = (quantile_sorted(sorted, static_cast<double>(k) / (interior + 1)) - sys.comp.lo) / span;
        if (u > knots.back() + 1e-9 && u < 1.0 - 1e-9) knots.push_back(u);
    }
    for (int k = 0; k < 4; ++k) knots.push_back(1.0);
    sys.comp.knots = knots;

    const int nb = static_cast<int>(knots.size()) - 4;
    sys.basis.resize(n, nb);
    for (Eigen::Index i = 0; i < n; ++i) {
        sys.basis.row(i) = basis_of_degree(knots, 3, (xj(i) - sys.comp.lo) / span).transpose();
    }
    sys.omega = curvature_gram(knots);
    Eigen::MatrixXd a = sys.basis.transpose() * sys.basis / static_cast<double>(n) + penalty * sys.omega;
    a.diagonal().array() += 1e-10 * a.diagonal().mean();
    sys.solver.compute(a);
    sys.comp.coef = Eigen::VectorXd::Zero(nb);
    return sys;
}

void finish_component(SplineComponent& c) {
    if (c.coef.size() == 0) return;
    const double span = c.hi - c.lo;
    c.value_lo = bspline_basis(c.knots, 0.0).dot(c.coef) - c.offset;
    c.value_hi = bspline_basis(c.knots, 1.0).dot(c.coef) - c.offset;
    c.slope_lo = derivative_of_degree(c.knots, 3, 0.0, 1).dot(c.coef) / span;
    c.slope_hi = derivative_of_degree(c.knots, 3, 1.0, 1).dot(c.coef) / span;
}

GamModel backfit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GamConfig& config, double penalty) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const int interior = config.knots >= 0 ? config.knots : std::min<int>(20, static_cast<int>(n / 4));
    if (n <= interior + 2) throw InvalidInput(kModule, "GAM needs n > knots + 2");

    std::vector<ComponentSystem> systems;
    systems.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) systems.push_back(prepare_component(x.col(j), interior, penalty));

    GamModel model;
    model.penalty = penalty;
    model.intercept = y.mean();
    std::vector<Eigen::VectorXd> fitted(static_cast<std::size_t>(d), Eigen::VectorXd::Zero(n));
    Eigen::VectorXd total = Eigen::VectorXd::Zero(n);

    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            auto& sys = systems[static_cast<std::size_t>(j)];
            auto& g = fitted[static_cast<std::size_t>(j)];
            if (sys.comp.coef.size() == 0) continue;
            const Eigen::VectorXd partial = y.array() - model.intercept - (total - g).array();
            sys.comp.coef = sys.solver.solve(sys.basis.transpose() * partial / static_cast<double>(n));
            Eigen::VectorXd next = sys.basis * sys.comp.coef;
            sys.comp.offset = next.mean();
            next.array() -= sys.comp.offset;
            max_change = std::max(max_change, (next - g).cwiseAbs().maxCoeff());
            total += next - g;
            g = std::move(next);
        }
        const Eigen::VectorXd resid = y.array() - model.intercept - total.array();
        const double rss = resid.squaredNorm();
        double pen = 0.0;
        for (const auto& sys : systems) {
            if (sys.comp.coef.size()) pen += penalty * sys.comp.coef.dot(sys.omega * sys.comp.coef);
        }
        model.rss_trace.push_back(rss);
        model.objective_trace.push_back(rss / static_cast<double>(n) + pen);
        model.sweeps = sweep;
        if (max_change < config.tol) {
            model.converged = true;
            break;
        }
    }
    for (auto& sys : systems) {
        finish_component(sys.comp);
        model.components.push_back(std::move(sys.comp));
    }
    return model;
}

}  // namespace

GamModel gam_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GamConfig& config) {
    check_training_set(x, y);
    if (config.max_sweeps <= 0) throw InvalidInput(kModule, "max_sweeps must be positive");
    if (config.penalty >= 0.0) return backfit(x, y, config, config.penalty);
    if (config.penalty_grid.empty()) throw InvalidInput(kModule, "empty penalty grid");

    const int k = 5;
    const auto folds = kfold_assignment(static_cast<std::size_t>(x.rows()), k, derive_seed(config.seed, {tag_hash("gam-cv")}));
    double best_penalty = config.penalty_grid.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double lambda : config.penalty_grid) {
        double sse = 0.0;
        for (int f = 0; f < k; ++f) {
            std::vector<Eigen::Index> tr, te;
            for (Eigen::Index i = 0; i < x.rows(); ++i) (folds[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
            const GamModel m = backfit(x(tr, Eigen::all), y(tr), config, lambda);
            sse += (gam_predict_batch(m, x(te, Eigen::all)) - y(te)).squaredNorm();
        }
        if (sse < best_score) {
            best_score = sse;
            best_penalty = lambda;
        }
    }
    return backfit(x, y, config, best_penalty);
}

double gam_predict(const GamModel& model, std::span<const double> x) {
    if (x.size() != model.components.size()) throw InvalidInput(kModule, "query dimension mismatch");
    double out = model.intercept;
    for (std::size_t j = 0; j < x.size(); ++j) out += model.components[j](x[j]);
    return out;
}

Eigen::VectorXd gam_predict_batch(const GamModel& model, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.cols()) != model.components.size()) throw InvalidInput(kModule, "query dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), model.intercept);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto& c = model.components[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) += c(x(i, j));
    }
    return out;
}

nlohmann::json to_json(const NwModel& model) {
    nlohmann::json doc;
    doc["format"] = "spatialdnn-nw";
    doc["kernel"] = model.kernel.kind == KernelKind::gaussian ? "gaussian" : "epanechnikov";
    doc["bandwidth"] = model.kernel.bandwidth;
    doc["n"] = model.x.rows();
    doc["d"] = model.x.cols();
    doc["x"] = std::vector<double>(model.x.data(), model.x.data() + model.x.size());  // column-major
    doc["y"] = std::vector<double>(model.y.data(), model.y.data() + model.y.size());
    return doc;
}

nlohmann::json to_json(const GamModel& model) {
    nlohmann::json doc;
    doc["format"] = "spatialdnn-gam";
    doc["intercept"] = model.intercept;
    doc["penalty"] = model.penalty;
    doc["converged"] = model.converged;
    doc["sweeps"] = model.sweeps;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : model.components) {
        comps.push_back({{"lo", c.lo},
                         {"hi", c.hi},
                         {"knots", c.knots},
                         {"coef", std::vector<double>(c.coef.data(), c.coef.data() + c.coef.size())},
                         {"offset", c.offset}});
    }
    doc["components"] = std::move(comps);
    return doc;
}

GamModel gam_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "spatialdnn-gam") throw InvalidInput(kModule, "not a GAM document");
        GamModel m;
        m.intercept = doc.at("intercept").get<double>();
        m.penalty = doc.at("penalty").get<double>();
        m.converged = doc.at("converged").get<bool>();
        m.sweeps = doc.at("sweeps").get<int>();
        for (const auto& jc : doc.at("components")) {
            SplineComponent c;
            c.lo = jc.at("lo").get<double>();
            c.hi = jc.at("hi").get<double>();
            c.knots = jc.at("knots").get<std::vector<double>>();
            const auto coef = jc.at("coef").get<std::vector<double>>();
            c.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
            c.offset = jc.at("offset").get<double>();
            finish_component(c);
            m.components.push_back(std::move(c));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(kModule, std::string("malformed GAM document: ") + e.what());
    }
}

}  // namespace spatialdnn::baselines
