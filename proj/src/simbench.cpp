#include "spatialdnn/simbench.hpp"

#include "spatialdnn/csv.hpp"
#include "spatialdnn/error.hpp"
#include "spatialdnn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace spatialdnn::sim {

namespace {

constexpr const char* kModule = "simbench";
constexpr int kDesign2Dim = 5;
constexpr double kDenominatorGuard = 0.1;
constexpr int kMaxRegenerationRounds = 1000;

struct ColumnStats {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd sd;
};

// Column means and sample standard deviations; zero spread maps to 1.
ColumnStats column_stats(const Eigen::MatrixXd& x) {
    ColumnStats s;
    s.mean = x.colwise().mean();
    s.sd.resize(x.cols());
    const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - s.mean(j)).square().sum() / denom;
        s.sd(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Eigen::MatrixXd apply_stats(const Eigen::MatrixXd& x, const ColumnStats& s) {
    return (x.rowwise() - s.mean).array().rowwise() / s.sd.array();
}

std::uint64_t stream(std::uint64_t seed, std::string_view purpose) { return derive_seed(seed, {tag_hash(purpose)}); }

// Random locations in [0, D]^dim.
grf::LocationSet random_locations(Eigen::Index m, int dim, double domain_size, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, domain_size);
    Eigen::MatrixXd coords(m, dim);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (int j = 0; j < dim; ++j) coords(i, j) = unif(rng);
    }
    return grf::LocationSet(std::move(coords), domain_size);
}

// Adds the spatial and independent errors to the truth of both splits.
void add_errors(const DesignSpec& spec, SpatialDataset& ds) {
    const Eigen::Index n = ds.train.truth.size();
    const Eigen::Index m = ds.test.truth.size();
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(n + m);
    if (spec.field_variance > 0.0) {
        const auto joint = grf::LocationSet::concat(ds.train.locations, ds.test.locations);
        const auto cov = grf::build_cov(grf::CovarianceModel::exponential(spec.range, spec.field_variance), joint);
        e1 = grf::sample_field(grf::chol(cov), stream(spec.seed, "spatial-error")).values;
    }
    Eigen::VectorXd e2 = Eigen::VectorXd::Zero(n + m);
    if (spec.noise_sd > 0.0) {
        Rng rng(stream(spec.seed, "independent-error"));
        std::normal_distribution<double> normal(0.0, spec.noise_sd);
        for (Eigen::Index i = 0; i < n + m; ++i) e2(i) = normal(rng);
    }
    ds.train.response = ds.train.truth + e1.head(n) + e2.head(n);
    ds.test.response = ds.test.truth + e1.tail(m) + e2.tail(m);
}

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) {
        throw InvalidInput(kModule, "length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.size() == 0) throw InvalidInput(kModule, "empty prediction vector");
}

double sample_sd(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string_view to_string(DomainMode mode) noexcept { return mode == DomainMode::fixed ? "fixed" : "expanding"; }

DomainMode parse_domain_mode(std::string_view text) {
    if (text == "fixed") return DomainMode::fixed;
    if (text == "expanding") return DomainMode::expanding;
    throw InvalidInput(kModule, "unknown domain mode '" + std::string(text) + "'");
}

void DesignSpec::validate() const {
    if (design != 1 && design != 2) throw InvalidInput(kModule, "design must be 1 or 2");
    if (n < 10) throw InvalidInput(kModule, "n must be at least 10 so that the test split is nonempty");
    if (design == 2) {
        const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
        if (k * k != n) throw InvalidInput(kModule, "design 2 needs a perfect-square n, got " + std::to_string(n));
    }
    if (!(domain_size > 0.0) || !std::isfinite(domain_size)) throw InvalidInput(kModule, "D must be positive");
    if (domain_mode == DomainMode::fixed && domain_size != 1.0) {
        throw InvalidInput(kModule, "fixed domain mode requires D = 1");
    }
    if (!(range > 0.0)) throw InvalidInput(kModule, "rho must be positive");
    if (!(noise_sd >= 0.0) || !(field_variance >= 0.0)) throw InvalidInput(kModule, "error scales must be nonnegative");
}

Eigen::VectorXd design1_covariates(double s, double domain_size) {
    const double u = s / domain_size;
    Eigen::VectorXd x(5);
    x << u, std::sin(10.0 * u), u * u, std::exp(3.0 * u), 1.0 / (u + 1.0);
    return x;
}

double design1_mean(const Eigen::VectorXd& x) { return x.sum(); }

double design2_mean(std::span<const double> x, const Eigen::VectorXd& beta) {
    if (x.size() != kDesign2Dim || beta.size() != kDesign2Dim) throw InvalidInput(kModule, "design 2 has five covariates");
    const double sign4 = x[3] >= 0.0 ? 1.0 : -1.0;
    return beta(0) * x[0] * x[1] + beta(1) * x[1] * x[1] * std::sin(x[2]) + beta(2) * std::exp(x[3]) * std::max(x[4], 0.0) +
           beta(3) / (sign4 * (10.0 + x[4])) + beta(4) * std::tanh(x[0]);
}

SpatialDataset gen_design1(const DesignSpec& spec) {
    spec.validate();
    if (spec.design != 1) throw InvalidInput(kModule, "gen_design1 called with design " + std::to_string(spec.design));
    const double D = spec.domain_size;
    SpatialDataset ds;
    ds.train.locations = grf::LocationSet::line_grid(spec.n, D);
    ds.test.locations = random_locations(spec.test_size(), 1, D, stream(spec.seed, "test-locations"));
    for (Observations* obs : {&ds.train, &ds.test}) {
        const Eigen::Index rows = obs->locations.size();
        obs->covariates.resize(rows, 5);
        obs->truth.resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Eigen::VectorXd x = design1_covariates(obs->locations.coords()(i, 0), D);
            obs->covariates.row(i) = x.transpose();
            obs->truth(i) = design1_mean(x);
        }
    }
    add_errors(spec, ds);
    return ds;
}

SpatialDataset gen_design2(const DesignSpec& spec) {
    spec.validate();
    if (spec.design != 2) throw InvalidInput(kModule, "gen_design2 called with design " + std::to_string(spec.design));
    const double D = spec.domain_size;
    const auto k = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(spec.n))));
    SpatialDataset ds;
    ds.train.locations = grf::LocationSet::square_grid(k, D);
    ds.test.locations = random_locations(spec.test_size(), 2, D, stream(spec.seed, "test-locations"));

    {
        Rng coef_rng(spec.coef_mode == CoefMode::fixed ? stream(spec.coef_seed, "coefficients")
                                                        : stream(spec.seed, "coefficients"));
        std::uniform_real_distribution<double> unif(1.0, 2.0);
        ds.coefficients.resize(kDesign2Dim);
        for (int j = 0; j < kDesign2Dim; ++j) ds.coefficients(j) = unif(coef_rng);
    }

    Rng cov_rng(stream(spec.seed, "covariates"));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double half = std::sqrt(0.5);
    auto draw_row = [&](Eigen::MatrixXd& x, Eigen::Index i) {
        const double common = normal(cov_rng);
        for (int j = 0; j < kDesign2Dim; ++j) x(i, j) = half * common + half * normal(cov_rng);
    };
    auto guarded = [](const Eigen::MatrixXd& xs, Eigen::Index i) { return std::abs(10.0 + xs(i, 4)) < kDenominatorGuard; };

    const Eigen::Index n = ds.train.locations.size();
    const Eigen::Index m = ds.test.locations.size();
    Eigen::MatrixXd raw_train(n, kDesign2Dim);
    for (Eigen::Index i = 0; i < n; ++i) draw_row(raw_train, i);
    Eigen::MatrixXd raw_test(m, kDesign2Dim);
    for (Eigen::Index i = 0; i < m; ++i) draw_row(raw_test, i);

    ColumnStats stats;
    Eigen::MatrixXd train_x;
    for (int round = 0;; ++round) {
        stats = column_stats(raw_train);
        train_x = apply_stats(raw_train, stats);
        bool redrawn = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (guarded(train_x, i)) {
                draw_row(raw_train, i);
                ++ds.regenerations;
                redrawn = true;
            }
        }
        if (!redrawn) break;
        if (round >= kMaxRegenerationRounds) throw Error(kModule, "covariate regeneration did not terminate");
    }
    Eigen::MatrixXd test_x = apply_stats(raw_test, stats);
    for (Eigen::Index i = 0; i < m; ++i) {
        int tries = 0;
        while (guarded(test_x, i)) {
            if (++tries > kMaxRegenerationRounds) throw Error(kModule, "covariate regeneration did not terminate");
            draw_row(raw_test, i);
            test_x.row(i) = (raw_test.row(i) - stats.mean).array() / stats.sd.array();
            ++ds.regenerations;
        }
    }

    ds.train.covariates = std::move(train_x);
    ds.test.covariates = std::move(test_x);
    for (Observations* obs : {&ds.train, &ds.test}) {
        obs->truth.resize(obs->covariates.rows());
        for (Eigen::Index i = 0; i < obs->covariates.rows(); ++i) {
            const Eigen::RowVectorXd row = obs->covariates.row(i);
            obs->truth(i) = design2_mean(std::span<const double>(row.data(), kDesign2Dim), ds.coefficients);
        }
    }
    add_errors(spec, ds);
    return ds;
}

SpatialDataset generate(const DesignSpec& spec) { return spec.design == 2 ? gen_design2(spec) : gen_design1(spec); }

double msee(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    check_lengths(pred, truth);
    return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double mspe(const Eigen::VectorXd& pred, const Eigen::VectorXd& observed) {
    check_lengths(pred, observed);
    return (pred - observed).squaredNorm() / static_cast<double>(pred.size());
}

IntervalBand sim_interval(const Eigen::MatrixXd& replicate_preds) {
    if (replicate_preds.rows() != 100) {
        throw UnsupportedReplicateCount(kModule, "pointwise bands are defined for exactly 100 replicates, got " +
                                                     std::to_string(replicate_preds.rows()));
    }
    IntervalBand band;
    band.lower.resize(replicate_preds.cols());
    band.upper.resize(replicate_preds.cols());
    std::vector<double> col(100);
    for (Eigen::Index j = 0; j < replicate_preds.cols(); ++j) {
        for (Eigen::Index r = 0; r < 100; ++r) col[static_cast<std::size_t>(r)] = replicate_preds(r, j);
        std::sort(col.begin(), col.end());
        band.lower(j) = 0.5 * (col[1] + col[2]);
        band.upper(j) = 0.5 * (col[96] + col[97]);
    }
    return band;
}

std::vector<GridPoint> make_grid(const std::vector<int>& depths, const std::vector<int>& widths,
                                 const std::vector<double>& l1, const std::vector<double>& lr) {
    std::vector<GridPoint> grid;
    for (int d : depths) {
        for (int w : widths) {
            for (double a : l1) {
                for (double b : lr) grid.push_back({d, w, a, b});
            }
        }
    }
    return grid;
}

std::vector<GridPoint> default_grid() { return make_grid({2, 3}, {16, 32, 64}, {1e-5, 1e-4, 1e-3}, {1e-3, 1e-2}); }

Selection select_hyperparams(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<GridPoint>& grid,
                             const net::TrainConfig& base, std::uint64_t seed) {
    if (grid.empty()) throw InvalidInput(kModule, "hyperparameter grid is empty");
    const Eigen::Index n = x.rows();
    if (n < 25) throw InvalidInput(kModule, "cross-validation needs at least 25 observations");
    if (y.size() != n) throw InvalidInput(kModule, "covariates and responses are not aligned");
    constexpr int kFolds = 5;
    const auto folds = kfold_assignment(static_cast<std::size_t>(n), kFolds, seed);

    std::vector<Eigen::MatrixXd> train_x(kFolds), test_x(kFolds);
    std::vector<Eigen::VectorXd> train_y(kFolds), test_y(kFolds);
    for (int f = 0; f < kFolds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < n; ++i) (folds[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        train_x[f] = x(tr, Eigen::all);
        train_y[f] = y(tr);
        test_x[f] = x(te, Eigen::all);
        test_y[f] = y(te);
    }

    Selection sel;
    bool have = false;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const GridPoint& p = grid[g];
        net::TrainConfig cfg = base;
        cfg.l1_lambda = p.l1_lambda;
        cfg.learning_rate = p.learning_rate;
        const auto shape = net::NetworkShape::uniform(static_cast<int>(x.cols()), p.depth, p.width);
        double total = 0.0;
        for (int f = 0; f < kFolds && std::isfinite(total); ++f) {
            cfg.seed = derive_seed(seed, {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(f)});
            cfg.batch_size = std::min<int>(base.batch_size, static_cast<int>(train_x[f].rows()));
            try {
                const auto fitted = net::fit(train_x[f], train_y[f], shape, cfg);
                total += mspe(net::forward_batch(fitted.params, test_x[f], cfg.clamp), test_y[f]);
            } catch (const TrainingDiverged&) {
                total = std::numeric_limits<double>::infinity();
            }
        }
        const double score = total / kFolds;
        sel.scores.push_back({p, score});
        const bool better = !have || score < sel.cv_mspe ||
                            (score == sel.cv_mspe &&
                             (p.width < sel.point.width || (p.width == sel.point.width && p.depth < sel.point.depth)));
        if (better && std::isfinite(score)) {
            sel.point = p;
            sel.cv_mspe = score;
            have = true;
        }
    }
    if (!have) throw Error(kModule, "training diverged at every grid point");
    sel.config = base;
    sel.config.l1_lambda = sel.point.l1_lambda;
    sel.config.learning_rate = sel.point.learning_rate;
    return sel;
}

Selection select_hyperparams(const Observations& train, const std::vector<GridPoint>& grid,
                             const net::TrainConfig& base, std::uint64_t seed) {
    return select_hyperparams(train.covariates, train.response, grid, base, seed);
}

std::string_view to_string(Method method) noexcept {
    switch (method) {
        case Method::dnn: return "dnn";
        case Method::nw: return "nw";
        case Method::gam: return "gam";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    if (text == "dnn") return Method::dnn;
    if (text == "nw") return Method::nw;
    if (text == "gam") return Method::gam;
    throw InvalidInput(kModule, "unknown method '" + std::string(text) + "' (expected dnn, nw or gam)");
}

std::vector<Method> parse_methods(std::string_view list) {
    std::vector<Method> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t comma = list.find(',', start);
        const std::string_view token = list.substr(start, comma == std::string_view::npos ? list.npos : comma - start);
        if (!token.empty()) {
            const Method m = parse_method(token);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw InvalidInput(kModule, "no methods given");
    return out;
}

MethodOptions default_method_options() {
    MethodOptions o;
    o.dnn.train.epochs = 100;
    o.dnn.train.restarts = 2;
    o.dnn.train.batch_size = 32;
    o.dnn.train.clamp = 10.0;
    o.dnn.fixed = {2, 16, 0.2, 1e-2};
    o.dnn.cv_epochs = 100;
    return o;
}

Predictor fit_method(Method method, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MethodOptions& options,
                     std::uint64_t seed) {
    if (x.rows() != y.size() || x.rows() == 0) throw InvalidInput(kModule, "covariates and responses are not aligned");
    switch (method) {
        case Method::dnn: {
            const ColumnStats xs = column_stats(x);
            const double y_mean = y.mean();
            double y_sd = std::sqrt((y.array() - y_mean).square().sum() / std::max<double>(1.0, static_cast<double>(y.size() - 1)));
            if (!(y_sd > 0.0)) y_sd = 1.0;
            const Eigen::MatrixXd xz = apply_stats(x, xs);
            const Eigen::VectorXd yz = (y.array() - y_mean) / y_sd;

            const DnnOptions& d = options.dnn;
            GridPoint point = d.fixed;
            if (d.grid.size() == 1) {
                point = d.grid.front();
            } else if (d.grid.size() > 1) {
                net::TrainConfig cv = d.train;
                if (d.cv_epochs > 0) cv.epochs = d.cv_epochs;
                cv.restarts = d.cv_restarts;
                point = select_hyperparams(xz, yz, d.grid, cv, derive_seed(seed, {tag_hash("dnn-cv")})).point;
            }
            net::TrainConfig cfg = d.train;
            cfg.l1_lambda = point.l1_lambda;
            cfg.learning_rate = point.learning_rate;
            cfg.seed = derive_seed(seed, {tag_hash("dnn-fit")});
            cfg.batch_size = std::min<int>(cfg.batch_size, static_cast<int>(x.rows()));
            const auto shape = net::NetworkShape::uniform(static_cast<int>(x.cols()), point.depth, point.width);
            auto fitted = net::fit(xz, yz, shape, cfg);
            const double clamp = cfg.clamp;
            return [params = std::move(fitted.params), xs, y_mean, y_sd, clamp](const Eigen::MatrixXd& q) {
                const Eigen::VectorXd z = net::forward_batch(params, apply_stats(q, xs), clamp);
                return Eigen::VectorXd((z.array() * y_sd + y_mean).matrix());
            };
        }
        case Method::nw: {
            const ColumnStats xs = column_stats(x);
            Eigen::MatrixXd xz = apply_stats(x, xs);
            const double h = baselines::bandwidth_select(xz, y, options.nw_bandwidth, options.nw_kernel,
                                                         derive_seed(seed, {tag_hash("nw-cv")}));
            auto model = baselines::nw_fit(std::move(xz), y, {options.nw_kernel, h});
            return [model = std::move(model), xs](const Eigen::MatrixXd& q) {
                return baselines::nw_predict_batch(model, apply_stats(q, xs));
            };
        }
        case Method::gam: {
            baselines::GamConfig cfg = options.gam;
            cfg.seed = derive_seed(seed, {tag_hash("gam-cv")});
            auto model = baselines::gam_fit(x, y, cfg);
            return [model = std::move(model)](const Eigen::MatrixXd& q) { return baselines::gam_predict_batch(model, q); };
        }
    }
    throw InvalidInput(kModule, "unknown method");
}

std::uint64_t replicate_seed(std::uint64_t seed, const DesignSpec& design, int replicate) {
    return derive_seed(seed, {static_cast<std::uint64_t>(design.design),
                              static_cast<std::uint64_t>(design.domain_mode == DomainMode::fixed ? 0 : 1),
                              static_cast<std::uint64_t>(design.n), std::bit_cast<std::uint64_t>(design.domain_size),
                              std::bit_cast<std::uint64_t>(design.range), static_cast<std::uint64_t>(replicate)});
}

BenchmarkResult run_benchmark(const BenchmarkOptions& options) {
    if (options.replicates < 2) throw InvalidInput(kModule, "benchmark needs at least 2 replicates");
    if (options.designs.empty()) throw InvalidInput(kModule, "benchmark needs at least one design");
    if (options.methods.empty()) throw InvalidInput(kModule, "benchmark needs at least one method");
    for (const auto& d : options.designs) d.validate();

    const std::size_t n_designs = options.designs.size();
    const std::size_t n_methods = options.methods.size();
    const auto R = static_cast<std::size_t>(options.replicates);
    const std::size_t n_tasks = n_designs * R;

    struct TaskOut {
        std::vector<ReplicateRecord> records;
        std::vector<Eigen::VectorXd> band_preds;  // per method, at training locations
    };
    std::vector<TaskOut> outs(n_tasks);
    std::vector<bool> want_bands(n_designs);
    for (std::size_t d = 0; d < n_designs; ++d) want_bands[d] = options.designs[d].design == 1 && R == 100;

    std::mutex log_mutex;
    auto run_task = [&](std::size_t t) {
        const std::size_t d = t / R;
        const int rep = static_cast<int>(t % R);
        DesignSpec spec = options.designs[d];
        spec.seed = replicate_seed(options.seed, spec, options.identical_replicates ? 0 : rep);
        TaskOut& out = outs[t];
        out.band_preds.resize(n_methods);
        std::optional<SpatialDataset> data;
        std::string data_error;
        try {
            data = generate(spec);
        } catch (const std::exception& e) {
            data_error = e.what();
        }
        for (std::size_t k = 0; k < n_methods; ++k) {
            ReplicateRecord rec{d, rep, options.methods[k], false, 0.0, 0.0, data_error};
            if (data) {
                try {
                    const auto predictor = fit_method(options.methods[k], data->train.covariates, data->train.response,
                                                      options.method_options,
                                                      derive_seed(spec.seed, {tag_hash(to_string(options.methods[k]))}));
                    const Eigen::VectorXd pred = predictor(data->test.covariates);
                    rec.msee = msee(pred, data->test.truth);
                    rec.mspe = mspe(pred, data->test.response);
                    rec.ok = std::isfinite(rec.msee) && std::isfinite(rec.mspe);
                    if (!rec.ok) rec.reason = "non-finite prediction error";
                    if (want_bands[d]) out.band_preds[k] = predictor(data->train.covariates);
                } catch (const std::exception& e) {
                    rec.ok = false;
                    rec.reason = e.what();
                }
            }
            out.records.push_back(std::move(rec));
        }
        if (options.log) {
            std::ostringstream msg;
            msg << "design " << d << " replicate " << rep;
            for (const auto& r : out.records) {
                msg << " " << to_string(r.method) << "=" << (r.ok ? csv::fmt(r.msee) : std::string("failed"));
            }
            std::lock_guard lock(log_mutex);
            options.log(msg.str());
        }
    };

    const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(n_tasks)));
    if (threads == 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < n_tasks; t = next++) run_task(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    BenchmarkResult result;
    for (const auto& o : outs) result.replicates.insert(result.replicates.end(), o.records.begin(), o.records.end());

    for (std::size_t d = 0; d < n_designs; ++d) {
        for (std::size_t k = 0; k < n_methods; ++k) {
            SummaryRow row;
            row.design_index = d;
            row.design = options.designs[d];
            row.method = options.methods[k];
            std::vector<double> e, p;
            for (std::size_t r = 0; r < R; ++r) {
                const auto& rec = outs[d * R + r].records[k];
                if (rec.ok) {
                    e.push_back(rec.msee);
                    p.push_back(rec.mspe);
                } else {
                    ++row.failed;
                }
            }
            row.succeeded = static_cast<int>(e.size());
            if (e.empty()) {
                row.msee_mean = row.mspe_mean = row.msee_sd = row.mspe_sd = std::numeric_limits<double>::quiet_NaN();
            } else {
                row.msee_mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
                row.mspe_mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
                row.msee_sd = sample_sd(e, row.msee_mean);
                row.mspe_sd = sample_sd(p, row.mspe_mean);
            }
            result.summary.push_back(row);

            if (want_bands[d] && row.failed == 0) {
                const Eigen::Index npts = outs[d * R].band_preds[k].size();
                Eigen::MatrixXd preds(static_cast<Eigen::Index>(R), npts);
                for (std::size_t r = 0; r < R; ++r) preds.row(static_cast<Eigen::Index>(r)) = outs[d * R + r].band_preds[k].transpose();
                BandRecord band;
                band.design_index = d;
                band.method = options.methods[k];
                const auto locs = grf::LocationSet::line_grid(options.designs[d].n, options.designs[d].domain_size);
                band.locations = locs.coords().col(0);
                band.truth.resize(npts);
                for (Eigen::Index i = 0; i < npts; ++i) {
                    band.truth(i) = design1_mean(design1_covariates(band.locations(i), options.designs[d].domain_size));
                }
                band.band = sim_interval(preds);
                result.bands.push_back(std::move(band));
            }
        }
    }
    return result;
}

std::string replicates_csv(const BenchmarkResult& result, const std::vector<DesignSpec>& designs) {
    csv::Table t({"design", "replicate", "method", "msee", "mspe", "domain", "n", "D", "rho", "status", "reason"});
    for (const auto& r : result.replicates) {
        const DesignSpec& d = designs.at(r.design_index);
        t.row({std::to_string(d.design), std::to_string(r.replicate), std::string(to_string(r.method)),
               r.ok ? csv::fmt(r.msee) : "", r.ok ? csv::fmt(r.mspe) : "", std::string(to_string(d.domain_mode)),
               std::to_string(d.n), csv::fmt(d.domain_size), csv::fmt(d.range), r.ok ? "ok" : "failed", r.reason});
    }
    return t.str();
}

std::string summary_csv(const BenchmarkResult& result) {
    csv::Table t({"design", "domain", "n", "D", "rho", "method", "replicates", "failed", "msee_mean", "msee_sd",
                  "mspe_mean", "mspe_sd"});
    for (const auto& r : result.summary) {
        t.row({std::to_string(r.design.design), std::string(to_string(r.design.domain_mode)), std::to_string(r.design.n),
               csv::fmt(r.design.domain_size), csv::fmt(r.design.range), std::string(to_string(r.method)),
               std::to_string(r.succeeded), std::to_string(r.failed), csv::fmt(r.msee_mean), csv::fmt(r.msee_sd),
               csv::fmt(r.mspe_mean), csv::fmt(r.mspe_sd)});
    }
    return t.str();
}

std::string bands_csv(const BenchmarkResult& result) {
    csv::Table t({"design_index", "method", "point", "location", "truth", "lower", "upper"});
    for (const auto& b : result.bands) {
        for (Eigen::Index i = 0; i < b.locations.size(); ++i) {
            t.row({std::to_string(b.design_index), std::string(to_string(b.method)), std::to_string(i),
                   csv::fmt(b.locations(i)), csv::fmt(b.truth(i)), csv::fmt(b.band.lower(i)), csv::fmt(b.band.upper(i))});
        }
    }
    return t.str();
}

void write_benchmark(const BenchmarkResult& result, const std::vector<DesignSpec>& designs,
                     const std::filesystem::path& dir) {
    csv::write_atomic(dir / "replicates.csv", replicates_csv(result, designs));
    csv::write_atomic(dir / "summary.csv", summary_csv(result));
    if (!result.bands.empty()) csv::write_atomic(dir / "bands.csv", bands_csv(result));
}

std::string observations_csv(const Observations& obs) {
    std::vector<std::string> header;
    const int dim = obs.locations.dimension();
    for (int j = 0; j < dim; ++j) header.push_back("s" + std::to_string(j + 1));
    for (Eigen::Index j = 0; j < obs.covariates.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
    header.emplace_back("truth");
    header.emplace_back("y");
    csv::Table t(header);
    for (Eigen::Index i = 0; i < obs.covariates.rows(); ++i) {
        std::vector<std::string> cells;
        for (int j = 0; j < dim; ++j) cells.push_back(csv::fmt(obs.locations.coords()(i, j)));
        for (Eigen::Index j = 0; j < obs.covariates.cols(); ++j) cells.push_back(csv::fmt(obs.covariates(i, j)));
        cells.push_back(csv::fmt(obs.truth(i)));
        cells.push_back(csv::fmt(obs.response(i)));
        t.row(std::move(cells));
    }
    return t.str();
}

}  // namespace spatialdnn::sim
