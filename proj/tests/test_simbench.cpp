#include "oracles.hpp"

#include "spatialdnn/error.hpp"
#include "spatialdnn/simbench.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace spatialdnn;
using namespace spatialdnn::sim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DesignSpec design1(int n, std::uint64_t seed) {
    DesignSpec s;
    s.design = 1;
    s.n = n;
    s.seed = seed;
    return s;
}

DesignSpec design2(int n, std::uint64_t seed) {
    DesignSpec s = design1(n, seed);
    s.design = 2;
    return s;
}

MethodOptions quick_options() {
    auto o = default_method_options();
    o.dnn.train.epochs = 20;
    o.dnn.train.restarts = 1;
    return o;
}

}  // namespace

TEST_CASE("design 1 covariates at the domain ends", "[simbench]") {
    for (double D : {1.0, 10.0, 30.0}) {
        const auto x0 = design1_covariates(0.0, D);
        CHECK(x0 == (Eigen::VectorXd(5) << 0, 0, 0, 1, 1).finished());
        CHECK(design1_mean(x0) == 2.0);
        const auto xd = design1_covariates(D, D);
        CHECK_THAT(design1_mean(xd), WithinAbs(2.5 + std::sin(10.0) + std::exp(3.0), 1e-12));
        CHECK_THAT(design1_mean(xd), WithinAbs(22.0415, 1e-4));
    }
}

TEST_CASE("design 1 generator", "[simbench]") {
    auto spec = design1(50, 3);
    const auto ds = gen_design1(spec);
    CHECK(ds.train.covariates.rows() == 50);
    CHECK(ds.train.response.size() == 50);
    CHECK(ds.test.covariates.rows() == 5);
    CHECK(ds.train.locations.coords()(0, 0) == 0.0);
    CHECK(ds.train.locations.coords()(49, 0) == 1.0);
    CHECK_THAT(ds.train.locations.coords()(7, 0), WithinAbs(7.0 / 49.0, 1e-15));
    for (Eigen::Index i = 0; i < 5; ++i) {
        const double s = ds.test.locations.coords()(i, 0);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        CHECK(ds.test.covariates.row(i).transpose() == design1_covariates(s, 1.0));
    }

    spec.noise_sd = 0.0;
    spec.field_variance = 0.0;
    const auto clean = gen_design1(spec);
    CHECK(clean.train.response == clean.train.truth);
    CHECK(clean.test.response == clean.test.truth);

    CHECK_THROWS_AS(gen_design1(design1(9, 1)), InvalidInput);
    auto wrong = design1(100, 1);
    wrong.domain_size = 10.0;
    CHECK_THROWS_AS(gen_design1(wrong), InvalidInput);
}

TEST_CASE("generators are bit-reproducible", "[simbench][property]") {
    for (const auto& spec : {design1(60, 11), design2(49, 11)}) {
        const auto a = generate(spec);
        const auto b = generate(spec);
        CHECK(a.train.covariates == b.train.covariates);
        CHECK(a.train.response == b.train.response);
        CHECK(a.test.response == b.test.response);
        CHECK(a.test.locations.coords() == b.test.locations.coords());
    }
}

TEST_CASE("design 1 covariates do not depend on the noise seed", "[simbench][property]") {
    const auto a = gen_design1(design1(40, 1));
    const auto b = gen_design1(design1(40, 2));
    CHECK(a.train.covariates == b.train.covariates);
    CHECK(a.train.truth == b.train.truth);
    CHECK(a.train.response != b.train.response);
}

TEST_CASE("design 2 mean function", "[simbench]") {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(5);
    const double zero[5] = {0, 0, 0, 0, 0};
    CHECK_THAT(design2_mean(zero, ones), WithinAbs(0.1, 1e-15));

    Eigen::VectorXd only_tanh = Eigen::VectorXd::Zero(5);
    only_tanh(4) = 1.7;
    const double x[5] = {0.0, 0.4, -0.3, 0.8, 1.1};
    CHECK(design2_mean(x, only_tanh) == 0.0);

    Eigen::VectorXd beta(5);
    beta << 1.2, 1.4, 1.6, 1.8, 1.1;
    const double y[5] = {0.5, -0.7, 0.3, -0.2, 0.9};
    const double expected = 1.2 * 0.5 * -0.7 + 1.4 * 0.49 * std::sin(0.3) + 1.6 * std::exp(-0.2) * 0.9 +
                            1.8 / (-1.0 * (10.0 + 0.9)) + 1.1 * std::tanh(0.5);
    CHECK_THAT(design2_mean(y, beta), WithinAbs(expected, 1e-14));
}

TEST_CASE("design 2 generator standardizes training covariates", "[simbench]") {
    auto spec = design2(100, 5);
    const auto ds = gen_design2(spec);
    CHECK(ds.train.covariates.rows() == 100);
    CHECK(ds.test.covariates.rows() == 10);
    CHECK(ds.train.locations.dimension() == 2);
    for (Eigen::Index j = 0; j < 5; ++j) {
        const auto col = ds.train.covariates.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / 99.0);
        CHECK(std::abs(mean) <= 1e-12);
        CHECK_THAT(sd, WithinAbs(1.0, 1e-12));
    }
    CHECK(ds.coefficients.minCoeff() >= 1.0);
    CHECK(ds.coefficients.maxCoeff() <= 2.0);
    for (Eigen::Index i = 0; i < 100; ++i) CHECK(std::abs(10.0 + ds.train.covariates(i, 4)) >= 0.1);

    spec.coef_mode = CoefMode::fixed;
    spec.coef_seed = 9;
    auto other = spec;
    other.seed = 6;
    CHECK(gen_design2(spec).coefficients == gen_design2(other).coefficients);
    CHECK(gen_design2(design2(100, 5)).coefficients != gen_design2(design2(100, 6)).coefficients);
    CHECK_THROWS_AS(gen_design2(design2(50, 1)), InvalidInput);
}

TEST_CASE("training and test spatial errors are sampled jointly", "[simbench][property]") {
    // e1 = y - f0 with the independent error disabled. For a pair at distance
    // r, E[(e1(s) - e1(t))^2] = 2 - 2 exp(-r / rho).
    double near_sq = 0.0, near_cov = 0.0, all_sq = 0.0, all_cov = 0.0;
    const int reps = 2000;
    for (int rep = 0; rep < reps; ++rep) {
        auto spec = design1(10, static_cast<std::uint64_t>(rep));
        spec.noise_sd = 0.0;
        const auto ds = gen_design1(spec);
        const Eigen::VectorXd e_train = ds.train.response - ds.train.truth;
        const double e_test = ds.test.response(0) - ds.test.truth(0);
        const double t = ds.test.locations.coords()(0, 0);
        Eigen::Index nearest = 0;
        double best = 2.0;
        for (Eigen::Index i = 0; i < 10; ++i) {
            const double s = ds.train.locations.coords()(i, 0);
            const double r = std::abs(s - t);
            if (r < best) {
                best = r;
                nearest = i;
            }
            all_sq += (e_train(i) - e_test) * (e_train(i) - e_test) / 10.0;
            all_cov += std::exp(-r / 0.5) / 10.0;
        }
        near_sq += (e_train(nearest) - e_test) * (e_train(nearest) - e_test);
        near_cov += std::exp(-best / 0.5);
    }
    CHECK_THAT(1.0 - near_sq / reps / 2.0, WithinAbs(near_cov / reps, 0.05));
    CHECK_THAT(1.0 - all_sq / reps / 2.0, WithinAbs(all_cov / reps, 0.05));
}

TEST_CASE("error metrics", "[simbench]") {
    const Eigen::Vector3d truth(1.0, -2.0, 0.5);
    CHECK(msee(truth, truth) == 0.0);
    CHECK_THAT(msee(truth.array() + 0.3, truth), WithinAbs(0.09, 1e-15));
    CHECK(mspe(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 4)) == 2.5);
    CHECK_THROWS_AS(mspe(Eigen::Vector2d(1, 2), truth), InvalidInput);
}

TEST_CASE("simulation bands", "[simbench]") {
    Eigen::MatrixXd seq(100, 2);
    for (int r = 0; r < 100; ++r) {
        seq(r, 0) = 100 - r;
        seq(r, 1) = 4.25;
    }
    const auto band = sim_interval(seq);
    CHECK(band.lower(0) == 2.5);
    CHECK(band.upper(0) == 97.5);
    CHECK(band.lower(1) == 4.25);
    CHECK(band.upper(1) == 4.25);

    std::mt19937_64 rng(12);
    std::normal_distribution<double> z;
    Eigen::MatrixXd draws(100, 30);
    for (Eigen::Index i = 0; i < draws.size(); ++i) draws.data()[i] = z(rng);
    const auto random_band = sim_interval(draws);
    for (Eigen::Index j = 0; j < 30; ++j) {
        std::vector<double> col(draws.col(j).data(), draws.col(j).data() + 100);
        const auto [lo, hi] = oracle::band(col);
        CHECK(random_band.lower(j) == lo);
        CHECK(random_band.upper(j) == hi);
        CHECK(lo <= hi);
    }
    CHECK_THROWS_AS(sim_interval(Eigen::MatrixXd::Zero(99, 3)), UnsupportedReplicateCount);
}

TEST_CASE("hyperparameter grid", "[simbench]") {
    const auto grid = default_grid();
    CHECK(grid.size() == 36);
    CHECK(make_grid({2}, {16, 32}, {1e-4}, {1e-3, 1e-2}).size() == 4);
}

TEST_CASE("select_hyperparams examples", "[simbench]") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(100, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
    const Eigen::Vector3d w(0.8, -0.5, 0.3);
    Eigen::VectorXd y = x * w;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.1 * z(rng);

    net::TrainConfig base;
    base.epochs = 10;
    base.restarts = 1;
    const std::vector<GridPoint> one{{2, 8, 1e-4, 1e-2}};
    const auto single = select_hyperparams(x, y, one, base, 1);
    CHECK(single.point.width == 8);
    CHECK(single.config.learning_rate == 1e-2);
    CHECK(single.scores.size() == 1);

    CHECK_THROWS_AS(select_hyperparams(x, y, {}, base, 1), InvalidInput);
    CHECK_THROWS_AS(select_hyperparams(x.topRows(20), y.head(20), one, base, 1), InvalidInput);

    base.epochs = 300;
    const auto grid = make_grid({2}, {16, 32}, {1e-5}, {1e-3, 1e-2});
    const auto sel = select_hyperparams(x, y, grid, base, 2);
    for (const auto& s : sel.scores) CHECK(sel.cv_mspe <= s.cv_mspe);

    // Noise level 0.1 keeps the comparison meaningful: OLS error on fresh data.
    Eigen::MatrixXd xt(2000, 3);
    for (Eigen::Index i = 0; i < xt.size(); ++i) xt.data()[i] = z(rng);
    Eigen::VectorXd yt = xt * w;
    for (Eigen::Index i = 0; i < yt.size(); ++i) yt(i) += 0.1 * z(rng);
    const double ols_mse = (oracle::ols_predict(oracle::ols(x, y), xt) - yt).squaredNorm() / 2000.0;
    CHECK(sel.cv_mspe <= 2.0 * ols_mse);
}

TEST_CASE("method parsing", "[simbench]") {
    CHECK(parse_methods("dnn,nw,gam").size() == 3);
    CHECK(parse_method("nw") == Method::nw);
    CHECK_THROWS_AS(parse_method("svc"), InvalidInput);
    CHECK(parse_domain_mode("expanding") == DomainMode::expanding);
}

TEST_CASE("benchmark table shape", "[simbench]") {
    BenchmarkOptions o;
    o.designs = {design1(100, 0)};
    o.methods = {Method::nw};
    o.replicates = 2;
    o.seed = 7;
    o.method_options = quick_options();
    const auto r = run_benchmark(o);
    REQUIRE(r.summary.size() == 1);
    CHECK(r.summary[0].succeeded == 2);
    CHECK(std::isfinite(r.summary[0].msee_mean));
    CHECK(std::isfinite(r.summary[0].msee_sd));
    CHECK(r.replicates.size() == 2);
    CHECK(r.bands.empty());

    std::istringstream lines(summary_csv(r));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 2);
}

TEST_CASE("identical replicates give zero spread", "[simbench]") {
    BenchmarkOptions o;
    o.designs = {design1(100, 0)};
    o.methods = {Method::dnn, Method::nw, Method::gam};
    o.replicates = 2;
    o.seed = 3;
    o.identical_replicates = true;
    o.method_options = quick_options();
    const auto r = run_benchmark(o);
    REQUIRE(r.summary.size() == 3);
    for (const auto& row : r.summary) {
        CHECK(row.msee_sd == 0.0);
        CHECK(row.mspe_sd == 0.0);
    }
}

TEST_CASE("benchmark is reproducible and independent of thread count", "[simbench][property]") {
    BenchmarkOptions o;
    o.designs = {design1(100, 0), design2(100, 0)};
    o.replicates = 3;
    o.seed = 21;
    o.method_options = quick_options();
    o.threads = 1;
    const auto a = run_benchmark(o);
    o.threads = 3;
    const auto b = run_benchmark(o);
    CHECK(summary_csv(a) == summary_csv(b));
    CHECK(replicates_csv(a, o.designs) == replicates_csv(b, o.designs));

    for (const auto& row : a.summary) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& rec : a.replicates) {
            if (rec.design_index == row.design_index && rec.method == row.method && rec.ok) {
                lo = std::min(lo, rec.msee);
                hi = std::max(hi, rec.msee);
            }
        }
        CHECK(row.msee_mean >= lo - 1e-12);
        CHECK(row.msee_mean <= hi + 1e-12);
        CHECK(row.msee_sd >= 0.0);
    }
}

TEST_CASE("benchmark bands need exactly 100 replicates", "[simbench]") {
    BenchmarkOptions o;
    o.designs = {design1(20, 0)};
    o.methods = {Method::nw};
    o.replicates = 100;
    o.seed = 5;
    o.method_options = quick_options();
    o.method_options.nw_bandwidth = baselines::BandwidthRule::rule_of_thumb;
    const auto r = run_benchmark(o);
    REQUIRE(r.bands.size() == 1);
    const auto& band = r.bands[0].band;
    CHECK(band.lower.size() == 20);
    CHECK((band.lower.array() <= band.upper.array()).all());
    CHECK(bands_csv(r).find("lower") != std::string::npos);
}
