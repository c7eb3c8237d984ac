#include "oracles.hpp"

#include "spatialdnn/baselines.hpp"
#include "spatialdnn/error.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace spatialdnn;
using namespace spatialdnn::baselines;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("nadaraya-watson examples", "[baselines]") {
    Eigen::MatrixXd x1(1, 2);
    x1 << 0.3, -0.2;
    Eigen::VectorXd y1(1);
    y1 << 4.5;
    const auto single = nw_fit(x1, y1, {KernelKind::gaussian, 0.5});
    const double q[2] = {10.0, -3.0};
    CHECK_THAT(nw_predict(single, q), WithinAbs(4.5, 1e-15));

    Eigen::MatrixXd x2(2, 1);
    x2 << -1.0, 1.0;
    Eigen::VectorXd y2(2);
    y2 << 0.0, 2.0;
    const auto pair = nw_fit(x2, y2, {KernelKind::gaussian, 0.7});
    const double mid[1] = {0.0};
    CHECK_THAT(nw_predict(pair, mid), WithinAbs(1.0, 1e-15));

    Eigen::MatrixXd x5(5, 2);
    x5 << 0.1, 0.9, 0.4, 0.2, 0.8, 0.5, 0.3, 0.3, 0.6, 0.7;
    Eigen::VectorXd y5(5);
    y5 << 1.0, -2.0, 0.5, 3.0, 1.5;
    const auto five = nw_fit(x5, y5, {KernelKind::gaussian, 0.3});
    const Eigen::Vector2d query(0.45, 0.55);
    CHECK_THAT(nw_predict(five, std::span<const double>(query.data(), 2)),
               WithinAbs(oracle::nw_direct(x5, y5, 0.3, true, query), 1e-12));
    const auto five_epa = nw_fit(x5, y5, {KernelKind::epanechnikov, 0.5});
    CHECK_THAT(nw_predict(five_epa, std::span<const double>(query.data(), 2)),
               WithinAbs(oracle::nw_direct(x5, y5, 0.5, false, query), 1e-12));
}

TEST_CASE("nadaraya-watson falls back to the nearest neighbour", "[baselines]") {
    Eigen::MatrixXd x(3, 1);
    x << 0.0, 1.0, 5.0;
    Eigen::VectorXd y(3);
    y << 1.0, 2.0, 3.0;
    const auto m = nw_fit(x, y, {KernelKind::epanechnikov, 0.1});
    const double far[1] = {4.2};
    CHECK(nw_predict(m, far) == 3.0);
    CHECK_THROWS_AS(nw_fit(x, y, {KernelKind::gaussian, 0.0}), InvalidInput);
}

TEST_CASE("nadaraya-watson is a convex combination and permutation invariant", "[baselines][property]") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::MatrixXd x = uniform_matrix(20, 3, rng);
        const Eigen::VectorXd y = uniform_matrix(20, 1, rng, -5.0, 5.0);
        const KernelKind kind = trial % 2 ? KernelKind::gaussian : KernelKind::epanechnikov;
        const auto m = nw_fit(x, y, {kind, 0.4});
        std::vector<Eigen::Index> perm(20);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto shuffled = nw_fit(x(perm, Eigen::all), y(perm), {kind, 0.4});
        const Eigen::MatrixXd q = uniform_matrix(10, 3, rng);
        const Eigen::VectorXd a = nw_predict_batch(m, q);
        const Eigen::VectorXd b = nw_predict_batch(shuffled, q);
        for (Eigen::Index i = 0; i < 10; ++i) {
            CHECK(a(i) >= y.minCoeff() - 1e-12);
            CHECK(a(i) <= y.maxCoeff() + 1e-12);
            CHECK_THAT(a(i), WithinAbs(b(i), 1e-12));
        }
    }
}

TEST_CASE("rule-of-thumb bandwidth", "[baselines]") {
    // Symmetric grid rescaled to unit sample sd.
    Eigen::MatrixXd x(100, 1);
    for (int i = 0; i < 100; ++i) x(i, 0) = i - 49.5;
    const double sd = std::sqrt(x.col(0).squaredNorm() / 99.0);
    x /= sd;
    CHECK_THAT(rule_of_thumb_bandwidth(x), WithinRel(std::pow(100.0, -0.2), 1e-12));
    CHECK_THAT(rule_of_thumb_bandwidth(x), WithinAbs(0.398, 5e-4));
    CHECK_THAT(rule_of_thumb_bandwidth(3.5 * x), WithinRel(3.5 * rule_of_thumb_bandwidth(x), 1e-12));

    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(20, 2, 1.0);
    CHECK_THROWS_AS(rule_of_thumb_bandwidth(flat), InvalidInput);
}

TEST_CASE("cross-validated bandwidth lies on the searched grid", "[baselines]") {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXd x = uniform_matrix(80, 2, rng);
    Eigen::VectorXd y = (6.0 * x.col(0)).array().sin() + x.col(1).array();
    const double h0 = rule_of_thumb_bandwidth(x);
    const auto grid = bandwidth_grid(h0);
    CHECK(grid.size() == 10);
    CHECK_THAT(grid.front(), WithinRel(h0 / 5.0, 1e-12));
    CHECK_THAT(grid.back(), WithinRel(h0 * 5.0, 1e-12));
    const double h = bandwidth_select(x, y, BandwidthRule::cv);
    CHECK(std::any_of(grid.begin(), grid.end(), [h](double g) { return g == h; }));
    CHECK(bandwidth_select(x, y, BandwidthRule::rule_of_thumb) == h0);
    CHECK_THROWS_AS(bandwidth_select(x.topRows(5), y.head(5), BandwidthRule::cv), InvalidInput);
}

TEST_CASE("gam on a constant response", "[baselines]") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd x = uniform_matrix(60, 3, rng);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(60, 2.75);
    const auto m = gam_fit(x, y);
    CHECK_THAT(m.intercept, WithinAbs(2.75, 1e-12));
    for (std::size_t j = 0; j < m.components.size(); ++j) {
        for (int i = 0; i < 60; ++i) CHECK(std::abs(m.components[j](x(i, static_cast<Eigen::Index>(j)))) <= 1e-8);
    }
    const Eigen::VectorXd pred = gam_predict_batch(m, x);
    CHECK((pred.array() - 2.75).abs().maxCoeff() <= 1e-8);
}

TEST_CASE("gam reproduces a noiseless plane", "[baselines]") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd x = uniform_matrix(200, 2, rng, -1.0, 1.0);
    const Eigen::VectorXd y = 2.0 * x.col(0) + 3.0 * x.col(1);
    const auto m = gam_fit(x, y);
    const Eigen::VectorXd plane = oracle::ols_predict(oracle::ols(x, y), x);
    CHECK(rmse(gam_predict_batch(m, x), plane) <= 1e-3);
}

TEST_CASE("gam beats the best linear fit on a curved additive truth", "[baselines]") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.3);
    const Eigen::MatrixXd x = uniform_matrix(500, 2, rng, -2.0, 2.0);
    Eigen::VectorXd y(500);
    for (int i = 0; i < 500; ++i) y(i) = std::sin(2.0 * x(i, 0)) + x(i, 1) * x(i, 1) + noise(rng);
    const auto m = gam_fit(x, y);
    const double gam_rmse = rmse(gam_predict_batch(m, x), y);
    const double lin_rmse = rmse(oracle::ols_predict(oracle::ols(x, y), x), y);
    CHECK(gam_rmse < lin_rmse);
    CHECK(gam_rmse < 0.32);
    CHECK(std::find(GamConfig{}.penalty_grid.begin(), GamConfig{}.penalty_grid.end(), m.penalty) !=
          GamConfig{}.penalty_grid.end());
}

TEST_CASE("gam near-interpolation reproduces training responses", "[baselines]") {
    std::mt19937_64 rng(4);
    Eigen::MatrixXd x(30, 1);
    for (int i = 0; i < 30; ++i) x(i, 0) = i / 29.0;
    Eigen::VectorXd y = (6.0 * x.col(0)).array().sin().matrix() + 0.1 * uniform_matrix(30, 1, rng, -1.0, 1.0);
    GamConfig cfg;
    cfg.knots = 27;
    cfg.penalty = 0.0;
    const auto m = gam_fit(x, y, cfg);
    CHECK((gam_predict_batch(m, x) - y).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("gam components are centered and additive", "[baselines][property]") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 0.5);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd x = uniform_matrix(150, 3, rng);
        Eigen::VectorXd y(150);
        for (int i = 0; i < 150; ++i) y(i) = std::exp(x(i, 0)) - std::cos(4.0 * x(i, 1)) + noise(rng);
        GamConfig cfg;
        cfg.penalty = 1e-3;
        const auto m = gam_fit(x, y, cfg);
        for (std::size_t j = 0; j < m.components.size(); ++j) {
            double mean = 0.0;
            for (int i = 0; i < 150; ++i) mean += m.components[j](x(i, static_cast<Eigen::Index>(j)));
            CHECK(std::abs(mean / 150.0) <= 1e-8);
        }
        for (std::size_t s = 1; s < m.objective_trace.size(); ++s) {
            CHECK(m.objective_trace[s] <= m.objective_trace[s - 1] * (1.0 + 1e-12));
        }
        // With a penalty only the penalized objective is guaranteed to fall;
        // the plain RSS is monotone for the unpenalized smoother.
        GamConfig plain = cfg;
        plain.penalty = 0.0;
        const auto u = gam_fit(x, y, plain);
        for (std::size_t s = 1; s < u.rss_trace.size(); ++s) {
            CHECK(u.rss_trace[s] <= u.rss_trace[s - 1] * (1.0 + 1e-9));
        }

        Eigen::Vector3d a(0.2, 0.4, 0.6), b = a;
        b(1) = 0.9;
        const double delta = gam_predict(m, std::span<const double>(b.data(), 3)) -
                             gam_predict(m, std::span<const double>(a.data(), 3));
        CHECK_THAT(delta, WithinAbs(m.components[1](0.9) - m.components[1](0.4), 1e-12));
    }
}

TEST_CASE("gam extrapolates linearly beyond the training range", "[baselines]") {
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd x = uniform_matrix(80, 1, rng);
    const Eigen::VectorXd y = x.col(0).array().square();
    const auto m = gam_fit(x, y);
    const auto& c = m.components[0];
    const double hi = c.hi;
    const double step = c(hi + 0.2) - c(hi + 0.1);
    CHECK_THAT(c(hi + 0.3) - c(hi + 0.2), WithinAbs(step, 1e-12));
    CHECK_THAT(c(hi), WithinAbs(c.value_hi, 1e-12));
}

TEST_CASE("gam validation and json round trip", "[baselines]") {
    std::mt19937_64 rng(10);
    const Eigen::MatrixXd x = uniform_matrix(40, 2, rng);
    const Eigen::VectorXd y = x.col(0) + x.col(1).array().sin().matrix();
    GamConfig cfg;
    cfg.knots = 38;
    CHECK_THROWS_AS(gam_fit(x, y, cfg), InvalidInput);

    cfg.knots = 5;
    cfg.penalty = 0.01;
    const auto m = gam_fit(x, y, cfg);
    const auto back = gam_from_json(nlohmann::json::parse(to_json(m).dump()));
    const Eigen::MatrixXd q = uniform_matrix(15, 2, rng, -0.2, 1.2);
    CHECK((gam_predict_batch(back, q) - gam_predict_batch(m, q)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(gam_from_json(nlohmann::json{{"format", "other"}}), InvalidInput);
}

TEST_CASE("b-spline basis forms a partition of unity", "[baselines][property]") {
    const std::vector<double> knots{0, 0, 0, 0, 0.2, 0.5, 0.7, 1, 1, 1, 1};
    for (int k = 0; k <= 100; ++k) {
        const double u = k / 100.0;
        const Eigen::VectorXd b = bspline_basis(knots, u);
        CHECK(b.size() == 7);
        CHECK_THAT(b.sum(), WithinAbs(1.0, 1e-12));
        CHECK(b.minCoeff() >= -1e-15);
        CHECK_THAT(bspline_basis_derivative(knots, u, 1).sum(), WithinAbs(0.0, 1e-9));
    }
}
