#include "spatialdnn/error.hpp"
#include "spatialdnn/housing.hpp"
#include "spatialdnn/rng.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace spatialdnn;
using namespace spatialdnn::housing;
using Catch::Matchers::WithinAbs;

namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
    const fs::path dir = fs::temp_directory_path() / "spatialdnn_housing_tests";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

const char* kHeader =
    "longitude,latitude,housing_median_age,total_rooms,total_bedrooms,population,households,median_income,"
    "median_house_value\n";

std::vector<HousingRecord> synthetic(int n, std::uint64_t seed, bool constant_response = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<HousingRecord> out;
    for (int i = 0; i < n; ++i) {
        HousingRecord r;
        r.longitude = -124.0 + 10.0 * u(rng);
        r.latitude = 32.0 + 10.0 * u(rng);
        r.median_age = 1.0 + 50.0 * u(rng);
        r.total_rooms = 100.0 + 5000.0 * u(rng);
        r.total_bedrooms = 20.0 + 1000.0 * u(rng);
        r.population = 50.0 + 3000.0 * u(rng);
        r.households = 20.0 + 1000.0 * u(rng);
        r.median_income = 0.5 + 10.0 * u(rng);
        r.median_house_value = constant_response ? 150000.0 : 50000.0 + 30000.0 * std::log(r.median_income) + 1000.0 * u(rng);
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("load_csv examples", "[housing]") {
    const auto complete = write_temp("complete.csv", std::string(kHeader) +
                                                         "-122.2,37.8,41,880,129,322,126,8.3,452600\n"
                                                         "-122.2,37.9,21,7099,1106,2401,1138,8.3,358500\n"
                                                         "-122.3,37.8,52,1467,190,496,177,7.3,352100\n");
    const auto ok = load_csv(complete);
    CHECK(ok.records.size() == 3);
    CHECK(ok.dropped == 0);
    CHECK(ok.records[1].total_rooms == 7099.0);
    CHECK(ok.records[2].median_age == 52.0);

    const auto missing = write_temp("missing.csv", std::string(kHeader) + "-122.2,37.8,41,880,,322,126,8.3,452600\n");
    const auto dropped = load_csv(missing);
    CHECK(dropped.records.empty());
    CHECK(dropped.dropped == 1);

    const auto reordered = write_temp("reordered.csv",
                                      "MEDIAN_HOUSE_VALUE,median_income,households,population,total_bedrooms,total_rooms,"
                                      "median_age,latitude,longitude,ocean_proximity\n"
                                      "100,2,3,4,5,6,7,8,9,NEAR BAY\n");
    const auto ro = load_csv(reordered);
    REQUIRE(ro.records.size() == 1);
    CHECK(ro.records[0].longitude == 9.0);
    CHECK(ro.records[0].median_house_value == 100.0);

    const auto no_pop = write_temp("nopop.csv", "longitude,latitude,median_age,total_rooms,total_bedrooms,households,"
                                                "median_income,median_house_value\n1,2,3,4,5,6,7,8\n");
    try {
        (void)load_csv(no_pop);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("population") != std::string::npos);
    }
    CHECK_THROWS_AS(load_csv(write_temp("empty.csv", "")), InvalidInput);
}

TEST_CASE("preprocess examples", "[housing]") {
    std::vector<HousingRecord> recs(3);
    const double e = std::exp(1.0);
    const double values[3] = {1.0, e, e * e};
    const double ages[3] = {10.0, 30.0, 50.0};
    for (int i = 0; i < 3; ++i) {
        recs[i].median_age = ages[i];
        recs[i].total_rooms = values[i];
        recs[i].total_bedrooms = values[i];
        recs[i].population = values[i];
        recs[i].households = values[i];
        recs[i].median_income = values[i];
        recs[i].median_house_value = 1000.0 * (i + 1);
    }
    const auto p = preprocess(recs);
    for (int j = 0; j < kCovariates; ++j) {
        CHECK(p.covariates(0, j) == 0.0);
        CHECK_THAT(p.covariates(1, j), WithinAbs(0.5, 1e-15));
        CHECK(p.covariates(2, j) == 1.0);
    }
    CHECK(p.meta.log[0] == LogKind::none);
    for (int j = 1; j < kCovariates; ++j) CHECK(p.meta.log[static_cast<std::size_t>(j)] == LogKind::log);
    CHECK(p.response(2) == 3000.0);

    recs[1].total_rooms = 0.0;
    CHECK(fit_transform(recs).log[1] == LogKind::log1p);

    auto flat = recs;
    for (auto& r : flat) r.population = 5.0;
    CHECK_THROWS_AS(preprocess(flat), InvalidInput);
}

TEST_CASE("transforms are idempotent and never clip", "[housing][property]") {
    const auto recs = synthetic(200, 4);
    const auto p = preprocess(recs);
    CHECK((apply_transform(recs, p.meta) - p.covariates).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(p.covariates.minCoeff() >= 0.0);
    CHECK(p.covariates.maxCoeff() <= 1.0);
    for (int j = 0; j < kCovariates; ++j) {
        CHECK(p.covariates.col(j).minCoeff() == 0.0);
        CHECK(p.covariates.col(j).maxCoeff() == 1.0);
    }

    auto outside = synthetic(1, 9);
    outside[0].median_age = 500.0;
    outside[0].median_income = 1e-3;
    const Eigen::MatrixXd t = apply_transform(outside, p.meta);
    CHECK(t(0, 0) > 1.0);
    CHECK(t(0, 5) < 0.0);
}

TEST_CASE("fold assignment partitions the index set", "[housing][property]") {
    for (int k : {2, 5, 10}) {
        const auto folds = kfold_assignment(103, k, 17);
        std::vector<int> size(static_cast<std::size_t>(k), 0);
        for (int f : folds) {
            REQUIRE(f >= 0);
            REQUIRE(f < k);
            ++size[static_cast<std::size_t>(f)];
        }
        const auto [lo, hi] = std::minmax_element(size.begin(), size.end());
        CHECK(*hi - *lo <= 1);
    }
}

TEST_CASE("kfold_mspe leave-one-out on twenty rows", "[housing]") {
    const auto recs = synthetic(20, 5);
    CvOptions o;
    o.folds = 20;
    o.seed = 2;
    o.method_options.nw_bandwidth = baselines::BandwidthRule::rule_of_thumb;
    const auto r = kfold_mspe(recs, sim::Method::nw, o);
    CHECK(r.fold_mspe.size() == 20);
    CHECK(r.failed == 0);
    for (auto s : r.fold_size) CHECK(s == 1);
    CHECK(r.predictions.size() == 20);
    CHECK(r.predictions.allFinite());
    CHECK_THROWS_AS(kfold_mspe(recs, sim::Method::nw, CvOptions{21, 2, 1, o.method_options}), InvalidInput);
}

TEST_CASE("kfold_mspe on a constant response", "[housing]") {
    const auto recs = synthetic(120, 6, true);
    CvOptions o;
    o.folds = 5;
    o.method_options.dnn.train.epochs = 20;
    o.method_options.dnn.train.restarts = 1;
    for (auto m : {sim::Method::dnn, sim::Method::nw, sim::Method::gam}) {
        const auto r = kfold_mspe(recs, m, o);
        CHECK(r.failed == 0);
        CHECK(r.mean_mspe <= 1e-2);
    }
}

TEST_CASE("kfold reports are reproducible and written as csv", "[housing]") {
    const auto recs = synthetic(60, 8);
    CvOptions o;
    o.folds = 4;
    o.seed = 3;
    o.threads = 2;
    const auto a = kfold_mspe(recs, sim::Method::gam, o);
    o.threads = 1;
    const auto b = kfold_mspe(recs, sim::Method::gam, o);
    CHECK(a.fold_mspe == b.fold_mspe);
    const std::vector<CvReport> reports{a};
    CHECK(folds_csv(reports).rfind("fold,method,mspe", 0) == 0);
    const auto preds = predictions_csv(recs, reports);
    CHECK(preds.rfind("lon,lat,method,observed,predicted", 0) == 0);
    CHECK(std::count(preds.begin(), preds.end(), '\n') == 61);
}
