#pragma once

// Simulation designs with spatially dependent errors, evaluation metrics,
// replicate bands, cross-validated network tuning and the replication harness.

#include "spatialdnn/baselines.hpp"
#include "spatialdnn/grf.hpp"
#include "spatialdnn/netcore.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spatialdnn::sim {

enum class DomainMode { fixed, expanding };
enum class CoefMode { per_replicate, fixed };

[[nodiscard]] std::string_view to_string(DomainMode mode) noexcept;
[[nodiscard]] DomainMode parse_domain_mode(std::string_view text);

struct DesignSpec {
    int design = 1;  // 1 or 2
    DomainMode domain_mode = DomainMode::fixed;
    int n = 100;
    double domain_size = 1.0;  // D; must be 1 in fixed mode
    double range = 0.5;        // rho of the exponential field
    std::uint64_t seed = 0;
    double noise_sd = 1.0;        // sigma of the independent error; 0 disables it
    double field_variance = 1.0;  // variance of the spatial error; 0 disables it
    CoefMode coef_mode = CoefMode::per_replicate;  // design 2 only
    std::uint64_t coef_seed = 0;                   // used when coef_mode == fixed

    void validate() const;
    [[nodiscard]] int test_size() const noexcept { return n / 10; }
};

struct Observations {
    grf::LocationSet locations;
    Eigen::MatrixXd covariates;  // one row per location
    Eigen::VectorXd response;
    Eigen::VectorXd truth;  // f0 at each location
};

struct SpatialDataset {
    Observations train;
    Observations test;
    Eigen::VectorXd coefficients;  // design 2 only
    int regenerations = 0;         // design 2 covariate redraws
};

/// Covariates of design 1 at location s in [0, D].
[[nodiscard]] Eigen::VectorXd design1_covariates(double s, double domain_size);
[[nodiscard]] double design1_mean(const Eigen::VectorXd& x);
/// Five-term mean function of design 2, with sign(0) = 1.
[[nodiscard]] double design2_mean(std::span<const double> x, const Eigen::VectorXd& coefficients);

[[nodiscard]] SpatialDataset gen_design1(const DesignSpec& spec);
[[nodiscard]] SpatialDataset gen_design2(const DesignSpec& spec);
[[nodiscard]] SpatialDataset generate(const DesignSpec& spec);

[[nodiscard]] double msee(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);
[[nodiscard]] double mspe(const Eigen::VectorXd& pred, const Eigen::VectorXd& observed);

struct IntervalBand {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

/// Pointwise band from exactly 100 replicate predictions (rows = replicates):
/// midpoints of the 2nd/3rd and 97th/98th order statistics.
[[nodiscard]] IntervalBand sim_interval(const Eigen::MatrixXd& replicate_preds);

struct GridPoint {
    int depth = 2;
    int width = 16;
    double l1_lambda = 1e-4;
    double learning_rate = 1e-3;
};

[[nodiscard]] std::vector<GridPoint> default_grid();
/// Cartesian product of the supplied axes.
[[nodiscard]] std::vector<GridPoint> make_grid(const std::vector<int>& depths, const std::vector<int>& widths,
                                               const std::vector<double>& l1, const std::vector<double>& lr);

struct GridScore {
    GridPoint point;
    double cv_mspe = 0.0;
};

struct Selection {
    GridPoint point;
    net::TrainConfig config;  // base config with the selected l1 and learning rate
    double cv_mspe = 0.0;
    std::vector<GridScore> scores;  // one per grid point, in grid order
};

/// 5-fold cross-validation over `grid` using `base` for every other training
/// setting. Ties go to the smaller width, then the smaller depth.
[[nodiscard]] Selection select_hyperparams(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           const std::vector<GridPoint>& grid, const net::TrainConfig& base,
                                           std::uint64_t seed);
[[nodiscard]] Selection select_hyperparams(const Observations& train, const std::vector<GridPoint>& grid,
                                           const net::TrainConfig& base, std::uint64_t seed);

enum class Method { dnn, nw, gam };

[[nodiscard]] std::string_view to_string(Method method) noexcept;
[[nodiscard]] Method parse_method(std::string_view text);
[[nodiscard]] std::vector<Method> parse_methods(std::string_view comma_list);

struct DnnOptions {
    net::TrainConfig train;         // clamp is in standardized response units
    std::vector<GridPoint> grid;    // empty or one point -> no cross-validation
    GridPoint fixed{2, 16, 0.2, 1e-2};  // used when grid is empty
    int cv_epochs = 0;              // epochs per CV fit; 0 -> train.epochs
    int cv_restarts = 1;
};

struct MethodOptions {
    DnnOptions dnn;
    baselines::KernelKind nw_kernel = baselines::KernelKind::gaussian;
    baselines::BandwidthRule nw_bandwidth = baselines::BandwidthRule::cv;
    baselines::GamConfig gam;
};

/// Sensible defaults for the benchmark harness.
[[nodiscard]] MethodOptions default_method_options();

using Predictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Fits `method` on (x, y). Covariates (and, for the network, the response)
/// are standardized with training statistics inside the returned predictor.
[[nodiscard]] Predictor fit_method(Method method, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const MethodOptions& options, std::uint64_t seed);

struct ReplicateRecord {
    std::size_t design_index = 0;
    int replicate = 0;
    Method method = Method::dnn;
    bool ok = false;
    double msee = 0.0;
    double mspe = 0.0;
    std::string reason;  // failure diagnostic
};

struct SummaryRow {
    std::size_t design_index = 0;
    DesignSpec design;
    Method method = Method::dnn;
    int succeeded = 0;
    int failed = 0;
    double msee_mean = 0.0, msee_sd = 0.0;
    double mspe_mean = 0.0, mspe_sd = 0.0;
};

struct BandRecord {
    std::size_t design_index = 0;
    Method method = Method::dnn;
    Eigen::VectorXd locations;  // evaluation points (training locations)
    Eigen::VectorXd truth;
    IntervalBand band;
};

struct BenchmarkOptions {
    std::vector<DesignSpec> designs;
    std::vector<Method> methods{Method::dnn, Method::nw, Method::gam};
    int replicates = 20;
    std::uint64_t seed = 0;
    int threads = 1;
    bool identical_replicates = false;  // every replicate reuses replicate 0's seed
    MethodOptions method_options = default_method_options();
    /// Called after each finished replicate task (from worker threads, serialized).
    std::function<void(const std::string&)> log;
};

struct BenchmarkResult {
    std::vector<SummaryRow> summary;
    std::vector<ReplicateRecord> replicates;
    std::vector<BandRecord> bands;  // design 1 with exactly 100 replicates
};

/// Seed of replicate `replicate` of `design` under base seed `seed`.
[[nodiscard]] std::uint64_t replicate_seed(std::uint64_t seed, const DesignSpec& design, int replicate);

[[nodiscard]] BenchmarkResult run_benchmark(const BenchmarkOptions& options);

[[nodiscard]] std::string replicates_csv(const BenchmarkResult& result, const std::vector<DesignSpec>& designs);
[[nodiscard]] std::string summary_csv(const BenchmarkResult& result);
[[nodiscard]] std::string bands_csv(const BenchmarkResult& result);

/// Writes replicates.csv, summary.csv and (when present) bands.csv into `dir`.
void write_benchmark(const BenchmarkResult& result, const std::vector<DesignSpec>& designs,
                     const std::filesystem::path& dir);

/// train.csv / test.csv with location, covariate, truth and response columns.
[[nodiscard]] std::string observations_csv(const Observations& obs);

}  // namespace spatialdnn::sim
