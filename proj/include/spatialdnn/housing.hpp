#pragma once

// California block-group housing data: ingestion, covariate transforms and
// k-fold out-of-sample comparison of the estimators.

#include "spatialdnn/simbench.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spatialdnn::housing {

struct HousingRecord {
    double longitude = 0.0;
    double latitude = 0.0;
    double median_age = 0.0;
    double total_rooms = 0.0;
    double total_bedrooms = 0.0;
    double population = 0.0;
    double households = 0.0;
    double median_income = 0.0;
    double median_house_value = 0.0;
};

struct LoadResult {
    std::vector<HousingRecord> records;
    std::size_t dropped = 0;  // rows with a missing or unparseable field
};

/// Header names are matched case-insensitively in any order; the common
/// spelling "housing_median_age" is accepted for median_age.
[[nodiscard]] LoadResult load_csv(const std::filesystem::path& path);

inline constexpr int kCovariates = 6;
/// Model covariates in column order.
inline constexpr std::array<const char*, kCovariates> kCovariateNames{
    "median_age", "total_rooms", "total_bedrooms", "population", "households", "median_income"};

enum class LogKind { none, log, log1p };

struct TransformMeta {
    std::array<LogKind, kCovariates> log{};
    std::array<double, kCovariates> min{};
    std::array<double, kCovariates> max{};
};

struct ProcessedDataset {
    Eigen::MatrixXd locations;   // n x 2: longitude, latitude
    Eigen::MatrixXd covariates;  // n x 6
    Eigen::VectorXd response;    // median house value, original units
    TransformMeta meta;
};

/// Learns the transform on `records`: natural log on every count covariate
/// (log1p for a column containing zeros), then min-max scaling.
[[nodiscard]] TransformMeta fit_transform(const std::vector<HousingRecord>& records);
/// Applies stored metadata without clipping; values outside the training
/// range map outside [0, 1].
[[nodiscard]] Eigen::MatrixXd apply_transform(const std::vector<HousingRecord>& records, const TransformMeta& meta);
[[nodiscard]] ProcessedDataset preprocess(const std::vector<HousingRecord>& records);

struct CvReport {
    sim::Method method = sim::Method::dnn;
    std::vector<double> fold_mspe;  // NaN for failed folds
    std::vector<std::string> fold_error;
    std::vector<std::size_t> fold_size;
    double mean_mspe = 0.0;  // over successful folds
    int failed = 0;
    Eigen::VectorXd predictions;  // out-of-fold, NaN where the fold failed
};

struct CvOptions {
    int folds = 10;
    std::uint64_t seed = 0;
    int threads = 1;
    sim::MethodOptions method_options = sim::default_method_options();
};

/// Seeded shuffled k-fold. Every fold refits the transform and the method
/// (including any hyperparameter search) on its training part only.
[[nodiscard]] CvReport kfold_mspe(const std::vector<HousingRecord>& records, sim::Method method,
                                  const CvOptions& options);

[[nodiscard]] std::string folds_csv(const std::vector<CvReport>& reports);
[[nodiscard]] std::string summary_csv(const std::vector<CvReport>& reports);
[[nodiscard]] std::string predictions_csv(const std::vector<HousingRecord>& records,
                                          const std::vector<CvReport>& reports);

}  // namespace spatialdnn::housing
