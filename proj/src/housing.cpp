#include "spatialdnn/housing.hpp"

#include "spatialdnn/csv.hpp"
#include "spatialdnn/error.hpp"
#include "spatialdnn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

namespace spatialdnn::housing {

namespace {

constexpr const char* kModule = "housing";

struct FieldSpec {
    const char* name;
    const char* alias;
    double HousingRecord::*member;
};

constexpr std::array<FieldSpec, 9> kFields{{
    {"longitude", nullptr, &HousingRecord::longitude},
    {"latitude", nullptr, &HousingRecord::latitude},
    {"median_age", "housing_median_age", &HousingRecord::median_age},
    {"total_rooms", nullptr, &HousingRecord::total_rooms},
    {"total_bedrooms", nullptr, &HousingRecord::total_bedrooms},
    {"population", nullptr, &HousingRecord::population},
    {"households", nullptr, &HousingRecord::households},
    {"median_income", nullptr, &HousingRecord::median_income},
    {"median_house_value", nullptr, &HousingRecord::median_house_value},
}};

std::string normalize(std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double covariate(const HousingRecord& r, int j) {
    switch (j) {
        case 0: return r.median_age;
        case 1: return r.total_rooms;
        case 2: return r.total_bedrooms;
        case 3: return r.population;
        case 4: return r.households;
        default: return r.median_income;
    }
}

double apply_log(double v, LogKind kind, int column) {
    switch (kind) {
        case LogKind::none: return v;
        case LogKind::log:
            if (!(v > 0.0)) {
                throw InvalidInput(kModule, std::string("non-positive value in log-transformed column ") + kCovariateNames[column]);
            }
            return std::log(v);
        case LogKind::log1p:
            if (v < 0.0) throw InvalidInput(kModule, std::string("negative count in column ") + kCovariateNames[column]);
            return std::log1p(v);
    }
    return v;
}

}  // namespace

LoadResult load_csv(const std::filesystem::path& path) {
    const csv::Document doc = csv::read_file(path);
    std::array<std::size_t, kFields.size()> index{};
    for (std::size_t f = 0; f < kFields.size(); ++f) {
        bool found = false;
        for (std::size_t c = 0; c < doc.header.size() && !found; ++c) {
            const std::string h = normalize(doc.header[c]);
            if (h == kFields[f].name || (kFields[f].alias && h == kFields[f].alias)) {
                index[f] = c;
                found = true;
            }
        }
        if (!found) throw SchemaError(kModule, kFields[f].name);
    }

    LoadResult out;
    out.records.reserve(doc.rows.size());
    for (const auto& row : doc.rows) {
        HousingRecord rec;
        bool ok = true;
        for (std::size_t f = 0; f < kFields.size() && ok; ++f) {
            const std::optional<double> v = index[f] < row.size() ? csv::parse_real(row[index[f]]) : std::nullopt;
            if (v) {
                rec.*(kFields[f].member) = *v;
            } else {
                ok = false;
            }
        }
        if (ok) {
            out.records.push_back(rec);
        } else {
            ++out.dropped;
        }
    }
    return out;
}

TransformMeta fit_transform(const std::vector<HousingRecord>& records) {
    if (records.empty()) throw InvalidInput(kModule, "no records to transform");
    TransformMeta meta;
    for (int j = 0; j < kCovariates; ++j) {
        if (j == 0) {
            meta.log[0] = LogKind::none;
        } else {
            const bool has_zero = std::any_of(records.begin(), records.end(),
                                              [j](const HousingRecord& r) { return covariate(r, j) == 0.0; });
            meta.log[static_cast<std::size_t>(j)] = has_zero ? LogKind::log1p : LogKind::log;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& r : records) {
            const double v = apply_log(covariate(r, j), meta.log[static_cast<std::size_t>(j)], j);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) throw InvalidInput(kModule, std::string("degenerate covariate ") + kCovariateNames[j] + " (max = min)");
        meta.min[static_cast<std::size_t>(j)] = lo;
        meta.max[static_cast<std::size_t>(j)] = hi;
    }
    return meta;
}

Eigen::MatrixXd apply_transform(const std::vector<HousingRecord>& records, const TransformMeta& meta) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), kCovariates);
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (int j = 0; j < kCovariates; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double v = apply_log(covariate(records[i], j), meta.log[ju], j);
            x(static_cast<Eigen::Index>(i), j) = (v - meta.min[ju]) / (meta.max[ju] - meta.min[ju]);
        }
    }
    return x;
}

ProcessedDataset preprocess(const std::vector<HousingRecord>& records) {
    ProcessedDataset out;
    out.meta = fit_transform(records);
    out.covariates = apply_transform(records, out.meta);
    const auto n = static_cast<Eigen::Index>(records.size());
    out.locations.resize(n, 2);
    out.response.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        out.locations(i, 0) = r.longitude;
        out.locations(i, 1) = r.latitude;
        out.response(i) = r.median_house_value;
    }
    return out;
}

CvReport kfold_mspe(const std::vector<HousingRecord>& records, sim::Method method, const CvOptions& options) {
    const std::size_t n = records.size();
    if (options.folds < 2 || n < static_cast<std::size_t>(options.folds)) {
        throw InvalidInput(kModule, "need 2 <= k <= n for k-fold cross-validation");
    }
    const auto k = static_cast<std::size_t>(options.folds);
    const auto assignment = kfold_assignment(n, options.folds, options.seed);

    CvReport report;
    report.method = method;
    report.fold_mspe.assign(k, std::numeric_limits<double>::quiet_NaN());
    report.fold_error.assign(k, "");
    report.fold_size.assign(k, 0);
    report.predictions = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::quiet_NaN());

    auto run_fold = [&](std::size_t f) {
        std::vector<HousingRecord> train, test;
        std::vector<Eigen::Index> test_idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<std::size_t>(assignment[i]) == f) {
                test.push_back(records[i]);
                test_idx.push_back(static_cast<Eigen::Index>(i));
            } else {
                train.push_back(records[i]);
            }
        }
        report.fold_size[f] = test.size();
        try {
            const TransformMeta meta = fit_transform(train);
            const Eigen::MatrixXd x_train = apply_transform(train, meta);
            const Eigen::MatrixXd x_test = apply_transform(test, meta);
            Eigen::VectorXd y_train(static_cast<Eigen::Index>(train.size()));
            for (std::size_t i = 0; i < train.size(); ++i) y_train(static_cast<Eigen::Index>(i)) = train[i].median_house_value;
            Eigen::VectorXd y_test(static_cast<Eigen::Index>(test.size()));
            for (std::size_t i = 0; i < test.size(); ++i) y_test(static_cast<Eigen::Index>(i)) = test[i].median_house_value;

            const auto predictor = sim::fit_method(method, x_train, y_train, options.method_options,
                                                   derive_seed(options.seed, {tag_hash(sim::to_string(method)), f}));
            const Eigen::VectorXd pred = predictor(x_test);
            const double score = sim::mspe(pred, y_test);
            if (!std::isfinite(score)) throw Error(kModule, "non-finite fold error");
            report.fold_mspe[f] = score;
            for (std::size_t i = 0; i < test_idx.size(); ++i) report.predictions(test_idx[i]) = pred(static_cast<Eigen::Index>(i));
        } catch (const std::exception& e) {
            report.fold_error[f] = e.what();
        }
    };

    const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(k)));
    if (threads == 1) {
        for (std::size_t f = 0; f < k; ++f) run_fold(f);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t f = next++; f < k; f = next++) run_fold(f);
            });
        }
        for (auto& th : pool) th.join();
    }

    double sum = 0.0;
    int ok = 0;
    for (std::size_t f = 0; f < k; ++f) {
        if (report.fold_error[f].empty()) {
            sum += report.fold_mspe[f];
            ++ok;
        } else {
            ++report.failed;
        }
    }
    report.mean_mspe = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    return report;
}

std::string folds_csv(const std::vector<CvReport>& reports) {
    csv::Table t({"fold", "method", "mspe", "size", "status", "reason"});
    for (const auto& r : reports) {
        for (std::size_t f = 0; f < r.fold_mspe.size(); ++f) {
            const bool ok = r.fold_error[f].empty();
            t.row({std::to_string(f), std::string(sim::to_string(r.method)), ok ? csv::fmt(r.fold_mspe[f]) : "",
                   std::to_string(r.fold_size[f]), ok ? "ok" : "failed", r.fold_error[f]});
        }
    }
    return t.str();
}

std::string summary_csv(const std::vector<CvReport>& reports) {
    csv::Table t({"method", "folds", "failed", "mean_mspe"});
    for (const auto& r : reports) {
        t.row({std::string(sim::to_string(r.method)), std::to_string(r.fold_mspe.size()), std::to_string(r.failed),
               csv::fmt(r.mean_mspe)});
    }
    return t.str();
}

std::string predictions_csv(const std::vector<HousingRecord>& records, const std::vector<CvReport>& reports) {
    csv::Table t({"lon", "lat", "method", "observed", "predicted"});
    for (const auto& r : reports) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            const double p = r.predictions(static_cast<Eigen::Index>(i));
            t.row({csv::fmt(records[i].longitude), csv::fmt(records[i].latitude), std::string(sim::to_string(r.method)),
                   csv::fmt(records[i].median_house_value), std::isfinite(p) ? csv::fmt(p) : ""});
        }
    }
    return t.str();
}

}  // namespace spatialdnn::housing
