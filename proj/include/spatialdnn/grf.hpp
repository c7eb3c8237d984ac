#pragma once

// Stationary Gaussian random fields: covariance models, dense covariance
// matrices, Cholesky sampling and trace diagnostics.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>

namespace spatialdnn::grf {

enum class CovKind { exponential, matern };

struct CovarianceModel {
    CovKind kind = CovKind::exponential;
    double range = 0.5;       // rho
    double smoothness = 0.5;  // nu, matern only: 0.5, 1.5 or 2.5
    double variance = 1.0;    // sigma^2 of the field

    /// Throws InvalidInput when an invariant is violated.
    void validate() const;

    [[nodiscard]] static CovarianceModel exponential(double range, double variance = 1.0) {
        return {CovKind::exponential, range, 0.5, variance};
    }
    [[nodiscard]] static CovarianceModel matern(double range, double smoothness, double variance = 1.0) {
        return {CovKind::matern, range, smoothness, variance};
    }
};

/// Points in [0, D]^dim, one per row.
class LocationSet {
public:
    LocationSet() = default;
    /// Validates: dim in {1,2}, nonempty, coordinates in [0, D], no duplicates.
    LocationSet(Eigen::MatrixXd coords, double domain_size);

    [[nodiscard]] Eigen::Index size() const noexcept { return coords_.rows(); }
    [[nodiscard]] int dimension() const noexcept { return static_cast<int>(coords_.cols()); }
    [[nodiscard]] double domain_size() const noexcept { return domain_size_; }
    [[nodiscard]] const Eigen::MatrixXd& coords() const noexcept { return coords_; }

    /// Concatenates two sets over the same domain (used for joint train/test fields).
    [[nodiscard]] static LocationSet concat(const LocationSet& a, const LocationSet& b);

    /// n equally spaced points on [0, D] including both endpoints.
    [[nodiscard]] static LocationSet line_grid(Eigen::Index n, double domain_size);
    /// k x k equally spaced grid on [0, D]^2 including the boundary.
    [[nodiscard]] static LocationSet square_grid(Eigen::Index k, double domain_size);

private:
    Eigen::MatrixXd coords_;
    double domain_size_ = 1.0;
};

struct CovMatrix {
    Eigen::MatrixXd entries;
    double jitter_applied = 0.0;
};

struct CholeskyFactor {
    Eigen::MatrixXd lower;
    double jitter_applied = 0.0;
};

struct GrfSample {
    Eigen::VectorXd values;
    std::uint64_t seed = 0;
};

[[nodiscard]] double cov_eval(const CovarianceModel& model, std::span<const double> s, std::span<const double> t);

/// Covariance as a function of Euclidean distance only.
[[nodiscard]] double cov_at_distance(const CovarianceModel& model, double r);

[[nodiscard]] CovMatrix build_cov(const CovarianceModel& model, const LocationSet& locs);

/// Jitter ladder tried in order until the factorization succeeds.
inline constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-8, 1e-6};

/// Lower Cholesky factor of entries + jitter*I.
[[nodiscard]] CholeskyFactor chol(const CovMatrix& cov);

/// values = L z with z ~ N(0, I) drawn from a generator seeded with `seed`.
[[nodiscard]] GrfSample sample_field(const Eigen::MatrixXd& lower, std::uint64_t seed);
[[nodiscard]] inline GrfSample sample_field(const CholeskyFactor& factor, std::uint64_t seed) {
    return sample_field(factor.lower, seed);
}

struct Traces {
    double tr_gamma = 0.0;
    double tr_gamma_sq = 0.0;
};

[[nodiscard]] Traces traces(const Eigen::MatrixXd& cov);
[[nodiscard]] inline Traces traces(const CovMatrix& cov) { return traces(cov.entries); }

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
void write_sample_csv(std::ostream& out, const Eigen::VectorXd& v);

}  // namespace spatialdnn::grf
