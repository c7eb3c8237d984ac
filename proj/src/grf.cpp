#include "spatialdnn/grf.hpp"

#include "spatialdnn/csv.hpp"
#include "spatialdnn/error.hpp"
#include "spatialdnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

namespace spatialdnn::grf {

void CovarianceModel::validate() const {
    if (!(range > 0.0) || !std::isfinite(range)) throw InvalidInput("grf", "range must be positive");
    if (!(variance > 0.0) || !std::isfinite(variance)) throw InvalidInput("grf", "variance must be positive");
    if (kind == CovKind::matern && smoothness != 0.5 && smoothness != 1.5 && smoothness != 2.5) {
        throw InvalidInput("grf", "matern smoothness must be one of 0.5, 1.5, 2.5");
    }
}

LocationSet::LocationSet(Eigen::MatrixXd coords, double domain_size)
    : coords_(std::move(coords)), domain_size_(domain_size) {
    if (coords_.rows() == 0) throw InvalidInput("grf", "location set is empty");
    if (coords_.cols() != 1 && coords_.cols() != 2) throw InvalidInput("grf", "locations must be 1D or 2D");
    if (!(domain_size_ > 0.0)) throw InvalidInput("grf", "domain size must be positive");
    std::set<std::pair<double, double>> seen;
    for (Eigen::Index i = 0; i < coords_.rows(); ++i) {
        for (Eigen::Index j = 0; j < coords_.cols(); ++j) {
            const double c = coords_(i, j);
            if (!std::isfinite(c) || c < 0.0 || c > domain_size_) {
                throw InvalidInput("grf", "coordinate outside [0, D] at location " + std::to_string(i));
            }
        }
        const double second = coords_.cols() == 2 ? coords_(i, 1) : 0.0;
        if (!seen.emplace(coords_(i, 0), second).second) {
            throw InvalidInput("grf", "duplicate location at index " + std::to_string(i));
        }
    }
}

LocationSet LocationSet::concat(const LocationSet& a, const LocationSet& b) {
    if (a.dimension() != b.dimension()) throw InvalidInput("grf", "cannot concatenate locations of different dimension");
    Eigen::MatrixXd all(a.size() + b.size(), a.dimension());
    all << a.coords(), b.coords();
    return LocationSet(std::move(all), std::max(a.domain_size(), b.domain_size()));
}

LocationSet LocationSet::line_grid(Eigen::Index n, double domain_size) {
    if (n < 2) throw InvalidInput("grf", "line grid needs at least two points");
    Eigen::MatrixXd c(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i, 0) = static_cast<double>(i) * domain_size / static_cast<double>(n - 1);
    }
    c(n - 1, 0) = domain_size;
    return LocationSet(std::move(c), domain_size);
}

LocationSet LocationSet::square_grid(Eigen::Index k, double domain_size) {
    if (k < 2) throw InvalidInput("grf", "square grid needs at least two points per side");
    Eigen::MatrixXd c(k * k, 2);
    const double h = domain_size / static_cast<double>(k - 1);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            c(i * k + j, 0) = i == k - 1 ? domain_size : static_cast<double>(i) * h;
            c(i * k + j, 1) = j == k - 1 ? domain_size : static_cast<double>(j) * h;
        }
    }
    return LocationSet(std::move(c), domain_size);
}

double cov_at_distance(const CovarianceModel& model, double r) {
    if (model.kind == CovKind::exponential) {
        return model.variance * std::exp(-r / model.range);
    }
    const double x = std::sqrt(2.0 * model.smoothness) * r / model.range;
    double poly = 1.0;
    if (model.smoothness == 1.5) {
        poly = 1.0 + x;
    } else if (model.smoothness == 2.5) {
        poly = 1.0 + x + x * x / 3.0;
    }
    return model.variance * poly * std::exp(-x);
}

double cov_eval(const CovarianceModel& model, std::span<const double> s, std::span<const double> t) {
    if (s.size() != t.size()) throw InvalidInput("grf", "points have different dimensions");
    double sq = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!std::isfinite(s[k]) || !std::isfinite(t[k])) throw InvalidInput("grf", "non-finite coordinate");
        const double d = s[k] - t[k];
        sq += d * d;
    }
    return cov_at_distance(model, std::sqrt(sq));
}

CovMatrix build_cov(const CovarianceModel& model, const LocationSet& locs) {
    model.validate();
    const Eigen::Index n = locs.size();
    const auto& c = locs.coords();
    CovMatrix out;
    out.entries.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.entries(i, i) = model.variance;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double r = (c.row(i) - c.row(j)).norm();
            const double v = cov_at_distance(model, r);
            out.entries(i, j) = v;
            out.entries(j, i) = v;
        }
    }
    return out;
}

CholeskyFactor chol(const CovMatrix& cov) {
    const Eigen::Index n = cov.entries.rows();
    if (cov.entries.cols() != n) throw InvalidInput("grf", "covariance matrix is not square");
    for (double jitter : kJitterLadder) {
        Eigen::MatrixXd a = cov.entries;
        a.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() == Eigen::Success) {
            return {llt.matrixL(), cov.jitter_applied + jitter};
        }
    }
    throw NotPositiveDefinite("grf", "Cholesky failed even with jitter " + std::to_string(kJitterLadder[3]));
}

GrfSample sample_field(const Eigen::MatrixXd& lower, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(lower.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    GrfSample out;
    out.values = lower.triangularView<Eigen::Lower>() * z;
    out.seed = seed;
    return out;
}

Traces traces(const Eigen::MatrixXd& cov) {
    Traces t;
    const Eigen::Index n = cov.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        t.tr_gamma += cov(i, i);
        t.tr_gamma_sq += cov(i, i) * cov(i, i);
        double off = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) off += cov(i, j) * cov(i, j);
        t.tr_gamma_sq += 2.0 * off;
    }
    return t;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
    out << "i,j,value\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << i << ',' << j << ',' << csv::fmt(m(i, j)) << '\n';
        }
    }
}

void write_sample_csv(std::ostream& out, const Eigen::VectorXd& v) {
    out << "i,value\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) out << i << ',' << csv::fmt(v(i)) << '\n';
}

}  // namespace spatialdnn::grf
