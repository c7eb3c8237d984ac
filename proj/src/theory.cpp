#include "spatialdnn/theory.hpp"

#include "spatialdnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spatialdnn::theory {

namespace {

constexpr const char* kModule = "theory";
constexpr double kDomainTol = 1e-9;

double log_add_exp(double a, double b) {
    const double hi = std::max(a, b);
    if (hi == -std::numeric_limits<double>::infinity()) return hi;
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// prod_{l=from}^{L*} (beta_l ^ 1); empty product is 1.
double capped_product(const CsSpec& spec, int from) {
    double p = 1.0;
    for (int l = from; l <= spec.depth; ++l) p *= spec.beta[static_cast<std::size_t>(l)].capped();
    return p;
}

}  // namespace

void CsSpec::validate() const {
    if (depth < 0) throw InvalidInput(kModule, "depth L* must be nonnegative");
    const auto layers_n = static_cast<std::size_t>(depth + 1);
    if (r.size() != layers_n + 1 || r_active.size() != layers_n || beta.size() != layers_n || c.size() != layers_n ||
        a.size() != layers_n + 1 || b.size() != layers_n + 1) {
        throw InvalidInput(kModule, "compositional spec vectors have inconsistent lengths");
    }
    if (r.back() != 1) throw InvalidInput(kModule, "r_{L*+1} must be 1");
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] <= 0) throw InvalidInput(kModule, "r entries must be positive");
    }
    for (std::size_t i = 0; i < layers_n; ++i) {
        if (r_active[i] <= 0 || r_active[i] > r[i]) throw InvalidInput(kModule, "need 0 < r~_i <= r_i at layer " + std::to_string(i));
        if (!beta[i].is_infinite() && !(beta[i].value() > 0.0)) throw InvalidInput(kModule, "beta_i must be positive");
        if (!(c[i] > 1.0)) throw InvalidInput(kModule, "C_i must exceed 1");
        if (std::abs(a[i]) > c[i] || std::abs(b[i]) > c[i]) throw InvalidInput(kModule, "|a_i|, |b_i| must not exceed C_i");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] < b[i])) throw InvalidInput(kModule, "need a_i < b_i at index " + std::to_string(i));
    }
    if (!layers.empty() && layers.size() != layers_n) throw InvalidInput(kModule, "need one evaluator per layer");
}

IntrinsicSummary intrinsic(const CsSpec& spec) {
    spec.validate();
    IntrinsicSummary out;
    double best_ratio = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int i = 0; i <= spec.depth; ++i) {
        const Smoothness& bi = spec.beta[static_cast<std::size_t>(i)];
        const Smoothness star = bi.is_infinite() ? Smoothness::infinite() : Smoothness(bi.value() * capped_product(spec, i + 1));
        out.beta_star_per_layer.push_back(star);
        if (star.is_infinite()) continue;
        const double ratio = star.value() / spec.r_active[static_cast<std::size_t>(i)];
        if (!found || ratio < best_ratio) {
            best_ratio = ratio;
            out.argmin = i;
            found = true;
        }
    }
    out.upper_layer_exponent = capped_product(spec, 1);
    if (!found) {
        out.degenerate = true;
        out.argmin = 0;
        out.beta_star = Smoothness::infinite();
        out.r_star = spec.r_active.front();
        return out;
    }
    out.beta_star = out.beta_star_per_layer[static_cast<std::size_t>(out.argmin)];
    out.r_star = spec.r_active[static_cast<std::size_t>(out.argmin)];
    return out;
}

double eval_cs(const CsSpec& spec, const Eigen::VectorXd& z) {
    spec.validate();
    if (spec.layers.empty()) throw InvalidInput(kModule, "spec has no layer evaluators");
    if (z.size() != spec.r.front()) throw InvalidInput(kModule, "input must have r_0 entries");
    if ((z.array() < spec.a[0] - kDomainTol).any() || (z.array() > spec.b[0] + kDomainTol).any()) {
        throw InvalidInput(kModule, "input outside [a_0, b_0]^{r_0}");
    }
    Eigen::VectorXd cur = z;
    for (int i = 0; i <= spec.depth; ++i) {
        Eigen::VectorXd next = spec.layers[static_cast<std::size_t>(i)](cur);
        const auto out_idx = static_cast<std::size_t>(i + 1);
        if (next.size() != spec.r[out_idx]) {
            throw DomainViolation(kModule, i, "output has " + std::to_string(next.size()) + " entries, expected " +
                                                  std::to_string(spec.r[out_idx]));
        }
        for (Eigen::Index k = 0; k < next.size(); ++k) {
            if (!std::isfinite(next(k)) || next(k) < spec.a[out_idx] - kDomainTol || next(k) > spec.b[out_idx] + kDomainTol) {
                std::ostringstream msg;
                msg << "component " << k << " = " << next(k) << " not in [" << spec.a[out_idx] << ", " << spec.b[out_idx] << "]";
                throw DomainViolation(kModule, i, msg.str());
            }
        }
        cur = std::move(next);
    }
    return cur(0);
}

double covering_bound(double depth, double tau, double input_dim, double delta) {
    if (!(tau >= 1.0)) throw InvalidInput(kModule, "covering bound needs tau >= 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw InvalidInput(kModule, "covering bound needs delta in (0, 1]");
    if (!(depth >= 0.0) || !(input_dim >= 1.0)) throw InvalidInput(kModule, "covering bound needs L >= 0 and d >= 1");
    const double log_arg = (5.0 + 2.0 * depth) * std::log(2.0) - std::log(delta) + std::log(depth + 1.0) +
                           2.0 * depth * std::log(tau) + 2.0 * std::log(input_dim);
    return (1.0 + tau) * log_arg;
}

double zeta_bound(const BoundInputs& in) {
    if (!(in.eps > 0.0 && in.eps <= 1.0) || !(in.delta > 0.0 && in.delta <= 1.0)) {
        throw InvalidInput(kModule, "need eps, delta in (0, 1]");
    }
    if (!(in.tau >= 1.0) || !(in.depth >= 1.0) || !(in.n > 0.0)) throw InvalidInput(kModule, "need tau, L >= 1 and n > 0");
    const double avg_tr = in.tr_gamma / in.n;
    const double avg_tr_sq = in.tr_gamma_sq / in.n;
    const double covering_part = in.delta * (avg_tr + 2.0 * std::sqrt(avg_tr_sq) + 3.0 * in.sigma);
    const double complexity_part = in.tau / in.n * (std::log(in.depth / in.delta) + in.depth * std::log(in.tau)) *
                                   (avg_tr_sq + in.sigma * in.sigma + 1.0);
    return (covering_part + complexity_part) / in.eps;
}

RateTerms varsigma_rate(const BoundInputs& in, const IntrinsicSummary& summary, double delta_proxy) {
    if (!(in.width >= 1.0) || !(in.depth >= 1.0) || !(in.n > 0.0)) throw InvalidInput(kModule, "need N, L >= 1 and n > 0");
    if (!(delta_proxy >= 0.0)) throw InvalidInput(kModule, "optimisation gap proxy must be nonnegative");
    RateTerms t;
    const double N = in.width;
    const double L = in.depth;
    const double n = in.n;
    t.approx_depth = std::exp(2.0 * summary.upper_layer_exponent * (std::log(N) - L * std::log(2.0)));
    t.approx_width = summary.beta_star.is_infinite()
                         ? 0.0
                         : std::exp(-2.0 * summary.beta_star.value() / summary.r_star * std::log(N));
    t.stochastic = (in.tr_gamma_sq + n) * (L * N * std::log(L * n * n) + L * L * N * std::log(L * N)) / (n * n);
    t.optimisation = delta_proxy;
    t.total = t.approx_depth + t.approx_width + t.stochastic + t.optimisation;
    return t;
}

namespace {

std::vector<double> compute_c_tilde(const CsSpec& spec) {
    std::vector<double> out;
    double running = 0.0;
    for (int k = 0; k <= spec.depth; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        running += spec.c[ku] * (spec.b[ku] - spec.a[ku]) / (spec.b[ku + 1] - spec.a[ku + 1]);
        out.push_back(running);
    }
    const auto last = static_cast<std::size_t>(spec.depth);
    out.back() += spec.b[last] - spec.a[last];
    return out;
}

void require_finite_beta(const CsSpec& spec) {
    for (std::size_t i = 0; i < spec.beta.size(); ++i) {
        if (spec.beta[i].is_infinite()) {
            throw PreconditionError(kModule, "approximation bound needs finite beta (layer " + std::to_string(i) + " is infinite)");
        }
    }
}

double layer_min_width(const CsSpec& spec, std::size_t i, double c_tilde) {
    const double rt = spec.r_active[i];
    return std::max(std::pow(spec.beta[i].value() + 1.0, rt), (c_tilde + 1.0) * std::exp(rt));
}

}  // namespace

double approx_min_width(const CsSpec& spec) {
    spec.validate();
    require_finite_beta(spec);
    const auto ct = compute_c_tilde(spec);
    double w = 0.0;
    for (std::size_t i = 0; i < ct.size(); ++i) w = std::max(w, layer_min_width(spec, i, ct[i]));
    return w;
}

ApproxBound approx_bound(const CsSpec& spec, double width, int m) {
    spec.validate();
    require_finite_beta(spec);
    if (m < 1) throw InvalidInput(kModule, "m must be a positive integer");
    const auto ct = compute_c_tilde(spec);
    std::string failing;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        if (width < layer_min_width(spec, i, ct[i])) {
            failing += (failing.empty() ? "" : ", ") + std::to_string(i);
        }
    }
    if (!failing.empty()) {
        throw PreconditionError(kModule, "width N = " + std::to_string(width) + " below the required minimum at layer(s) " + failing);
    }

    ApproxBound out;
    ApproxSizing& s = out.sizing;
    s.c_tilde = ct;
    const double N = width;
    const int depth = spec.depth;

    double log_prefactor = std::log(spec.c[static_cast<std::size_t>(depth)]);
    for (int l = 0; l < depth; ++l) {
        log_prefactor += spec.beta[static_cast<std::size_t>(l + 1)].value() * std::log(2.0 * spec.c[static_cast<std::size_t>(l)]);
    }

    double log_sum = -std::numeric_limits<double>::infinity();
    int total_depth = 3 * depth;
    for (int i = 0; i <= depth; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const double rt = spec.r_active[iu];
        const double beta = spec.beta[iu].value();
        const double exponent = capped_product(spec, i + 1);
        const double log_grid = std::log(2.0 * ct[iu] + 1.0) + std::log(1.0 + rt * rt + beta * beta) + rt * std::log(6.0) +
                                std::log(N) - m * std::log(2.0);
        const double log_smooth = std::log(ct[iu]) + beta * std::log(3.0) - beta / rt * std::log(N);
        log_sum = log_add_exp(log_sum, exponent * log_add_exp(log_grid, log_smooth));

        const int li = 8 + (m + 5) * (1 + static_cast<int>(std::ceil(std::log2(std::max(rt, beta)))));
        s.layer_depths.push_back(li);
        total_depth += li;
        s.eta = std::max(s.eta, spec.r[iu + 1] * (rt + std::ceil(beta)));
        const double tau_i = 141.0 * std::pow(rt + beta + 1.0, 3.0 + rt) * N * (m + 6.0);
        s.layer_tau.push_back(tau_i);
        s.tau_cap += spec.r[iu + 1] * (tau_i + 4.0);
    }
    s.depth = total_depth;
    s.width = 6.0 * s.eta * N;
    out.log_bound = log_prefactor + log_sum;
    out.bound = std::exp(out.log_bound);
    return out;
}

CsSpec additive_structure(int d, double beta_h, double beta_phi) {
    if (d < 1) throw InvalidInput(kModule, "d must be positive");
    CsSpec s;
    s.depth = 2;
    s.r = {d, d, 1, 1};
    s.r_active = {d, d, 1};
    s.beta = {Smoothness(beta_h), Smoothness::infinite(), Smoothness(beta_phi)};
    s.a = {0.0, 0.0, 0.0, 0.0};
    s.b = {1.0, 1.0, static_cast<double>(d), 1.0};
    s.c = {2.0, 2.0, static_cast<double>(d) + 1.0};
    return s;
}

}  // namespace spatialdnn::theory
