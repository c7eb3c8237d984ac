#include "spatialdnn/cli.hpp"

#include "spatialdnn/csv.hpp"
#include "spatialdnn/error.hpp"
#include "spatialdnn/housing.hpp"
#include "spatialdnn/netcore.hpp"
#include "spatialdnn/simbench.hpp"
#include "spatialdnn/theory.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace spatialdnn::cli {

namespace {

constexpr const char* kModule = "cli";
const std::vector<std::string> kSubcommands{"simulate", "benchmark", "rates", "housing", "fit"};

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> real_list(const std::string& text, const char* what) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        const auto v = csv::parse_real(item);
        if (!v) throw InvalidInput(kModule, std::string("bad number '") + item + "' in --" + what);
        out.push_back(*v);
    }
    if (out.empty()) throw InvalidInput(kModule, std::string("--") + what + " needs at least one value");
    return out;
}

std::vector<int> int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    for (double v : real_list(text, what)) {
        if (v != std::floor(v)) throw InvalidInput(kModule, std::string("--") + what + " takes integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

int default_threads() {
    if (const char* env = std::getenv("SPATIALDNN_THREADS")) {
        const auto v = csv::parse_real(env);
        if (v && *v >= 1) return static_cast<int>(*v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Options shared by the subcommands that fit estimators.
struct DnnFlags {
    std::string grid = "fixed";  // fixed | default
    int depth = -1, width = -1;
    double l1 = -1.0, lr = -1.0;
    int epochs = -1, restarts = -1, cv_epochs = -1;

    void add(CLI::App* app) {
        app->add_option("--dnn-grid", grid, "Network tuning: fixed configuration or 5-fold CV over the default grid")
            ->check(CLI::IsMember({"fixed", "default"}));
        app->add_option("--dnn-depth", depth, "Hidden layers of the fixed configuration")->check(CLI::PositiveNumber);
        app->add_option("--dnn-width", width, "Hidden width of the fixed configuration")->check(CLI::PositiveNumber);
        app->add_option("--dnn-l1", l1, "l1 penalty of the fixed configuration")->check(CLI::NonNegativeNumber);
        app->add_option("--dnn-lr", lr, "Adam learning rate of the fixed configuration")->check(CLI::PositiveNumber);
        app->add_option("--dnn-epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
        app->add_option("--dnn-restarts", restarts, "Random restarts per fit")->check(CLI::PositiveNumber);
        app->add_option("--dnn-cv-epochs", cv_epochs, "Epochs per cross-validation fit")->check(CLI::PositiveNumber);
    }

    void apply(sim::MethodOptions& o) const {
        if (depth > 0) o.dnn.fixed.depth = depth;
        if (width > 0) o.dnn.fixed.width = width;
        if (l1 >= 0) o.dnn.fixed.l1_lambda = l1;
        if (lr > 0) o.dnn.fixed.learning_rate = lr;
        if (epochs > 0) o.dnn.train.epochs = epochs;
        if (restarts > 0) o.dnn.train.restarts = restarts;
        if (cv_epochs > 0) o.dnn.cv_epochs = cv_epochs;
        o.dnn.grid = grid == "default" ? sim::default_grid() : std::vector<sim::GridPoint>{};
    }
};

struct DesignFlags {
    int design = 1;
    std::string domain = "fixed";
    std::string n = "100";
    std::string domain_size;  // empty -> 1 in fixed mode
    std::string rho = "0.5";
    double sigma = 1.0;
    double field_variance = 1.0;
    std::string coef_mode = "per-replicate";
    std::uint64_t coef_seed = 0;

    void add(CLI::App* app, bool lists) {
        app->add_option("--design", design, "Simulation design (1 or 2)")->check(CLI::IsMember({1, 2}));
        app->add_option("--domain", domain, "Domain mode")->check(CLI::IsMember({"fixed", "expanding"}));
        app->add_option("--n", n, lists ? "Training sizes, comma separated" : "Training size");
        app->add_option("--D", domain_size, lists ? "Domain sizes, one per n or a single value" : "Domain size");
        app->add_option("--rho", rho, lists ? "Field ranges, comma separated" : "Field range");
        app->add_option("--sigma", sigma, "Standard deviation of the independent error")->check(CLI::NonNegativeNumber);
        app->add_option("--field-variance", field_variance, "Variance of the spatial error")->check(CLI::NonNegativeNumber);
        app->add_option("--coef-mode", coef_mode, "Design-2 coefficient draws")
            ->check(CLI::IsMember({"per-replicate", "fixed"}));
        app->add_option("--coef-seed", coef_seed, "Seed of the coefficients when --coef-mode fixed");
    }

    [[nodiscard]] std::vector<sim::DesignSpec> specs() const {
        const auto ns = int_list(n, "n");
        const auto rhos = real_list(rho, "rho");
        const auto mode = sim::parse_domain_mode(domain);
        std::vector<double> ds;
        if (domain_size.empty()) {
            if (mode == sim::DomainMode::expanding) throw InvalidInput(kModule, "--D is required in expanding mode");
            ds.assign(ns.size(), 1.0);
        } else {
            ds = real_list(domain_size, "D");
            if (ds.size() == 1) ds.assign(ns.size(), ds.front());
            if (ds.size() != ns.size()) throw InvalidInput(kModule, "--D needs one value per --n value");
        }
        std::vector<sim::DesignSpec> out;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            for (double r : rhos) {
                sim::DesignSpec s;
                s.design = design;
                s.domain_mode = mode;
                s.n = ns[i];
                s.domain_size = ds[i];
                s.range = r;
                s.noise_sd = sigma;
                s.field_variance = field_variance;
                s.coef_mode = coef_mode == "fixed" ? sim::CoefMode::fixed : sim::CoefMode::per_replicate;
                s.coef_seed = coef_seed;
                s.validate();
                out.push_back(s);
            }
        }
        return out;
    }
};

struct SimulateCmd {
    DesignFlags design;
    std::uint64_t seed = 0;
    std::string out = "results";
};

struct BenchmarkCmd {
    DesignFlags design;
    DnnFlags dnn;
    int replicates = 20;
    std::string methods = "dnn,nw,gam";
    std::uint64_t seed = 0;
    bool identical = false;
    std::string out = "results";
};

struct RatesCmd {
    double beta_star = 2.0;
    int r_star = 5;
    double upper_exponent = 1.0;
    double n_min = 1e2, n_max = 1e6;
    int per_decade = 4;
    double proxy = 0.0;
    std::string tr_gamma_sq = "n";
    std::string out;
};

struct HousingCmd {
    std::string data;
    DnnFlags dnn;
    std::string methods = "dnn,nw,gam";
    int folds = 10;
    std::uint64_t seed = 0;
    std::string out = "results";
};

struct FitCmd {
    std::string data;
    std::string response;
    int depth = 2, width = 16, epochs = 500, batch = 32, restarts = 3;
    double l1 = 1e-4, lr = 1e-3, clamp = 10.0;
    std::uint64_t seed = 0;
    std::string out = "results";
};

void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content, std::ostream& log) {
    csv::write_atomic(dir / name, content);
    log << "wrote " << (dir / name).string() << "\n";
}

void do_simulate(const SimulateCmd& c, std::ostream& log) {
    const auto specs = c.design.specs();
    if (specs.size() != 1) throw InvalidInput(kModule, "simulate takes a single n and rho");
    sim::DesignSpec spec = specs.front();
    spec.seed = c.seed;
    const auto ds = sim::generate(spec);
    const std::filesystem::path dir(c.out);
    write_file(dir, "train.csv", sim::observations_csv(ds.train), log);
    write_file(dir, "test.csv", sim::observations_csv(ds.test), log);
    if (spec.design == 2) log << "covariate regenerations: " << ds.regenerations << "\n";
}

void do_benchmark(const BenchmarkCmd& c, int threads, std::ostream& log) {
    sim::BenchmarkOptions o;
    o.designs = c.design.specs();
    o.methods = sim::parse_methods(c.methods);
    o.replicates = c.replicates;
    o.seed = c.seed;
    o.threads = threads;
    o.identical_replicates = c.identical;
    c.dnn.apply(o.method_options);
    o.log = [&log](const std::string& line) { log << line << "\n" << std::flush; };
    const auto result = sim::run_benchmark(o);
    const std::filesystem::path dir(c.out);
    write_file(dir, "replicates.csv", sim::replicates_csv(result, o.designs), log);
    write_file(dir, "summary.csv", sim::summary_csv(result), log);
    if (!result.bands.empty()) write_file(dir, "bands.csv", sim::bands_csv(result), log);
}

void do_rates(const RatesCmd& c, std::ostream& out, std::ostream& log) {
    if (!(c.n_min >= 2.0) || !(c.n_max >= c.n_min)) throw InvalidInput(kModule, "need 2 <= n-min <= n-max");
    if (c.per_decade < 1) throw InvalidInput(kModule, "--per-decade must be positive");
    theory::IntrinsicSummary summary;
    summary.beta_star = theory::Smoothness(c.beta_star);
    summary.r_star = c.r_star;
    summary.upper_layer_exponent = c.upper_exponent;
    csv::Table t({"n", "L", "N", "term1", "term2", "term3", "total"});
    const double lo = std::log10(c.n_min);
    const double hi = std::log10(c.n_max);
    const int steps = std::max(0, static_cast<int>(std::round((hi - lo) * c.per_decade)));
    for (int s = 0; s <= steps; ++s) {
        const double n = std::round(std::pow(10.0, steps == 0 ? lo : lo + (hi - lo) * s / steps));
        theory::BoundInputs in;
        in.n = n;
        in.depth = std::ceil(std::log(n));
        in.width = std::ceil(std::pow(n, c.r_star / (2.0 * c.beta_star + c.r_star)));
        if (c.tr_gamma_sq == "n") {
            in.tr_gamma_sq = n;
        } else {
            const auto v = csv::parse_real(c.tr_gamma_sq);
            if (!v || *v < 0) throw InvalidInput(kModule, "--tr-gamma-sq takes 'n' or a nonnegative number");
            in.tr_gamma_sq = *v;
        }
        const auto r = theory::varsigma_rate(in, summary, c.proxy);
        t.row({csv::fmt(n), csv::fmt(in.depth), csv::fmt(in.width), csv::fmt(r.approx_depth), csv::fmt(r.approx_width),
               csv::fmt(r.stochastic), csv::fmt(r.total)});
    }
    log << "# rate terms are scales with constants set to 1, not values\n";
    if (c.out.empty()) {
        out << t.str();
    } else {
        write_file(std::filesystem::path(c.out), "rates.csv", t.str(), log);
    }
}

void do_housing(const HousingCmd& c, int threads, std::ostream& log) {
    const auto loaded = housing::load_csv(c.data);
    log << "records: " << loaded.records.size() << ", dropped: " << loaded.dropped << "\n";
    housing::CvOptions o;
    o.folds = c.folds;
    o.seed = c.seed;
    o.threads = threads;
    c.dnn.apply(o.method_options);
    std::vector<housing::CvReport> reports;
    for (auto m : sim::parse_methods(c.methods)) {
        reports.push_back(housing::kfold_mspe(loaded.records, m, o));
        log << sim::to_string(m) << " mean mspe " << csv::fmt(reports.back().mean_mspe) << " (" << reports.back().failed
            << " failed folds)\n";
    }
    const std::filesystem::path dir(c.out);
    write_file(dir, "folds.csv", housing::folds_csv(reports), log);
    write_file(dir, "summary.csv", housing::summary_csv(reports), log);
    write_file(dir, "predictions.csv", housing::predictions_csv(loaded.records, reports), log);
}

void do_fit(const FitCmd& c, std::ostream& log) {
    const auto doc = csv::read_file(c.data);
    if (doc.header.size() < 2) throw InvalidInput(kModule, "fit needs at least one covariate and a response column");
    std::size_t resp = doc.header.size() - 1;
    if (!c.response.empty()) {
        const auto it = std::find(doc.header.begin(), doc.header.end(), c.response);
        if (it == doc.header.end()) throw SchemaError(kModule, c.response);
        resp = static_cast<std::size_t>(it - doc.header.begin());
    }
    std::vector<std::vector<double>> rows;
    std::size_t dropped = 0;
    for (const auto& r : doc.rows) {
        std::vector<double> vals;
        for (std::size_t j = 0; j < doc.header.size(); ++j) {
            const auto v = j < r.size() ? csv::parse_real(r[j]) : std::nullopt;
            if (!v) break;
            vals.push_back(*v);
        }
        if (vals.size() == doc.header.size()) {
            rows.push_back(std::move(vals));
        } else {
            ++dropped;
        }
    }
    if (rows.empty()) throw InvalidInput(kModule, "no complete rows in " + c.data);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(doc.header.size() - 1);
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < doc.header.size(); ++j) {
            if (j == resp) {
                y(i) = rows[static_cast<std::size_t>(i)][j];
            } else {
                x(i, col++) = rows[static_cast<std::size_t>(i)][j];
            }
        }
    }
    net::TrainConfig cfg;
    cfg.l1_lambda = c.l1;
    cfg.learning_rate = c.lr;
    cfg.epochs = c.epochs;
    cfg.batch_size = std::min<int>(c.batch, static_cast<int>(n));
    cfg.restarts = c.restarts;
    cfg.clamp = c.clamp;
    cfg.seed = c.seed;
    const auto fitted = net::fit(x, y, net::NetworkShape::uniform(static_cast<int>(d), c.depth, c.width), cfg);
    nlohmann::json doc_out;
    doc_out["network"] = net::to_json(fitted.params);
    std::vector<std::string> covariates;
    for (std::size_t j = 0; j < doc.header.size(); ++j) {
        if (j != resp) covariates.push_back(doc.header[j]);
    }
    doc_out["covariates"] = covariates;
    doc_out["response"] = doc.header[resp];
    doc_out["clamp"] = cfg.clamp;
    doc_out["training"] = {{"rows", n},
                           {"dropped_rows", dropped},
                           {"final_mse", fitted.final_mse},
                           {"nonzero_parameters", fitted.tau_hat},
                           {"restart_gap", fitted.delta_hat},
                           {"restart_mse", fitted.restart_mse}};
    log << "training mse " << csv::fmt(fitted.final_mse) << ", nonzero parameters " << fitted.tau_hat << "\n";
    write_file(std::filesystem::path(c.out), "model.json", doc_out.dump(2) + "\n", log);
}

// Inserts config-file arguments right after the subcommand name so that
// explicit flags, which come later, take precedence.
std::vector<std::string> with_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!path) return args;
    const auto extra = config_arguments(*path);
    const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) {
        return std::find(kSubcommands.begin(), kSubcommands.end(), a) != kSubcommands.end();
    });
    if (sub == args.end()) return args;
    args.insert(sub + 1, extra.begin(), extra.end());
    return args;
}

}  // namespace

std::vector<std::string> config_arguments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput(kModule, "cannot open config file " + path);
    std::vector<std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidInput(kModule, path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        while (!key.empty() && key.front() == '-') key.erase(0, 1);
        if (key.empty()) throw InvalidInput(kModule, path + ":" + std::to_string(lineno) + ": empty key");
        if (value == "true") {
            out.push_back("--" + key);
        } else if (value != "false") {
            out.push_back("--" + key);
            out.push_back(value);
        }
    }
    return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatial regression with sparse deep networks: simulation, benchmarks, rate sweeps and real data.",
                 "spatialdnn"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");
    std::string config_path;
    app.add_option("--config", config_path, "key = value file with default flags for the subcommand");
    int threads = default_threads();
    app.add_option("--threads", threads, "Worker threads (default: $SPATIALDNN_THREADS or all cores)")
        ->check(CLI::PositiveNumber);

    SimulateCmd sim_cmd;
    auto* simulate = app.add_subcommand("simulate", "Generate one data set of a simulation design");
    sim_cmd.design.add(simulate, false);
    simulate->add_option("--seed", sim_cmd.seed, "Random seed");
    simulate->add_option("--out", sim_cmd.out, "Output directory");

    BenchmarkCmd bench;
    auto* benchmark = app.add_subcommand("benchmark", "Replicated comparison of dnn, nw and gam on a simulation design");
    bench.design.add(benchmark, true);
    bench.dnn.add(benchmark);
    benchmark->add_option("--replicates", bench.replicates, "Replicates per design (100 also writes bands.csv)")
        ->check(CLI::Range(2, 100000));
    benchmark->add_option("--methods", bench.methods, "Comma separated subset of dnn,nw,gam");
    benchmark->add_option("--seed", bench.seed, "Base random seed");
    benchmark->add_flag("--identical-replicates", bench.identical, "Reuse one seed for every replicate");
    benchmark->add_option("--out", bench.out, "Output directory");

    RatesCmd rates_cmd;
    auto* rates = app.add_subcommand("rates", "Sweep the convergence-rate scale over n");
    rates->add_option("--beta-star", rates_cmd.beta_star, "Intrinsic smoothness")->check(CLI::PositiveNumber);
    rates->add_option("--r-star", rates_cmd.r_star, "Intrinsic dimension")->check(CLI::PositiveNumber);
    rates->add_option("--upper-exponent", rates_cmd.upper_exponent, "Product of capped smoothness above the input layer")
        ->check(CLI::PositiveNumber);
    rates->add_option("--n-min", rates_cmd.n_min, "Smallest n");
    rates->add_option("--n-max", rates_cmd.n_max, "Largest n");
    rates->add_option("--per-decade", rates_cmd.per_decade, "Grid points per decade of n");
    rates->add_option("--proxy", rates_cmd.proxy, "Optimisation-gap proxy added to the total");
    rates->add_option("--tr-gamma-sq", rates_cmd.tr_gamma_sq, "trace of the squared covariance, or 'n'");
    rates->add_option("--out", rates_cmd.out, "Output directory (default: stdout)");

    HousingCmd house;
    auto* housing_app = app.add_subcommand("housing", "10-fold comparison on the California housing data");
    housing_app->add_option("--data", house.data, "Path to the housing CSV")->required();
    house.dnn.add(housing_app);
    housing_app->add_option("--methods", house.methods, "Comma separated subset of dnn,nw,gam");
    housing_app->add_option("--folds", house.folds, "Number of folds")->check(CLI::Range(2, 1000000));
    housing_app->add_option("--seed", house.seed, "Random seed");
    housing_app->add_option("--out", house.out, "Output directory");

    FitCmd fit_cmd;
    auto* fit = app.add_subcommand("fit", "Train a network on a CSV of covariates and a response; writes model.json");
    fit->add_option("--data", fit_cmd.data, "CSV with a header row")->required();
    fit->add_option("--response", fit_cmd.response, "Response column (default: last column)");
    fit->add_option("--depth", fit_cmd.depth, "Hidden layers")->check(CLI::PositiveNumber);
    fit->add_option("--width", fit_cmd.width, "Hidden width")->check(CLI::PositiveNumber);
    fit->add_option("--l1", fit_cmd.l1, "l1 penalty")->check(CLI::NonNegativeNumber);
    fit->add_option("--lr", fit_cmd.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    fit->add_option("--epochs", fit_cmd.epochs, "Epochs")->check(CLI::PositiveNumber);
    fit->add_option("--batch", fit_cmd.batch, "Mini-batch size")->check(CLI::PositiveNumber);
    fit->add_option("--restarts", fit_cmd.restarts, "Random restarts")->check(CLI::PositiveNumber);
    fit->add_option("--clamp", fit_cmd.clamp, "Prediction clamp F")->check(CLI::PositiveNumber);
    fit->add_option("--seed", fit_cmd.seed, "Random seed");
    fit->add_option("--out", fit_cmd.out, "Output directory");

    std::vector<std::string> args;
    try {
        args = with_config(raw_args);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) do_simulate(sim_cmd, out);
        if (benchmark->parsed()) do_benchmark(bench, threads, out);
        if (rates->parsed()) do_rates(rates_cmd, out, err);
        if (housing_app->parsed()) do_housing(house, threads, out);
        if (fit->parsed()) do_fit(fit_cmd, out);
    } catch (const Error& e) {
        err << "error [" << e.module() << "]: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error [" << kModule << "]: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace spatialdnn::cli
