#include "calib/problems.hpp"

#include "calib/csv.hpp"
#include "calib/parallel.hpp"
#include "calib/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace calib {

Simulator SyntheticProblem::as_simulator() const {
    const auto eta = simulator;
    return [eta](const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
        return eta(x[0], theta);
    };
}

SyntheticProblem SyntheticProblem::with_sigma(double s) const {
    SyntheticProblem copy = *this;
    copy.sigma = s;
    return copy;
}

SyntheticProblem make_linear_problem() {
    constexpr double pi = std::numbers::pi;
    SyntheticProblem problem;
    problem.name = "linear";
    problem.reality = [](double x) { return 1.0 + 2.0 * x + std::sin(2.0 * pi * x); };
    problem.simulator = [](double x, const Eigen::VectorXd& theta) {
        return theta[0] + theta[1] * x;
    };
    problem.theta0 = Eigen::VectorXd(2);
    problem.theta0 << 1.0 + 3.0 / pi, 2.0 - 6.0 / pi;
    problem.space.names = {"intercept", "slope"};
    problem.space.lower = Eigen::VectorXd::Constant(2, -5.0);
    problem.space.upper = Eigen::VectorXd::Constant(2, 5.0);
    problem.sigma = 0.05;
    return problem;
}

SyntheticProblem make_nonlinear_problem() {
    SyntheticProblem problem;
    problem.name = "nonlinear";
    problem.reality = [](double x) { return std::exp(x) + 0.05 * x * (1.0 - x); };
    problem.simulator = [](double x, const Eigen::VectorXd& theta) {
        return theta[0] * std::exp(theta[1] * x);
    };
    // Quadrature-derived minimizer of int (zeta - eta)^2 dx, stored to 1e-6.
    problem.theta0 = Eigen::VectorXd(2);
    problem.theta0 << 1.0088918447365511, 0.993215053269072;
    problem.space.names = {"scale", "rate"};
    problem.space.lower = Eigen::VectorXd::Constant(2, 0.5);
    problem.space.upper = Eigen::VectorXd::Constant(2, 2.0);
    problem.sigma = 0.05;
    return problem;
}

DesignScheme parse_design_scheme(const std::string& name) {
    if (name == "grid") return DesignScheme::Grid;
    if (name == "uniform-random") return DesignScheme::UniformRandom;
    if (name == "latin-hypercube") return DesignScheme::LatinHypercube;
    throw config_error("unknown design scheme '" + name +
                       "' (grid | uniform-random | latin-hypercube)");
}

namespace {

// Design matrix on [0,1]^dims. Grid: midpoints of a full-factorial lattice
// with ceil(rows^(1/dims)) levels per dimension, first `rows` rows in
// row-major order. Latin hypercube: one random permutation per dimension,
// uniform jitter within each stratum.
Eigen::MatrixXd unit_design(int rows, int dims, DesignScheme design, rng::Engine& rng) {
    Eigen::MatrixXd x(rows, dims);
    switch (design) {
        case DesignScheme::Grid: {
            int levels = 1;
            while (std::pow(static_cast<double>(levels), dims) < static_cast<double>(rows))
                ++levels;
            std::vector<int> idx(dims, 0);
            for (int r = 0; r < rows; ++r) {
                for (int j = 0; j < dims; ++j)
                    x(r, j) = (idx[j] + 0.5) / static_cast<double>(levels);
                for (int j = dims - 1; j >= 0; --j) {
                    if (++idx[j] < levels) break;
                    idx[j] = 0;
                }
            }
            break;
        }
        case DesignScheme::UniformRandom: {
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < dims; ++j) x(r, j) = rng.uniform();
            break;
        }
        case DesignScheme::LatinHypercube: {
            std::vector<int> perm(rows);
            for (int j = 0; j < dims; ++j) {
                for (int r = 0; r < rows; ++r) perm[r] = r;
                for (int r = rows - 1; r > 0; --r)
                    std::swap(perm[r], perm[static_cast<int>(rng.below(r + 1))]);
                for (int r = 0; r < rows; ++r)
                    x(r, j) = (perm[r] + rng.uniform()) / static_cast<double>(rows);
            }
            break;
        }
    }
    return x;
}

}  // namespace

ExperimentalDataset generate_experimental(const SyntheticProblem& problem, int n,
                                          std::uint64_t seed, DesignScheme design) {
    if (n < 4) throw data_error("generate_experimental: need n >= 4");
    rng::Engine rng(rng::splitmix64(seed));
    ExperimentalDataset ds;
    ds.inputs = unit_design(n, 1, design, rng);
    ds.input_names = {"x1"};
    ds.outputs.resize(n);
    for (int i = 0; i < n; ++i) {
        const double noise = problem.sigma > 0.0 ? problem.sigma * rng.gaussian() : 0.0;
        ds.outputs[i] = problem.reality(ds.inputs(i, 0)) + noise;
    }
    return ds;
}

SimulatorDataset generate_simulator(const SyntheticProblem& problem, int m,
                                    std::uint64_t seed, DesignScheme design) {
    const Eigen::Index d = problem.space.dim();
    if (m < 1 + d + 1) throw data_error("generate_simulator: need m >= p + d + 1");
    rng::Engine rng(rng::splitmix64(seed));
    const Eigen::MatrixXd unit = unit_design(m, 1 + static_cast<int>(d), design, rng);

    SimulatorDataset ds;
    ds.inputs = unit.leftCols(1);
    ds.input_names = {"x1"};
    ds.params.resize(m, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        ds.params.col(k) = problem.space.lower[k] +
                           (problem.space.upper[k] - problem.space.lower[k]) *
                               unit.col(1 + k).array();
        ds.param_names.push_back(problem.space.names[k]);
    }
    ds.outputs.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double jitter =
            problem.sim_jitter > 0.0 ? problem.sim_jitter * rng.gaussian() : 0.0;
        ds.outputs[j] = problem.simulator(ds.inputs(j, 0), ds.params.row(j).transpose()) + jitter;
    }
    return ds;
}

std::pair<ExperimentalDataset, SimulatorDataset> generate_data(
    const SyntheticProblem& problem, int n, int m, std::uint64_t seed,
    DesignScheme design) {
    return {generate_experimental(problem, n, rng::derive_seed(seed, 0), design),
            generate_simulator(problem, m, rng::derive_seed(seed, 1), design)};
}

double simpson01(const std::function<double(double)>& fn, int intervals) {
    if (intervals < 2) throw config_error("simpson01: need at least 2 intervals");
    const int k = intervals % 2 == 0 ? intervals : intervals + 1;
    const double h = 1.0 / k;
    double acc = fn(0.0) + fn(1.0);
    for (int i = 1; i < k; ++i) acc += fn(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

double quadrature_objective(const SyntheticProblem& problem, const Eigen::VectorXd& theta,
                            int intervals) {
    return simpson01(
        [&](double x) {
            const double diff = problem.reality(x) - problem.simulator(x, theta);
            return diff * diff;
        },
        intervals);
}

Eigen::VectorXd quadrature_theta0(const SyntheticProblem& problem, int intervals,
                                  std::uint64_t seed) {
    OptimizerConfig cfg;
    cfg.seed = seed;
    cfg.max_generations = 400;
    const MinimizeResult result = minimize(
        [&](const Eigen::VectorXd& theta) {
            return quadrature_objective(problem, theta, intervals);
        },
        problem.space, cfg);
    return result.theta;
}

namespace {

struct SlopeFit {
    double slope = 0.0;
    double se = 0.0;
};

// OLS slope of log(rmse) on log(n) with its standard error.
SlopeFit log_log_slope(const std::vector<int>& sizes, const std::vector<double>& rmse) {
    const int k = static_cast<int>(sizes.size());
    double sx = 0, sy = 0;
    for (int i = 0; i < k; ++i) {
        sx += std::log(static_cast<double>(sizes[i]));
        sy += std::log(rmse[i]);
    }
    const double mx = sx / k, my = sy / k;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < k; ++i) {
        const double dx = std::log(static_cast<double>(sizes[i])) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(rmse[i]) - my);
    }
    SlopeFit fit;
    fit.slope = sxy / sxx;
    double rss = 0;
    for (int i = 0; i < k; ++i) {
        const double pred = my + fit.slope * (std::log(static_cast<double>(sizes[i])) - mx);
        const double r = std::log(rmse[i]) - pred;
        rss += r * r;
    }
    fit.se = k > 2 ? std::sqrt(rss / (k - 2) / sxx) : 0.0;
    return fit;
}

constexpr double kNoiseFloor = 1e-6;  // below this, a rate slope is undefined

}  // namespace

StudyReport rate_study(const SyntheticProblem& problem, const std::vector<int>& sizes,
                       int replicates, const StudyConfig& config) {
    if (sizes.empty() || !std::is_sorted(sizes.begin(), sizes.end()))
        throw config_error("rate_study: sizes must be non-empty and ascending");
    if (replicates < 10) throw config_error("rate_study: need at least 10 replicates");

    const auto start = std::chrono::steady_clock::now();
    const int ns = static_cast<int>(sizes.size());
    const Simulator exact = problem.as_simulator();

    std::vector<double> err_theta(static_cast<std::size_t>(ns) * replicates);
    std::vector<double> err_delta(err_theta.size());

    parallel_for_indexed(err_theta.size(), config.threads, [&](std::size_t run) {
        const int si = static_cast<int>(run) / replicates;
        const int n = sizes[si];
        const std::uint64_t run_seed = rng::derive_seed(config.seed, run);

        const ExperimentalDataset data =
            generate_experimental(problem, n, rng::derive_seed(run_seed, 0), config.design);

        CalibrationConfig cc;
        cc.optimizer = config.optimizer;
        cc.optimizer.seed = rng::derive_seed(run_seed, 1);
        cc.nonparam.knot_cap = config.knot_cap;
        if (config.rate_lambda) {
            cc.nonparam.lambda_grid = {config.rate_scale *
                                       std::pow(static_cast<double>(n), config.rate_exponent)};
        } else {
            cc.nonparam.lambda_grid = config.lambda_grid;
        }

        const CalibrationResult fit = two_step(data, exact, problem.space, cc);
        err_theta[run] = (fit.theta - problem.theta0).norm();

        double acc = 0.0;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const double diff = fit.discrepancy_at(Eigen::VectorXd(data.inputs.row(i))) -
                                problem.discrepancy(data.inputs(i, 0));
            acc += diff * diff;
        }
        err_delta[run] = std::sqrt(acc / static_cast<double>(data.n()));
    });

    StudyReport report;
    report.study = "rate";
    report.problem = problem.name;
    report.seed = config.seed;
    report.sizes = sizes;
    report.replicates = replicates;
    const auto summarize = [&](const std::vector<double>& err, std::vector<double>& rmse,
                               std::vector<double>& se) {
        for (int si = 0; si < ns; ++si) {
            double mean_sq = 0.0;
            for (int r = 0; r < replicates; ++r) {
                const double e = err[static_cast<std::size_t>(si) * replicates + r];
                mean_sq += e * e;
            }
            mean_sq /= replicates;
            double var_sq = 0.0;
            for (int r = 0; r < replicates; ++r) {
                const double e = err[static_cast<std::size_t>(si) * replicates + r];
                var_sq += (e * e - mean_sq) * (e * e - mean_sq);
            }
            var_sq /= replicates > 1 ? replicates - 1 : 1;
            const double root = std::sqrt(mean_sq);
            rmse.push_back(root);
            se.push_back(root > 0.0 ? std::sqrt(var_sq / replicates) / (2.0 * root) : 0.0);
        }
    };
    summarize(err_theta, report.rmse_theta, report.rmse_theta_se);
    summarize(err_delta, report.rmse_delta, report.rmse_delta_se);

    const auto all_above_floor = [](const std::vector<double>& rmse) {
        for (const double r : rmse)
            if (!(r > kNoiseFloor)) return false;
        return true;
    };
    report.slope_theta_defined = all_above_floor(report.rmse_theta);
    report.slope_delta_defined = all_above_floor(report.rmse_delta);
    if (report.slope_theta_defined) {
        const SlopeFit fit = log_log_slope(sizes, report.rmse_theta);
        report.slope_theta = fit.slope;
        report.slope_theta_se = fit.se;
    } else {
        report.slope_theta = std::numeric_limits<double>::quiet_NaN();
    }
    if (report.slope_delta_defined) {
        const SlopeFit fit = log_log_slope(sizes, report.rmse_delta);
        report.slope_delta = fit.slope;
        report.slope_delta_se = fit.se;
    } else {
        report.slope_delta = std::numeric_limits<double>::quiet_NaN();
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

StudyReport coverage_study(const SyntheticProblem& problem, int n, int inner_replicates,
                           int outer, const StudyConfig& config, double alpha) {
    if (outer < 50) throw config_error("coverage_study: need at least 50 outer replications");

    const auto start = std::chrono::steady_clock::now();
    const Simulator exact = problem.as_simulator();
    const Eigen::Index d = problem.space.dim();
    const int g = config.coverage_grid_points;

    std::vector<Eigen::VectorXd> theta_hits(outer);
    std::vector<Eigen::VectorXd> delta_hits(outer);

    parallel_for_indexed(static_cast<std::size_t>(outer), config.threads, [&](std::size_t i) {
        const std::uint64_t run_seed = rng::derive_seed(config.seed, i);
        const ExperimentalDataset data =
            generate_experimental(problem, n, rng::derive_seed(run_seed, 0), config.design);

        CalibrationConfig cc;
        cc.optimizer = config.optimizer;
        cc.optimizer.seed = rng::derive_seed(run_seed, 1);
        cc.nonparam.knot_cap = config.knot_cap;
        cc.nonparam.lambda_grid = config.lambda_grid;
        const CalibrationResult point = two_step(data, exact, problem.space, cc);

        const Eigen::MatrixXd grid = profile_grid(data.inputs, g);
        const BootstrapProblem bp =
            make_bootstrap_problem(data, exact, problem.space, cc, point, grid);
        BootstrapConfig bc;
        bc.replicates = inner_replicates;
        bc.alpha = alpha;
        bc.seed = rng::derive_seed(run_seed, 2);
        bc.threads = 1;  // parallelism lives at the outer level
        const BootstrapEnsemble ensemble = run_bootstrap(bp, bc);

        Eigen::VectorXd th(d);
        for (Eigen::Index k = 0; k < d; ++k) {
            std::vector<double> col(ensemble.thetas.rows());
            for (Eigen::Index r = 0; r < ensemble.thetas.rows(); ++r)
                col[r] = ensemble.thetas(r, k);
            const ConfidenceInterval ci = percentile_interval(std::move(col), alpha);
            th[k] = (problem.theta0[k] >= ci.lower && problem.theta0[k] <= ci.upper) ? 1.0 : 0.0;
        }
        theta_hits[i] = th;

        const auto band = pointwise_band(ensemble.delta_grid, alpha);
        Eigen::VectorXd dh(g);
        for (int r = 0; r < g; ++r) {
            const double truth = problem.discrepancy(grid(r, 0));
            dh[r] = (truth >= band[r].lower && truth <= band[r].upper) ? 1.0 : 0.0;
        }
        delta_hits[i] = dh;
    });

    StudyReport report;
    report.study = "coverage";
    report.problem = problem.name;
    report.seed = config.seed;
    report.sample_size = n;
    report.inner_replicates = inner_replicates;
    report.outer = outer;
    report.alpha = alpha;
    Eigen::VectorXd theta_cov = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd delta_cov = Eigen::VectorXd::Zero(g);
    for (int i = 0; i < outer; ++i) {
        theta_cov += theta_hits[i];
        delta_cov += delta_hits[i];
    }
    theta_cov /= outer;
    delta_cov /= outer;
    report.coverage_theta.assign(theta_cov.data(), theta_cov.data() + d);
    report.coverage_delta.assign(delta_cov.data(), delta_cov.data() + g);
    // interior average: drop one grid point at each boundary
    double acc = 0.0;
    int cnt = 0;
    for (int r = 1; r + 1 < g; ++r) {
        acc += report.coverage_delta[r];
        ++cnt;
    }
    report.coverage_delta_mean = cnt > 0 ? acc / cnt : 0.0;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void write_study_csv(const StudyReport& report, const std::string& path) {
    if (report.study == "rate") {
        const Eigen::Index k = static_cast<Eigen::Index>(report.sizes.size());
        Eigen::MatrixXd rows(k, 5);
        for (Eigen::Index i = 0; i < k; ++i) {
            rows(i, 0) = report.sizes[i];
            rows(i, 1) = report.rmse_theta[i];
            rows(i, 2) = report.rmse_theta_se[i];
            rows(i, 3) = report.rmse_delta[i];
            rows(i, 4) = report.rmse_delta_se[i];
        }
        write_csv(path, {"n", "rmse_theta", "se_rmse_theta", "rmse_delta", "se_rmse_delta"},
                  rows);
        return;
    }
    const Eigen::Index k = static_cast<Eigen::Index>(report.coverage_theta.size());
    Eigen::MatrixXd rows(k, 2);
    for (Eigen::Index i = 0; i < k; ++i) {
        rows(i, 0) = static_cast<double>(i);
        rows(i, 1) = report.coverage_theta[i];
    }
    write_csv(path, {"component", "coverage"}, rows);
}

std::string study_summary_json(const StudyReport& report) {
    nlohmann::json j;
    j["study"] = report.study;
    j["problem"] = report.problem;
    j["seed"] = report.seed;
    if (report.study == "rate") {
        j["sizes"] = report.sizes;
        j["replicates"] = report.replicates;
        j["rmse_theta"] = report.rmse_theta;
        j["rmse_theta_se"] = report.rmse_theta_se;
        j["rmse_delta"] = report.rmse_delta;
        j["rmse_delta_se"] = report.rmse_delta_se;
        if (report.slope_theta_defined) {
            j["slope_theta"] = report.slope_theta;
            j["slope_theta_se"] = report.slope_theta_se;
        } else {
            j["slope_theta"] = "undefined";
        }
        if (report.slope_delta_defined) {
            j["slope_delta"] = report.slope_delta;
            j["slope_delta_se"] = report.slope_delta_se;
        } else {
            j["slope_delta"] = "undefined";
        }
    } else {
        j["n"] = report.sample_size;
        j["inner_replicates"] = report.inner_replicates;
        j["outer"] = report.outer;
        j["alpha"] = report.alpha;
        j["coverage_theta"] = report.coverage_theta;
        j["coverage_delta"] = report.coverage_delta;
        j["coverage_delta_interior_mean"] = report.coverage_delta_mean;
    }
    return j.dump(2);
}

}  // namespace calib
