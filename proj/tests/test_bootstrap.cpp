#include "calib/bootstrap.hpp"
#include "calib/problems.hpp"
#include "calib/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace calib;

namespace {

CalibrationConfig fast_config(std::uint64_t seed) {
    CalibrationConfig cc;
    cc.optimizer.seed = seed;
    cc.optimizer.population = 12;
    cc.optimizer.max_generations = 60;
    cc.optimizer.stall_generations = 20;
    cc.nonparam.knot_cap = 30;
    return cc;
}

struct Fixture {
    SyntheticProblem problem;
    ExperimentalDataset data;
    CalibrationConfig config;
    CalibrationResult point;
    BootstrapProblem bootstrap;
};

Fixture make_fixture(double sigma, int n, std::uint64_t seed) {
    Fixture f{make_linear_problem().with_sigma(sigma), {}, fast_config(seed), {}, {}};
    f.data = generate_experimental(f.problem, n, seed, DesignScheme::Grid);
    const Simulator exact = f.problem.as_simulator();
    f.point = two_step(f.data, exact, f.problem.space, f.config);
    const Eigen::MatrixXd grid = profile_grid(f.data.inputs, 11);
    f.bootstrap = make_bootstrap_problem(f.data, exact, f.problem.space, f.config, f.point, grid);
    return f;
}

}  // namespace

TEST_CASE("centered_residuals") {
    Eigen::VectorXd v(3);
    v << 1.0, 2.0, 3.0;
    const Eigen::VectorXd centered = centered_residuals(v);
    CHECK(centered[0] == -1.0);
    CHECK(centered[1] == 0.0);
    CHECK(centered[2] == 1.0);

    Eigen::VectorXd zero_mean(4);
    zero_mean << -0.5, 0.25, 0.5, -0.25;
    CHECK((centered_residuals(zero_mean) - zero_mean).cwiseAbs().maxCoeff() <= 1e-15);

    Eigen::VectorXd single(1);
    single << 7.0;
    CHECK(centered_residuals(single)[0] == 0.0);

    CHECK_THROWS_AS(centered_residuals(Eigen::VectorXd()), data_error);
}

TEST_CASE("percentile_interval follows the interpolated-rank rule") {
    // alpha = 0.5 on {1..5}: h_low = 4*0.25 + 1 = 2, h_high = 4
    const ConfidenceInterval quartiles = percentile_interval({1, 2, 3, 4, 5}, 0.5);
    CHECK(quartiles.lower == 2.0);
    CHECK(quartiles.upper == 4.0);
    CHECK(quartiles.level == 0.5);

    // {1..100}, alpha = 0.05: h = 99*0.025 + 1 = 3.475
    std::vector<double> hundred(100);
    for (int i = 0; i < 100; ++i) hundred[i] = i + 1.0;
    const ConfidenceInterval ci = percentile_interval(hundred, 0.05);
    CHECK(ci.lower == doctest::Approx(3.475).epsilon(1e-12));
    CHECK(ci.upper == doctest::Approx(97.525).epsilon(1e-12));

    const ConfidenceInterval degenerate = percentile_interval({4.2, 4.2, 4.2}, 0.05);
    CHECK(degenerate.lower == 4.2);
    CHECK(degenerate.upper == 4.2);

    // two samples: quantiles sit within 2.5% of the extremes
    const ConfidenceInterval two = percentile_interval({0.0, 1.0}, 0.05);
    CHECK(two.lower == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(two.upper == doctest::Approx(0.975).epsilon(1e-12));

    CHECK_THROWS_AS(percentile_interval({1.0}, 0.05), data_error);
}

TEST_CASE("make_replicate: fitted-only outputs when the residual pool is zero") {
    // y identically equal to a constant simulator: residuals are exactly zero
    ExperimentalDataset data;
    data.inputs = Eigen::VectorXd::LinSpaced(40, 0.0, 1.0);
    data.outputs = Eigen::VectorXd::Constant(40, 3.0);
    ParameterSpace space;
    space.names = {"c"};
    space.lower = Eigen::VectorXd::Constant(1, 0.0);
    space.upper = Eigen::VectorXd::Constant(1, 5.0);
    const Simulator constant = [](const Eigen::VectorXd&, const Eigen::VectorXd& t) {
        return t[0];
    };
    const CalibrationConfig cc = fast_config(4);
    const CalibrationResult point = two_step(data, constant, space, cc);
    REQUIRE(point.residuals.cwiseAbs().maxCoeff() == 0.0);

    const BootstrapProblem problem = make_bootstrap_problem(
        data, constant, space, cc, point, profile_grid(data.inputs, 5));
    BootstrapConfig config;
    config.replicates = 5;
    config.seed = 10;
    const Replicate rep = make_replicate(problem, config, 0);
    CHECK((rep.experimental.outputs - problem.experimental_fitted).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_replicate: designs untouched without resampling, resampled rows otherwise") {
    const Fixture f = make_fixture(0.1, 60, 21);
    BootstrapConfig config;
    config.replicates = 8;
    config.seed = 33;
    const Replicate rep = make_replicate(f.bootstrap, config, 3);
    CHECK(rep.experimental.inputs == f.data.inputs);
    CHECK(rep.seed == (config.seed ^ 4ULL));

    BootstrapConfig resampling = config;
    resampling.resample_design = true;
    const Replicate rep2 = make_replicate(f.bootstrap, resampling, 3);
    // every resampled row is one of the original rows
    for (Eigen::Index i = 0; i < rep2.experimental.n(); ++i) {
        bool found = false;
        for (Eigen::Index k = 0; k < f.data.n(); ++k)
            if (rep2.experimental.inputs(i, 0) == f.data.inputs(k, 0)) found = true;
        CHECK(found);
    }
}

TEST_CASE("make_replicate is deterministic in (seed, index)") {
    const Fixture f = make_fixture(0.1, 50, 5);
    BootstrapConfig config;
    config.replicates = 4;
    config.seed = 2024;
    const Replicate a = make_replicate(f.bootstrap, config, 2);
    const Replicate b = make_replicate(f.bootstrap, config, 2);
    CHECK(a.experimental.outputs == b.experimental.outputs);
    const Replicate c = make_replicate(f.bootstrap, config, 3);
    CHECK(a.experimental.outputs != c.experimental.outputs);
}

TEST_CASE("noiseless bootstrap collapses onto the point estimate") {
    SyntheticProblem problem = make_linear_problem().with_sigma(0.0);
    problem.reality = [](double x) { return (1.0 + 3.0 / M_PI) + (2.0 - 6.0 / M_PI) * x; };
    const ExperimentalDataset data = generate_experimental(problem, 50, 3, DesignScheme::Grid);
    const Simulator exact = problem.as_simulator();
    const CalibrationConfig cc = fast_config(6);
    const CalibrationResult point = two_step(data, exact, problem.space, cc);
    const BootstrapProblem bp = make_bootstrap_problem(data, exact, problem.space, cc, point,
                                                       profile_grid(data.inputs, 5));
    BootstrapConfig config;
    config.replicates = 20;
    config.seed = 8;
    const BootstrapEnsemble ensemble = run_bootstrap(bp, config);
    REQUIRE(ensemble.thetas.rows() == 20);
    for (Eigen::Index b = 0; b < 20; ++b)
        CHECK((ensemble.thetas.row(b).transpose() - point.theta).cwiseAbs().maxCoeff() < 1e-5);
    for (Eigen::Index k = 0; k < 2; ++k) {
        std::vector<double> col(20);
        for (int b = 0; b < 20; ++b) col[b] = ensemble.thetas(b, k);
        const ConfidenceInterval ci = percentile_interval(col, 0.05);
        CHECK(ci.upper - ci.lower < 1e-4);
    }
}

TEST_CASE("an ensemble of two replicates") {
    const Fixture f = make_fixture(0.1, 40, 9);
    BootstrapConfig config;
    config.replicates = 2;
    config.seed = 5;
    const BootstrapEnsemble ensemble = run_bootstrap(f.bootstrap, config);
    CHECK(ensemble.thetas.rows() == 2);
    CHECK(ensemble.requested == 2);
    CHECK(ensemble.failures == 0);
}

TEST_CASE("interval nesting: the 99% interval contains the 95% interval") {
    const Fixture f = make_fixture(0.1, 60, 31);
    BootstrapConfig config;
    config.replicates = 40;
    config.seed = 31;
    const BootstrapEnsemble ensemble = run_bootstrap(f.bootstrap, config);
    for (Eigen::Index k = 0; k < ensemble.thetas.cols(); ++k) {
        std::vector<double> col(ensemble.thetas.rows());
        for (Eigen::Index b = 0; b < ensemble.thetas.rows(); ++b)
            col[b] = ensemble.thetas(b, k);
        const ConfidenceInterval wide = percentile_interval(col, 0.01);
        const ConfidenceInterval narrow = percentile_interval(col, 0.05);
        CHECK(wide.lower <= narrow.lower);
        CHECK(wide.upper >= narrow.upper);
    }
    const auto band99 = pointwise_band(ensemble.delta_grid, 0.01);
    const auto band95 = pointwise_band(ensemble.delta_grid, 0.05);
    for (std::size_t g = 0; g < band99.size(); ++g) {
        CHECK(band99[g].lower <= band95[g].lower);
        CHECK(band99[g].upper >= band95[g].upper);
        CHECK(band95[g].lower <= band95[g].upper);
    }
}

TEST_CASE("residual pools are centered") {
    const Fixture f = make_fixture(0.2, 80, 13);
    CHECK(std::abs(f.bootstrap.residual_pool.mean()) <= 1e-12);
}

TEST_CASE("ensemble is bit-identical across reruns and thread counts") {
    const Fixture f = make_fixture(0.1, 50, 77);
    BootstrapConfig config;
    config.replicates = 12;
    config.seed = 99;
    config.threads = 1;
    const BootstrapEnsemble a = run_bootstrap(f.bootstrap, config);
    config.threads = 2;
    const BootstrapEnsemble b = run_bootstrap(f.bootstrap, config);
    CHECK(a.thetas == b.thetas);
    CHECK(a.delta_grid == b.delta_grid);
    CHECK(a.zeta_grid == b.zeta_grid);
    CHECK(a.seeds == b.seeds);
}

TEST_CASE("pointwise band edge cases") {
    Eigen::MatrixXd degenerate(6, 3);
    for (int b = 0; b < 6; ++b) degenerate.row(b) << 1.5, -2.0, 0.25;
    const auto band = pointwise_band(degenerate, 0.05);
    for (int g = 0; g < 3; ++g) {
        CHECK(band[g].lower == band[g].upper);
        CHECK(band[g].lower == degenerate(0, g));
    }

    // a single-column ensemble reduces to percentile_interval
    Eigen::MatrixXd one_col(5, 1);
    one_col << 1, 2, 3, 4, 5;
    const auto single = pointwise_band(one_col, 0.5);
    const ConfidenceInterval direct = percentile_interval({1, 2, 3, 4, 5}, 0.5);
    CHECK(single[0].lower == direct.lower);
    CHECK(single[0].upper == direct.upper);
}

TEST_CASE("emulator-mode bootstrap refits the surrogate per replicate") {
    const SyntheticProblem problem = make_linear_problem().with_sigma(0.1);
    SyntheticProblem jittered = problem;
    jittered.sim_jitter = 0.02;
    const auto [data, sim] = generate_data(jittered, 60, 40, 7, DesignScheme::LatinHypercube);
    const EmulatorModel emulator = fit_emulator(sim, problem.space);
    const Simulator handle = make_simulator(emulator);
    const CalibrationConfig cc = fast_config(3);
    const CalibrationResult point = two_step(data, handle, problem.space, cc);
    const BootstrapProblem bp =
        make_bootstrap_problem(data, sim, emulator, KernelConfig{}, problem.space, cc, point,
                               profile_grid(data.inputs, 7));
    CHECK(bp.emulator_mode());
    CHECK(std::abs(bp.sim_residual_pool.mean()) <= 1e-12);

    BootstrapConfig config;
    config.replicates = 6;
    config.seed = 14;
    const BootstrapEnsemble ensemble = run_bootstrap(bp, config);
    CHECK(ensemble.thetas.rows() == 6);
    // simulated outputs differ across replicates, so theta estimates spread
    CHECK((ensemble.thetas.row(0) - ensemble.thetas.row(1)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("bootstrap configuration validation") {
    BootstrapConfig config;
    config.replicates = 1;
    CHECK_THROWS_AS(config.validate(), config_error);
    config.replicates = 100;
    config.alpha = 1.0;
    CHECK_THROWS_AS(config.validate(), config_error);
    config.alpha = 0.05;
    config.undersmooth = 0.0;
    CHECK_THROWS_AS(config.validate(), config_error);
}
