#include "calib/bootstrap.hpp"

#include "calib/parallel.hpp"
#include "calib/rng.hpp"

#include <algorithm>
#include <cmath>

namespace calib {

void BootstrapConfig::validate() const {
    if (replicates < 2) throw config_error("bootstrap replicates must be at least 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
    if (!(undersmooth > 0.0 && undersmooth <= 1.0))
        throw config_error("undersmooth factor must lie in (0, 1]");
}

Eigen::VectorXd centered_residuals(const Eigen::VectorXd& values) {
    if (values.size() < 1) throw data_error("centered_residuals: empty input");
    return values.array() - values.mean();
}

namespace {

void fill_shared(BootstrapProblem& problem, const Simulator& simulator) {
    const Eigen::Index n = problem.experimental.n();
    problem.experimental_fitted.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = problem.experimental.inputs.row(i).transpose();
        problem.experimental_fitted[i] =
            simulator(x, problem.point.theta) + problem.point.discrepancy_at(x);
    }
    problem.residual_pool = centered_residuals(problem.point.residuals);
}

}  // namespace

BootstrapProblem make_bootstrap_problem(const ExperimentalDataset& experimental,
                                        const Simulator& exact_simulator,
                                        const ParameterSpace& space,
                                        const CalibrationConfig& calibration,
                                        const CalibrationResult& point,
                                        const Eigen::MatrixXd& grid,
                                        const Eigen::VectorXd& weights) {
    BootstrapProblem problem;
    problem.experimental = experimental;
    problem.space = space;
    problem.calibration = calibration;
    problem.weights = weights;
    problem.exact_simulator = exact_simulator;
    problem.point = point;
    problem.grid = grid;
    fill_shared(problem, exact_simulator);
    return problem;
}

BootstrapProblem make_bootstrap_problem(const ExperimentalDataset& experimental,
                                        const SimulatorDataset& simulator_data,
                                        const EmulatorModel& emulator,
                                        const KernelConfig& emulator_config,
                                        const ParameterSpace& space,
                                        const CalibrationConfig& calibration,
                                        const CalibrationResult& point,
                                        const Eigen::MatrixXd& grid,
                                        const Eigen::VectorXd& weights) {
    BootstrapProblem problem;
    problem.experimental = experimental;
    problem.space = space;
    problem.calibration = calibration;
    problem.weights = weights;
    problem.simulator_data = simulator_data;
    problem.emulator_config = emulator_config;
    problem.emulator = emulator;
    problem.point = point;
    problem.grid = grid;
    const EmulatorModel& em = *problem.emulator;
    fill_shared(problem, [&em](const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
        return em.predict(x, theta);
    });
    problem.sim_residual_pool = centered_residuals(emulator.residuals);
    return problem;
}

Replicate make_replicate(const BootstrapProblem& problem, const BootstrapConfig& config,
                         int index) {
    config.validate();
    Replicate rep;
    // Replicate seed = base seed xor replicate number (1-based); the engine
    // is seeded through splitmix64 of that value.
    rep.seed = config.seed ^ static_cast<std::uint64_t>(index + 1);
    rng::Engine rng(rng::splitmix64(rep.seed));

    const Eigen::Index n = problem.experimental.n();
    const bool emulate = problem.emulator_mode();
    const Eigen::Index m = emulate ? problem.simulator_data->m() : 0;

    // Draw order is fixed: design indices first (when enabled), then the
    // residual indices, experimental before simulator.
    std::vector<Eigen::Index> exp_rows(n);
    for (Eigen::Index i = 0; i < n; ++i) exp_rows[i] = i;
    std::vector<Eigen::Index> sim_rows(m);
    for (Eigen::Index j = 0; j < m; ++j) sim_rows[j] = j;
    if (config.resample_design) {
        for (Eigen::Index i = 0; i < n; ++i)
            exp_rows[i] = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        if (emulate)
            for (Eigen::Index j = 0; j < m; ++j)
                sim_rows[j] = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
    }

    rep.experimental.input_names = problem.experimental.input_names;
    rep.experimental.output_name = problem.experimental.output_name;
    rep.experimental.inputs.resize(n, problem.experimental.p());
    rep.experimental.outputs.resize(n);
    if (problem.weights.size() > 0) rep.weights.resize(n);
    const Eigen::VectorXd& pool = problem.residual_pool;
    for (Eigen::Index i = 0; i < n; ++i) {
        rep.experimental.inputs.row(i) = problem.experimental.inputs.row(exp_rows[i]);
        const Eigen::Index pick =
            static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(pool.size())));
        rep.experimental.outputs[i] = problem.experimental_fitted[exp_rows[i]] + pool[pick];
        if (problem.weights.size() > 0) rep.weights[i] = problem.weights[exp_rows[i]];
    }

    if (emulate) {
        const SimulatorDataset& sim = *problem.simulator_data;
        SimulatorDataset out;
        out.input_names = sim.input_names;
        out.param_names = sim.param_names;
        out.output_name = sim.output_name;
        out.inputs.resize(m, sim.p());
        out.params.resize(m, sim.d());
        out.outputs.resize(m);
        const Eigen::VectorXd& tau = problem.sim_residual_pool;
        for (Eigen::Index j = 0; j < m; ++j) {
            out.inputs.row(j) = sim.inputs.row(sim_rows[j]);
            out.params.row(j) = sim.params.row(sim_rows[j]);
            const Eigen::Index pick =
                static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(tau.size())));
            out.outputs[j] = problem.emulator->fitted[sim_rows[j]] + tau[pick];
        }
        rep.simulator_data = std::move(out);
    }
    return rep;
}

BootstrapEnsemble run_bootstrap(const BootstrapProblem& problem,
                                const BootstrapConfig& config) {
    config.validate();
    const int B = config.replicates;
    const Eigen::Index d = problem.space.dim();
    const Eigen::Index g = problem.grid.rows();

    struct Slot {
        bool ok = false;
        Eigen::VectorXd theta;
        Eigen::VectorXd delta;
        Eigen::VectorXd zeta;
        std::uint64_t seed = 0;
    };
    std::vector<Slot> slots(B);

    parallel_for_indexed(static_cast<std::size_t>(B), config.threads, [&](std::size_t b) {
        Slot& slot = slots[b];
        try {
            const Replicate rep = make_replicate(problem, config, static_cast<int>(b));
            slot.seed = rep.seed;

            Simulator simulator;
            if (problem.emulator_mode()) {
                simulator = make_simulator(
                    fit_emulator(*rep.simulator_data, problem.space, problem.emulator_config));
            } else {
                simulator = problem.exact_simulator;
            }

            CalibrationConfig cc = problem.calibration;
            cc.optimizer.seed = rng::derive_seed(rep.seed, 1);
            cc.nonparam.undersmooth = config.undersmooth;
            const CalibrationResult fit =
                two_step(rep.experimental, simulator, problem.space, cc, rep.weights);

            slot.theta = fit.theta;
            slot.delta.resize(g);
            slot.zeta.resize(g);
            for (Eigen::Index r = 0; r < g; ++r) {
                const Eigen::VectorXd x = problem.grid.row(r).transpose();
                slot.delta[r] = fit.discrepancy_at(x);
                slot.zeta[r] = simulator(x, fit.theta) + slot.delta[r];
            }
            slot.ok = true;
        } catch (const error&) {
            slot.ok = false;  // dropped and counted below
        }
    });

    BootstrapEnsemble ensemble;
    ensemble.requested = B;
    int successes = 0;
    for (const Slot& s : slots) successes += s.ok ? 1 : 0;
    ensemble.failures = B - successes;
    if (ensemble.failures > B / 10)
        throw numeric_error("bootstrap unstable: " + std::to_string(ensemble.failures) +
                            " of " + std::to_string(B) + " replicates failed");

    ensemble.thetas.resize(successes, d);
    ensemble.delta_grid.resize(successes, g);
    ensemble.zeta_grid.resize(successes, g);
    ensemble.seeds.reserve(successes);
    Eigen::Index row = 0;
    for (const Slot& s : slots) {
        if (!s.ok) continue;
        ensemble.thetas.row(row) = s.theta.transpose();
        ensemble.delta_grid.row(row) = s.delta.transpose();
        ensemble.zeta_grid.row(row) = s.zeta.transpose();
        ensemble.seeds.push_back(s.seed);
        ++row;
    }
    return ensemble;
}

ConfidenceInterval percentile_interval(std::vector<double> samples, double alpha) {
    if (samples.size() < 2) throw data_error("percentile interval needs at least 2 samples");
    if (!(alpha > 0.0 && alpha < 1.0)) throw data_error("alpha must lie in (0, 1)");
    std::sort(samples.begin(), samples.end());
    const auto quantile = [&](double prob) {
        const double h = (static_cast<double>(samples.size()) - 1.0) * prob + 1.0;
        const std::size_t idx = static_cast<std::size_t>(std::floor(h));
        const double frac = h - static_cast<double>(idx);
        if (idx >= samples.size()) return samples.back();
        if (frac == 0.0) return samples[idx - 1];
        return samples[idx - 1] + frac * (samples[idx] - samples[idx - 1]);
    };
    ConfidenceInterval ci;
    ci.lower = quantile(alpha / 2.0);
    ci.upper = quantile(1.0 - alpha / 2.0);
    ci.level = 1.0 - alpha;
    return ci;
}

std::vector<ConfidenceInterval> pointwise_band(const Eigen::MatrixXd& ensemble,
                                               double alpha) {
    std::vector<ConfidenceInterval> band;
    band.reserve(ensemble.cols());
    for (Eigen::Index c = 0; c < ensemble.cols(); ++c) {
        std::vector<double> column(ensemble.rows());
        for (Eigen::Index r = 0; r < ensemble.rows(); ++r) column[r] = ensemble(r, c);
        band.push_back(percentile_interval(std::move(column), alpha));
    }
    return band;
}

Eigen::MatrixXd profile_grid(const Eigen::MatrixXd& inputs, int per_dim) {
    if (per_dim < 2) throw config_error("prediction grid needs at least 2 points per dimension");
    const Eigen::Index p = inputs.cols();
    Eigen::VectorXd lo(p), hi(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        lo[j] = inputs.col(j).minCoeff();
        hi[j] = inputs.col(j).maxCoeff();
        if (!(lo[j] < hi[j])) hi[j] = lo[j] + 1.0;
    }
    Eigen::MatrixXd grid(p * per_dim, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (int k = 0; k < per_dim; ++k) {
            Eigen::RowVectorXd row = 0.5 * (lo + hi).transpose();
            row[j] = lo[j] + (hi[j] - lo[j]) * static_cast<double>(k) / (per_dim - 1);
            grid.row(j * per_dim + k) = row;
        }
    }
    return grid;
}

}  // namespace calib
