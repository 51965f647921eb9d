#pragma once

#include "calib/calibrate.hpp"

#include <optional>
#include <vector>

namespace calib {

struct BootstrapConfig {
    int replicates = 1000;        // B >= 2
    double alpha = 0.05;          // nominal level, in (0, 1)
    bool resample_design = false; // resample both designs with replacement
    double undersmooth = 1.0;     // kappa in (0, 1], multiplies the selected lambda
    std::uint64_t seed = 0;       // replicate b (1-based) uses seed ^ b
    int threads = 1;              // 0: all hardware threads

    void validate() const;
};

// Read-only state shared by all replicates.
struct BootstrapProblem {
    ExperimentalDataset experimental;
    ParameterSpace space;
    CalibrationConfig calibration;
    Eigen::VectorXd weights;                      // empty: all ones

    Simulator exact_simulator;                    // exact mode
    std::optional<SimulatorDataset> simulator_data;  // emulator mode
    KernelConfig emulator_config;
    std::optional<EmulatorModel> emulator;

    CalibrationResult point;                      // point estimates
    Eigen::MatrixXd grid;                         // prediction rows, original units

    Eigen::VectorXd experimental_fitted;          // eta_hat + delta_hat at design
    Eigen::VectorXd residual_pool;                // centered experimental residuals
    Eigen::VectorXd sim_residual_pool;            // centered emulator residuals

    bool emulator_mode() const { return simulator_data.has_value(); }
};

// Assembles the shared state from point estimates: exact-simulator mode.
BootstrapProblem make_bootstrap_problem(const ExperimentalDataset& experimental,
                                        const Simulator& exact_simulator,
                                        const ParameterSpace& space,
                                        const CalibrationConfig& calibration,
                                        const CalibrationResult& point,
                                        const Eigen::MatrixXd& grid,
                                        const Eigen::VectorXd& weights = Eigen::VectorXd());

// Emulator mode: the emulator is refit on each replicate's simulator data.
BootstrapProblem make_bootstrap_problem(const ExperimentalDataset& experimental,
                                        const SimulatorDataset& simulator_data,
                                        const EmulatorModel& emulator,
                                        const KernelConfig& emulator_config,
                                        const ParameterSpace& space,
                                        const CalibrationConfig& calibration,
                                        const CalibrationResult& point,
                                        const Eigen::MatrixXd& grid,
                                        const Eigen::VectorXd& weights = Eigen::VectorXd());

struct Replicate {
    ExperimentalDataset experimental;
    std::optional<SimulatorDataset> simulator_data;
    Eigen::VectorXd weights;
    std::uint64_t seed = 0;
};

// Synthetic datasets for replicate `index` (0-based; replicate number b =
// index + 1). Optional design resampling first, then outputs rebuilt as
// fitted values plus residuals drawn i.i.d. from the centered pools.
Replicate make_replicate(const BootstrapProblem& problem, const BootstrapConfig& config,
                         int index);

struct BootstrapEnsemble {
    Eigen::MatrixXd thetas;       // successes x d
    Eigen::MatrixXd delta_grid;   // successes x grid rows
    Eigen::MatrixXd zeta_grid;    // successes x grid rows
    std::vector<std::uint64_t> seeds;
    int failures = 0;
    int requested = 0;
};

// Re-estimates everything per replicate (emulator refit in emulator mode,
// then the two-step run with per-replicate lambda selection scaled by
// kappa). Failed replicates are dropped and counted; more than 10% failures
// is fatal. Deterministic for a fixed config, regardless of thread count.
BootstrapEnsemble run_bootstrap(const BootstrapProblem& problem,
                                const BootstrapConfig& config);

// Values minus their arithmetic mean.
Eigen::VectorXd centered_residuals(const Eigen::VectorXd& values);

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;
};

// Empirical quantiles at alpha/2 and 1 - alpha/2 with linear interpolation at
// rank h = (N-1)p + 1 on the sorted sample. Needs at least two samples.
ConfidenceInterval percentile_interval(std::vector<double> samples, double alpha);

// percentile_interval applied column-wise.
std::vector<ConfidenceInterval> pointwise_band(const Eigen::MatrixXd& ensemble,
                                               double alpha);

// Per-dimension profile rows through the midpoint of the input ranges:
// dimension j sweeps per_dim points over its range while the other
// coordinates sit at their midpoints. For p = 1 this is just the x grid.
Eigen::MatrixXd profile_grid(const Eigen::MatrixXd& inputs, int per_dim);

}  // namespace calib
