#pragma once

#include "calib/additive.hpp"
#include "calib/emulator.hpp"
#include "calib/optimize.hpp"
#include "calib/types.hpp"

#include <functional>

namespace calib {

// A simulator handle: exact function or fitted emulator, evaluated at
// original-unit (x, theta).
using Simulator = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

Simulator make_simulator(EmulatorModel model);

// Empirical calibration objective: (1/n) sum w_i (y_i - eta(x_i, theta))^2.
// Weights are positive and normalized to mean one (all-ones by default);
// they expose a non-sampling weighting of the input space.
struct Objective {
    const ExperimentalDataset* data = nullptr;
    Simulator simulator;
    ParameterSpace space;
    Eigen::VectorXd weights;

    Objective(const ExperimentalDataset& experimental, Simulator sim, ParameterSpace box,
              Eigen::VectorXd w = Eigen::VectorXd());

    double operator()(const Eigen::VectorXd& theta) const;
};

// Checks theta lies in the box, then evaluates.
double objective_eval(const Objective& objective, const Eigen::VectorXd& theta);

struct CalibrationConfig {
    OptimizerConfig optimizer;
    AdditiveOptions nonparam;
};

struct CalibrationResult {
    Eigen::VectorXd theta;            // original units, inside the box
    double objective_value = 0.0;     // M_n(theta_hat)
    AdditiveModel discrepancy;        // delta_hat on [0,1]^p coordinates
    double lambda = 0.0;              // smoothing parameter actually used
    Eigen::VectorXd residuals;        // eps_i = y_i - eta(x_i) - delta(x_i)
    ScalingMap input_map;             // original x -> [0,1]^p for delta_hat
    bool inputs_clipped = false;
    MinimizeResult optimization;      // theta duplicated bit-for-bit in .theta

    // delta_hat at original-unit inputs (rows are points).
    Eigen::VectorXd discrepancy_at(const Eigen::MatrixXd& x) const;
    double discrepancy_at(const Eigen::VectorXd& x) const;
};

// Step 1: minimize M_n over the box. Step 2: additive penalized-spline fit to
// the residuals {x_i, y_i - eta(x_i, theta_hat)}. Step 2 never re-enters
// Step 1.
CalibrationResult two_step(const ExperimentalDataset& experimental,
                           const Simulator& simulator, const ParameterSpace& space,
                           const CalibrationConfig& config,
                           const Eigen::VectorXd& weights = Eigen::VectorXd());

// eta_hat(x, theta_hat) + delta_hat(x) at an original-unit input.
double predict_reality(const CalibrationResult& result, const Simulator& simulator,
                       const Eigen::VectorXd& x);

}  // namespace calib
