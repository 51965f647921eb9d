#pragma once

#include "calib/types.hpp"

#include <string>
#include <vector>

namespace calib {

struct KernelConfig {
    // Per-dimension lengthscales on the scaled joint (x, theta) space.
    // Empty: median absolute pairwise difference per dimension (0.3 fallback).
    Eigen::VectorXd lengthscales;
    // Ridge regularizer alpha in (K + m alpha I). Negative: select from
    // ridge_grid by closed-form leave-one-out CV.
    double ridge = -1.0;
    std::vector<double> ridge_grid;   // empty: default_ridge_grid()
};

std::vector<double> default_ridge_grid();   // 21 log-spaced values, 1e-10 .. 1

// Kernel ridge surrogate on the joint (x, theta) space with an anisotropic
// squared-exponential kernel and an unpenalized mean offset:
//   prediction(u) = mu + sum_j c_j k(u, u_j),  k(u,v) = exp(-sum (u-v)^2/(2 l^2)).
// Fit from simulator data only; immutable afterwards.
struct EmulatorModel {
    Eigen::MatrixXd train_unit;   // m x (p+d), scaled
    Eigen::VectorXd dual;         // c, length m, sums to zero
    double mean_offset = 0.0;     // mu
    Eigen::VectorXd lengthscales;
    double ridge = 0.0;
    double jitter = 0.0;          // diagonal jitter actually applied
    ScalingMap input_map;         // x columns
    ScalingMap param_map;         // theta columns (parameter-space bounds)
    Eigen::VectorXd param_lower, param_upper;
    Eigen::VectorXd fitted;       // at training points
    Eigen::VectorXd residuals;    // simulator jitter estimates tau_hat
    Eigen::VectorXd hat_diag;
    double train_rmse = 0.0;
    double loocv = 0.0;

    Eigen::Index m() const { return train_unit.rows(); }
    Eigen::Index input_dim() const { return input_map.dim(); }
    Eigen::Index param_dim() const { return param_map.dim(); }

    // theta must lie inside the parameter box; x outside the training bounds
    // is clipped (sets *clipped when given).
    double predict(const Eigen::VectorXd& x, const Eigen::VectorXd& theta,
                   bool* clipped = nullptr) const;
};

EmulatorModel fit_emulator(const SimulatorDataset& sim, const ParameterSpace& space,
                           const KernelConfig& config = {});

double emulator_predict(const EmulatorModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& theta, bool* clipped = nullptr);

// sqrt((1/m) sum_j (r_j / (1 - S_jj))^2) from the stored hat diagonal.
// Throws numeric_error when any S_jj >= 1 - 1e-12 (unstable).
double loocv_rmse(const EmulatorModel& model);

std::string emulator_to_json(const EmulatorModel& model);
EmulatorModel emulator_from_json(const std::string& text);

}  // namespace calib
