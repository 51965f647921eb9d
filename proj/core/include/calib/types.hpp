#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace calib {

// Error taxonomy. config_error: bad configuration or usage; data_error: bad
// input data or files; numeric_error: a numerical procedure failed.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : error {
    using error::error;
};
struct data_error : error {
    using error::error;
};
struct numeric_error : error {
    using error::error;
};

// n observations of the physical reality: output y_i at p-variate input x_i,
// both in original physical units.
struct ExperimentalDataset {
    Eigen::MatrixXd inputs;    // n x p
    Eigen::VectorXd outputs;   // length n
    std::vector<std::string> input_names;
    std::string output_name = "y";

    Eigen::Index n() const { return inputs.rows(); }
    Eigen::Index p() const { return inputs.cols(); }
};

// m simulator runs: output y'_j at input x'_j under parameter setting theta'_j.
struct SimulatorDataset {
    Eigen::MatrixXd inputs;    // m x p
    Eigen::MatrixXd params;    // m x d
    Eigen::VectorXd outputs;   // length m
    std::vector<std::string> input_names;
    std::vector<std::string> param_names;
    std::string output_name = "y";

    Eigen::Index m() const { return inputs.rows(); }
    Eigen::Index p() const { return inputs.cols(); }
    Eigen::Index d() const { return params.cols(); }
};

// Box of allowable parameter values.
struct ParameterSpace {
    std::vector<std::string> names;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::Index dim() const { return lower.size(); }
    bool contains(const Eigen::VectorXd& theta) const;   // inclusive bounds
    void validate() const;                               // throws data_error
};

// Parses a JSON array of {name, lower, upper}. Throws data_error on a
// malformed entry, a degenerate bound (lower >= upper) or a duplicate name.
ParameterSpace parse_parameter_space(const std::string& json_text);

// Per-dimension affine map between original units and [0,1]:
// unit = (v - offset) / scale with scale > 0.
struct ScalingMap {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;

    static ScalingMap from_bounds(const Eigen::VectorXd& lower,
                                  const Eigen::VectorXd& upper);

    Eigen::Index dim() const { return offset.size(); }
    double to_unit(double v, Eigen::Index j) const { return (v - offset[j]) / scale[j]; }
    double from_unit(double u, Eigen::Index j) const { return offset[j] + u * scale[j]; }
    // Rows are points.
    Eigen::MatrixXd to_unit_rows(const Eigen::MatrixXd& v) const;
    Eigen::MatrixXd from_unit_rows(const Eigen::MatrixXd& u) const;
    Eigen::VectorXd to_unit_point(const Eigen::VectorXd& v) const;
    Eigen::VectorXd from_unit_point(const Eigen::VectorXd& u) const;
};

struct ScaledInputs {
    Eigen::MatrixXd unit;   // all entries in [0,1]
    ScalingMap map;
    bool clipped = false;   // set when out-of-bound values were clipped
};

// Maps each column of data affinely to [0,1] using the given bounds. Values
// outside the bounds are clipped and flagged, not rejected.
ScaledInputs scale_inputs(const Eigen::MatrixXd& data,
                          const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper);

struct ValidationIssue {
    bool warning = false;       // warnings do not fail a dataset
    Eigen::Index row = -1;      // -1: dataset-level issue
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const;            // true when no non-warning issue is present
    std::string to_string() const;
};

// Report-only checks; never mutates or throws.
ValidationReport validate_dataset(const ExperimentalDataset& ds);
ValidationReport validate_dataset(const SimulatorDataset& ds);

}  // namespace calib
