#include "calib/types.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <set>
#include <sstream>

namespace calib {

bool ParameterSpace::contains(const Eigen::VectorXd& theta) const {
    if (theta.size() != dim()) return false;
    for (Eigen::Index k = 0; k < dim(); ++k) {
        if (!(theta[k] >= lower[k] && theta[k] <= upper[k])) return false;
    }
    return true;
}

void ParameterSpace::validate() const {
    if (dim() < 1) throw data_error("parameter space must have at least one dimension");
    if (upper.size() != dim() || static_cast<Eigen::Index>(names.size()) != dim())
        throw data_error("parameter space fields have inconsistent lengths");
    std::set<std::string> seen;
    for (Eigen::Index k = 0; k < dim(); ++k) {
        if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]))
            throw data_error("non-finite bound for parameter '" + names[k] + "'");
        if (!(lower[k] < upper[k]))
            throw data_error("degenerate bound for parameter '" + names[k] +
                             "': lower must be strictly below upper");
        if (!seen.insert(names[k]).second)
            throw data_error("duplicate parameter name '" + names[k] + "'");
    }
}

ParameterSpace parse_parameter_space(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("parameter space: ") + e.what());
    }
    if (!doc.is_array() || doc.empty())
        throw data_error("parameter space must be a non-empty JSON array");

    ParameterSpace space;
    space.lower.resize(static_cast<Eigen::Index>(doc.size()));
    space.upper.resize(static_cast<Eigen::Index>(doc.size()));
    Eigen::Index k = 0;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("name") || !entry.contains("lower") ||
            !entry.contains("upper") || !entry["name"].is_string() ||
            !entry["lower"].is_number() || !entry["upper"].is_number())
            throw data_error("malformed parameter entry at index " + std::to_string(k) +
                             ": expected {name, lower, upper}");
        space.names.push_back(entry["name"].get<std::string>());
        space.lower[k] = entry["lower"].get<double>();
        space.upper[k] = entry["upper"].get<double>();
        ++k;
    }
    space.validate();
    return space;
}

ScalingMap ScalingMap::from_bounds(const Eigen::VectorXd& lower,
                                   const Eigen::VectorXd& upper) {
    if (lower.size() != upper.size() || lower.size() == 0)
        throw data_error("scaling bounds have inconsistent lengths");
    ScalingMap map;
    map.offset = lower;
    map.scale.resize(lower.size());
    for (Eigen::Index j = 0; j < lower.size(); ++j) {
        if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]))
            throw data_error("non-finite scaling bound in dimension " + std::to_string(j));
        if (!(lower[j] < upper[j]))
            throw data_error("scaling bounds must satisfy min < max in dimension " +
                             std::to_string(j));
        map.scale[j] = upper[j] - lower[j];
    }
    return map;
}

Eigen::MatrixXd ScalingMap::to_unit_rows(const Eigen::MatrixXd& v) const {
    Eigen::MatrixXd u = v;
    for (Eigen::Index j = 0; j < dim(); ++j)
        u.col(j) = (v.col(j).array() - offset[j]) / scale[j];
    return u;
}

Eigen::MatrixXd ScalingMap::from_unit_rows(const Eigen::MatrixXd& u) const {
    Eigen::MatrixXd v = u;
    for (Eigen::Index j = 0; j < dim(); ++j)
        v.col(j) = offset[j] + u.col(j).array() * scale[j];
    return v;
}

Eigen::VectorXd ScalingMap::to_unit_point(const Eigen::VectorXd& v) const {
    return (v - offset).cwiseQuotient(scale);
}

Eigen::VectorXd ScalingMap::from_unit_point(const Eigen::VectorXd& u) const {
    return offset + u.cwiseProduct(scale);
}

ScaledInputs scale_inputs(const Eigen::MatrixXd& data,
                          const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper) {
    if (data.cols() != lower.size())
        throw data_error("scale_inputs: bounds do not match data dimension");
    ScaledInputs out;
    out.map = ScalingMap::from_bounds(lower, upper);
    out.unit = out.map.to_unit_rows(data);
    for (Eigen::Index i = 0; i < out.unit.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.unit.cols(); ++j) {
            double& u = out.unit(i, j);
            if (u < 0.0) { u = 0.0; out.clipped = true; }
            if (u > 1.0) { u = 1.0; out.clipped = true; }
        }
    }
    return out;
}

bool ValidationReport::ok() const {
    for (const auto& issue : issues)
        if (!issue.warning) return false;
    return true;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& issue : issues) {
        os << (issue.warning ? "warning" : "violation");
        if (issue.row >= 0) os << " (row " << issue.row << ")";
        os << ": " << issue.message << "\n";
    }
    return os.str();
}

namespace {

void check_finite_matrix(const Eigen::MatrixXd& m, const std::string& what,
                         ValidationReport& report) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!std::isfinite(m(i, j)))
                report.issues.push_back({false, i, "non-finite " + what + " in column " +
                                                std::to_string(j)});
}

void check_finite_vector(const Eigen::VectorXd& v, const std::string& what,
                         ValidationReport& report) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            report.issues.push_back({false, i, "non-finite " + what});
}

// Duplicated design rows are legitimate (replication) but worth flagging.
void check_duplicate_rows(const Eigen::MatrixXd& m, ValidationReport& report) {
    for (Eigen::Index i = 1; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < i; ++k)
            if ((m.row(i) - m.row(k)).cwiseAbs().maxCoeff() == 0.0) {
                report.issues.push_back({true, i, "duplicate design row (same as row " +
                                                std::to_string(k) + ")"});
                break;
            }
}

}  // namespace

ValidationReport validate_dataset(const ExperimentalDataset& ds) {
    ValidationReport report;
    if (ds.n() < 1) report.issues.push_back({false, -1, "dataset has no rows"});
    if (ds.p() < 1) report.issues.push_back({false, -1, "dataset has no input columns"});
    if (ds.inputs.rows() != ds.outputs.size())
        report.issues.push_back({false, -1, "shape mismatch: " + std::to_string(ds.inputs.rows()) +
                                        " input rows vs " + std::to_string(ds.outputs.size()) +
                                        " outputs"});
    check_finite_matrix(ds.inputs, "input", report);
    check_finite_vector(ds.outputs, "output", report);
    check_duplicate_rows(ds.inputs, report);
    return report;
}

ValidationReport validate_dataset(const SimulatorDataset& ds) {
    ValidationReport report;
    if (ds.inputs.rows() != ds.params.rows() || ds.inputs.rows() != ds.outputs.size())
        report.issues.push_back({false, -1, "shape mismatch between inputs, params and outputs"});
    const Eigen::Index needed = ds.d() + ds.p() + 1;
    if (ds.m() < needed)
        report.issues.push_back({false, -1, "too few rows to fit a surrogate: need at least " +
                                        std::to_string(needed) + ", got " +
                                        std::to_string(ds.m())});
    check_finite_matrix(ds.inputs, "input", report);
    check_finite_matrix(ds.params, "parameter", report);
    check_finite_vector(ds.outputs, "output", report);
    Eigen::MatrixXd joint(ds.m(), ds.p() + ds.d());
    joint << ds.inputs, ds.params;
    check_duplicate_rows(joint, report);
    return report;
}

}  // namespace calib
