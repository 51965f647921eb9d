#include "calib/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

namespace calib {

Simulator make_simulator(EmulatorModel model) {
    auto shared = std::make_shared<const EmulatorModel>(std::move(model));
    return [shared](const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
        return shared->predict(x, theta);
    };
}

Objective::Objective(const ExperimentalDataset& experimental, Simulator sim,
                     ParameterSpace box, Eigen::VectorXd w)
    : data(&experimental), simulator(std::move(sim)), space(std::move(box)) {
    space.validate();
    if (w.size() == 0) {
        weights = Eigen::VectorXd::Ones(experimental.n());
    } else {
        if (w.size() != experimental.n())
            throw data_error("objective weights must have one entry per observation");
        for (Eigen::Index i = 0; i < w.size(); ++i)
            if (!(w[i] > 0.0) || !std::isfinite(w[i]))
                throw data_error("objective weights must be positive and finite");
        weights = w / w.mean();  // mean-one convention
    }
}

double Objective::operator()(const Eigen::VectorXd& theta) const {
    if (!space.contains(theta))
        throw data_error("objective evaluated outside the parameter box");
    const Eigen::Index n = data->n();
    // Terms are summed in sorted order, which makes the value an exact
    // function of the term multiset: permuting rows cannot change it.
    std::vector<double> terms(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = data->outputs[i] - simulator(data->inputs.row(i).transpose(), theta);
        terms[i] = weights[i] * r * r;
    }
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (const double t : terms) acc += t;
    return acc / static_cast<double>(n);
}

double objective_eval(const Objective& objective, const Eigen::VectorXd& theta) {
    return objective(theta);
}

Eigen::VectorXd CalibrationResult::discrepancy_at(const Eigen::MatrixXd& x) const {
    return discrepancy.predict(input_map.to_unit_rows(x));
}

double CalibrationResult::discrepancy_at(const Eigen::VectorXd& x) const {
    return discrepancy.predict(Eigen::RowVectorXd(input_map.to_unit_point(x).transpose()));
}

CalibrationResult two_step(const ExperimentalDataset& experimental,
                           const Simulator& simulator, const ParameterSpace& space,
                           const CalibrationConfig& config,
                           const Eigen::VectorXd& weights) {
    const ValidationReport report = validate_dataset(experimental);
    if (!report.ok())
        throw data_error("experimental dataset invalid:\n" + report.to_string());

    const Objective objective(experimental, simulator, space, weights);

    CalibrationResult result;
    result.optimization = minimize(objective, space, config.optimizer);
    result.theta = result.optimization.theta;
    result.objective_value = result.optimization.value;

    // Step 2 operates on residuals against the calibrated simulator, with
    // inputs scaled to the unit cube by their own range.
    const Eigen::Index n = experimental.n(), p = experimental.p();
    Eigen::VectorXd sim_at_theta(n);
    for (Eigen::Index i = 0; i < n; ++i)
        sim_at_theta[i] = simulator(experimental.inputs.row(i).transpose(), result.theta);
    const Eigen::VectorXd step2_targets = experimental.outputs - sim_at_theta;

    Eigen::VectorXd lo(p), hi(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        lo[j] = experimental.inputs.col(j).minCoeff();
        hi[j] = experimental.inputs.col(j).maxCoeff();
        if (!(lo[j] < hi[j])) hi[j] = lo[j] + 1.0;  // constant column
    }
    ScaledInputs scaled = scale_inputs(experimental.inputs, lo, hi);
    result.input_map = scaled.map;
    result.inputs_clipped = scaled.clipped;

    result.discrepancy = fit_additive(scaled.unit, step2_targets, config.nonparam);
    result.lambda = result.discrepancy.lambda;
    result.residuals = step2_targets - result.discrepancy.predict(scaled.unit);
    return result;
}

double predict_reality(const CalibrationResult& result, const Simulator& simulator,
                       const Eigen::VectorXd& x) {
    return simulator(x, result.theta) + result.discrepancy_at(x);
}

}  // namespace calib
