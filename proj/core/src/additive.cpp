#include "calib/additive.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

namespace calib {

double AdditiveModel::predict(const Eigen::RowVectorXd& x) const {
    double v = base;
    for (Eigen::Index j = 0; j < dim(); ++j)
        v += spline_predict(components[j].fit, x[j]);
    return v;
}

Eigen::VectorXd AdditiveModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out[i] = predict(Eigen::RowVectorXd(x.row(i)));
    return out;
}

Eigen::VectorXd AdditiveModel::component_values(Eigen::Index j,
                                                const Eigen::VectorXd& xj) const {
    return spline_predict(components[j].fit, xj).array() - components[j].offset;
}

namespace {

AdditiveModel fit_univariate(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                             const AdditiveOptions& options) {
    auto basis = build_spline_basis(inputs.col(0), options.knot_cap);
    const LambdaSelection sel = select_lambda(basis, y, options.lambda_grid);
    const double lambda = options.undersmooth * sel.lambda;
    PenalizedFit fit = fit_penalized(basis, y, lambda);

    AdditiveModel model;
    model.lambda = lambda;
    model.total_edf = fit.edf;
    const double offset = fit.fitted.mean();
    model.intercept = offset;
    model.base = model.intercept - offset;  // exactly 0: prediction is the raw spline
    model.components.push_back({std::move(fit), offset});
    return model;
}

struct BackfitState {
    std::vector<Eigen::VectorXd> effects;   // centered fitted values per dim
    std::vector<PenalizedFit> fits;         // last per-dimension fits
    double rss = 0.0;
    bool converged = false;
    int cycles = 0;
};

BackfitState backfit(const std::vector<std::shared_ptr<const SplineBasis>>& bases,
                     const std::vector<PenalizedSolver>& solvers,
                     const Eigen::VectorXd& y_centered, const AdditiveOptions& options) {
    const Eigen::Index n = y_centered.size();
    const Eigen::Index p = static_cast<Eigen::Index>(bases.size());
    BackfitState state;
    state.effects.assign(p, Eigen::VectorXd::Zero(n));
    state.fits.resize(p);

    Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
    for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const Eigen::VectorXd partial = y_centered - (total - state.effects[j]);
            PenalizedFit fit = solvers[static_cast<std::size_t>(j)].fit(partial);
            Eigen::VectorXd effect = fit.fitted.array() - fit.fitted.mean();
            change = std::max(change, (effect - state.effects[j]).cwiseAbs().maxCoeff());
            total += effect - state.effects[j];
            state.effects[j] = std::move(effect);
            state.fits[j] = std::move(fit);
        }
        state.cycles = cycle;
        if (change < options.tol) {
            state.converged = true;
            break;
        }
    }
    state.rss = (y_centered - total).squaredNorm();
    return state;
}

}  // namespace

AdditiveModel fit_additive(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                           const AdditiveOptions& options) {
    const Eigen::Index n = inputs.rows();
    const Eigen::Index p = inputs.cols();
    if (p < 1) throw data_error("fit_additive: need at least one input dimension");
    if (y.size() != n) throw data_error("fit_additive: y length does not match inputs");
    if (n < 4 * p)
        throw data_error("fit_additive: need n >= 4p observations, got n = " +
                         std::to_string(n) + ", p = " + std::to_string(p));
    if (!(options.undersmooth > 0.0 && options.undersmooth <= 1.0))
        throw config_error("undersmooth factor must lie in (0, 1]");

    if (p == 1) return fit_univariate(inputs, y, options);

    std::vector<std::shared_ptr<const SplineBasis>> bases;
    bases.reserve(p);
    for (Eigen::Index j = 0; j < p; ++j)
        bases.push_back(build_spline_basis(inputs.col(j), options.knot_cap));

    const double intercept = y.mean();
    const Eigen::VectorXd y_centered = y.array() - intercept;

    // Common lambda by GCV over the total edf; each candidate runs its own
    // backfit. edf_j depends only on (basis, lambda), so the solvers carry it.
    double best_score = std::numeric_limits<double>::infinity();
    double best_lambda = options.lambda_grid.front();
    for (const double lambda : options.lambda_grid) {
        std::vector<PenalizedSolver> solvers;
        solvers.reserve(p);
        double edf = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            solvers.emplace_back(bases[j], lambda);
            edf += solvers.back().edf() - 1.0;
        }
        const BackfitState state = backfit(bases, solvers, y_centered, options);
        double score;
        if (edf >= static_cast<double>(n)) {
            score = std::numeric_limits<double>::infinity();
        } else {
            const double denom = 1.0 - edf / static_cast<double>(n);
            score = (state.rss / static_cast<double>(n)) / (denom * denom);
        }
        if (score <= best_score) {  // ties toward the smoother fit
            best_score = score;
            best_lambda = lambda;
        }
    }

    const double lambda = options.undersmooth * best_lambda;
    std::vector<PenalizedSolver> solvers;
    solvers.reserve(p);
    double edf = 1.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        solvers.emplace_back(bases[j], lambda);
        edf += solvers.back().edf() - 1.0;
    }
    BackfitState state = backfit(bases, solvers, y_centered, options);

    AdditiveModel model;
    model.intercept = intercept;
    model.lambda = lambda;
    model.total_edf = edf;
    model.converged = state.converged;
    model.cycles = state.cycles;
    double base = intercept;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double offset = state.fits[j].fitted.mean();
        base -= offset;
        model.components.push_back({std::move(state.fits[j]), offset});
    }
    model.base = base;
    return model;
}

std::string additive_to_json(const AdditiveModel& model) {
    nlohmann::json j;
    j["kind"] = "additive_spline_model";
    j["intercept"] = model.intercept;
    j["base"] = model.base;
    j["lambda"] = model.lambda;
    j["total_edf"] = model.total_edf;
    j["converged"] = model.converged;
    j["cycles"] = model.cycles;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& comp : model.components) {
        nlohmann::json c;
        c["knots"] = std::vector<double>(comp.fit.basis->sites.data(),
                                         comp.fit.basis->sites.data() +
                                             comp.fit.basis->sites.size());
        c["coefficients"] = std::vector<double>(comp.fit.coefficients.data(),
                                                comp.fit.coefficients.data() +
                                                    comp.fit.coefficients.size());
        c["lambda"] = comp.fit.lambda;
        c["edf"] = comp.fit.edf;
        c["offset"] = comp.offset;
        comps.push_back(std::move(c));
    }
    j["components"] = std::move(comps);
    return j.dump(2);
}

AdditiveModel additive_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("additive model: ") + e.what());
    }
    if (!j.contains("kind") || j["kind"] != "additive_spline_model")
        throw data_error("additive model: unrecognized file kind");
    AdditiveModel model;
    model.intercept = j.at("intercept").get<double>();
    model.base = j.at("base").get<double>();
    model.lambda = j.at("lambda").get<double>();
    model.total_edf = j.at("total_edf").get<double>();
    model.converged = j.at("converged").get<bool>();
    model.cycles = j.at("cycles").get<int>();
    for (const auto& c : j.at("components")) {
        const auto knots = c.at("knots").get<std::vector<double>>();
        const auto coeffs = c.at("coefficients").get<std::vector<double>>();
        AdditiveComponent comp;
        comp.fit.basis = build_spline_basis(
            Eigen::Map<const Eigen::VectorXd>(knots.data(),
                                              static_cast<Eigen::Index>(knots.size())),
            static_cast<int>(knots.size()));
        comp.fit.coefficients = Eigen::Map<const Eigen::VectorXd>(
            coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
        if (comp.fit.coefficients.size() != comp.fit.basis->num_basis)
            throw data_error("additive model: coefficient count does not match the knots");
        comp.fit.lambda = c.at("lambda").get<double>();
        comp.fit.edf = c.at("edf").get<double>();
        comp.offset = c.at("offset").get<double>();
        model.components.push_back(std::move(comp));
    }
    return model;
}

}  // namespace calib
