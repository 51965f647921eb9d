#include "calib/emulator.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace calib {

std::vector<double> default_ridge_grid() {
    std::vector<double> grid(21);
    for (int k = 0; k <= 20; ++k) grid[k] = std::pow(10.0, -10.0 + 0.5 * k);
    return grid;
}

namespace {

constexpr double kUnstableLeverage = 1.0 - 1e-12;

Eigen::VectorXd median_lengthscales(const Eigen::MatrixXd& unit) {
    const Eigen::Index m = unit.rows(), dims = unit.cols();
    Eigen::VectorXd ell(dims);
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (Eigen::Index j = 0; j < dims; ++j) {
        diffs.clear();
        for (Eigen::Index a = 1; a < m; ++a)
            for (Eigen::Index b = 0; b < a; ++b)
                diffs.push_back(std::abs(unit(a, j) - unit(b, j)));
        const std::size_t mid = diffs.size() / 2;
        std::nth_element(diffs.begin(), diffs.begin() + mid, diffs.end());
        double med = diffs[mid];
        if (diffs.size() % 2 == 0) {
            const double lo = *std::max_element(diffs.begin(), diffs.begin() + mid);
            med = 0.5 * (med + lo);
        }
        ell[j] = 3.0 * (med > 0.0 ? med : 0.3);  // dilated median (fallback 0.3)
    }
    return ell;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& unit, const Eigen::VectorXd& ell) {
    const Eigen::MatrixXd scaled = unit * ell.cwiseInverse().asDiagonal();
    const Eigen::VectorXd sq = scaled.rowwise().squaredNorm();
    Eigen::MatrixXd k = -2.0 * (scaled * scaled.transpose());
    k.colwise() += sq;
    k.rowwise() += sq.transpose();
    return (-0.5 * k.array()).exp();
}

struct RidgeSolution {
    Eigen::VectorXd dual;
    double mean_offset = 0.0;
    Eigen::VectorXd hat_diag;
    Eigen::VectorXd fitted;
    double loocv = 0.0;
    bool stable = true;
};

// Minimizer of sum_j (y_j - mu - f_j)^2 + reg ||f||_K^2 over (mu, f), solved
// through the eigendecomposition of K. The solve uses reg + jitter; the hat
// diagonal uses the nominal reg only, so an interpolating fit (alpha = 0)
// reports leverage 1 and is flagged unstable rather than masked by the
// stabilization jitter. The exact leave-one-out identity r_j / (1 - H_jj)
// holds for this joint estimator whenever no jitter is applied.
RidgeSolution solve_ridge(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& eig,
                          const Eigen::VectorXd& y, double reg, double jitter) {
    const Eigen::Index m = y.size();
    const Eigen::VectorXd evals = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXd shifted = evals.array() + reg + jitter;

    const Eigen::MatrixXd& q = eig.eigenvectors();
    const auto apply_inverse = [&](const Eigen::VectorXd& v) {
        return (q * (q.transpose() * v).cwiseQuotient(shifted)).eval();
    };

    RidgeSolution sol;
    const Eigen::VectorXd g = apply_inverse(Eigen::VectorXd::Ones(m));
    const double s = g.sum();
    sol.mean_offset = g.dot(y) / s;
    sol.dual = apply_inverse(y.array() - sol.mean_offset);

    // H = KG + reg * g g' / s with G = (K + reg I)^{-1}, at the nominal reg
    Eigen::VectorXd ratio(m);
    for (Eigen::Index k = 0; k < m; ++k)
        ratio[k] = evals[k] + reg > 0.0 ? evals[k] / (evals[k] + reg) : 0.0;
    sol.hat_diag.resize(m);
    for (Eigen::Index j = 0; j < m; ++j)
        sol.hat_diag[j] = q.row(j).cwiseAbs2().dot(ratio) + reg * g[j] * g[j] / s;

    // fitted = mu + K c = y - (reg + jitter) c
    sol.fitted = y - (reg + jitter) * sol.dual;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (sol.hat_diag[j] >= kUnstableLeverage) {
            sol.stable = false;
            break;
        }
        const double loo = (y[j] - sol.fitted[j]) / (1.0 - sol.hat_diag[j]);
        acc += loo * loo;
    }
    sol.loocv = sol.stable ? std::sqrt(acc / static_cast<double>(m))
                           : std::numeric_limits<double>::infinity();
    return sol;
}

// Smallest jitter in {0, 1e-12, ..., 1e-6} making the shifted spectrum
// safely positive; the kernel is PSD so this only triggers near alpha = 0.
double choose_jitter(const Eigen::VectorXd& evals, double reg) {
    const double max_ev = std::max(evals.maxCoeff(), 1.0) + reg;
    for (const double j : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
        if (evals.minCoeff() + reg + j > 1e-15 * max_ev) return j;
    }
    throw numeric_error("emulator Gram matrix not positive definite after maximum jitter 1e-6");
}

}  // namespace

EmulatorModel fit_emulator(const SimulatorDataset& sim, const ParameterSpace& space,
                           const KernelConfig& config) {
    space.validate();
    const ValidationReport report = validate_dataset(sim);
    if (!report.ok()) throw data_error("simulator dataset invalid:\n" + report.to_string());
    const Eigen::Index m = sim.m(), p = sim.p(), d = sim.d();
    if (d != space.dim())
        throw data_error("simulator dataset parameter dimension does not match the space");
    for (Eigen::Index j = 0; j < m; ++j)
        if (!space.contains(sim.params.row(j).transpose()))
            throw data_error("simulator parameter setting at row " + std::to_string(j) +
                             " lies outside the parameter space");

    EmulatorModel model;
    // x columns scale by their own data range; theta columns by the box.
    Eigen::VectorXd x_lo(p), x_hi(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        x_lo[j] = sim.inputs.col(j).minCoeff();
        x_hi[j] = sim.inputs.col(j).maxCoeff();
        if (!(x_lo[j] < x_hi[j])) x_hi[j] = x_lo[j] + 1.0;  // constant column
    }
    model.input_map = ScalingMap::from_bounds(x_lo, x_hi);
    model.param_map = ScalingMap::from_bounds(space.lower, space.upper);
    model.param_lower = space.lower;
    model.param_upper = space.upper;

    model.train_unit.resize(m, p + d);
    model.train_unit.leftCols(p) = model.input_map.to_unit_rows(sim.inputs);
    model.train_unit.rightCols(d) = model.param_map.to_unit_rows(sim.params);

    model.lengthscales = config.lengthscales.size() > 0 ? config.lengthscales
                                                        : median_lengthscales(model.train_unit);
    if (model.lengthscales.size() != p + d || (model.lengthscales.array() <= 0.0).any())
        throw data_error("lengthscales must be positive with one entry per joint dimension");

    const Eigen::MatrixXd gram = kernel_matrix(model.train_unit, model.lengthscales);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw numeric_error("emulator Gram matrix eigendecomposition failed");
    const Eigen::VectorXd evals = eig.eigenvalues().cwiseMax(0.0);

    double alpha = config.ridge;
    if (alpha < 0.0) {
        const std::vector<double> grid =
            config.ridge_grid.empty() ? default_ridge_grid() : config.ridge_grid;
        double best = std::numeric_limits<double>::infinity();
        alpha = grid.front();
        for (const double a : grid) {
            const double reg = static_cast<double>(m) * a;
            const double jit = choose_jitter(evals, reg);
            const RidgeSolution sol = solve_ridge(eig, sim.outputs, reg, jit);
            if (sol.stable && sol.loocv <= best) {  // ties toward more regularization
                best = sol.loocv;
                alpha = a;
            }
        }
        if (!std::isfinite(best))
            throw numeric_error("emulator ridge selection failed: all grid values unstable");
    }

    const double reg = static_cast<double>(m) * alpha;
    model.jitter = choose_jitter(evals, reg);
    const RidgeSolution sol = solve_ridge(eig, sim.outputs, reg, model.jitter);
    model.ridge = alpha;
    model.dual = sol.dual;
    model.mean_offset = sol.mean_offset;
    model.hat_diag = sol.hat_diag;
    model.fitted = sol.fitted;
    model.residuals = sim.outputs - sol.fitted;
    model.train_rmse = std::sqrt(model.residuals.squaredNorm() / static_cast<double>(m));
    model.loocv = sol.loocv;
    return model;
}

double EmulatorModel::predict(const Eigen::VectorXd& x, const Eigen::VectorXd& theta,
                              bool* clipped) const {
    if (x.size() != input_dim() || theta.size() != param_dim())
        throw data_error("emulator predict: dimension mismatch");
    for (Eigen::Index k = 0; k < param_dim(); ++k)
        if (!(theta[k] >= param_lower[k] && theta[k] <= param_upper[k]))
            throw data_error("emulator predict: theta outside the parameter space in dimension " +
                             std::to_string(k));
    Eigen::VectorXd u(input_dim() + param_dim());
    for (Eigen::Index j = 0; j < input_dim(); ++j) {
        double v = input_map.to_unit(x[j], j);
        if (v < 0.0 || v > 1.0) {
            v = std::clamp(v, 0.0, 1.0);
            if (clipped) *clipped = true;
        }
        u[j] = v;
    }
    u.tail(param_dim()) = param_map.to_unit_point(theta);

    double acc = mean_offset;
    for (Eigen::Index j = 0; j < m(); ++j) {
        const double z =
            ((train_unit.row(j).transpose() - u).cwiseQuotient(lengthscales)).squaredNorm();
        acc += dual[j] * std::exp(-0.5 * z);
    }
    return acc;
}

double emulator_predict(const EmulatorModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& theta, bool* clipped) {
    return model.predict(x, theta, clipped);
}

double loocv_rmse(const EmulatorModel& model) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < model.m(); ++j) {
        if (model.hat_diag[j] >= kUnstableLeverage)
            throw numeric_error("leave-one-out unstable: leverage " +
                                std::to_string(model.hat_diag[j]) + " at row " +
                                std::to_string(j));
        const double loo = model.residuals[j] / (1.0 - model.hat_diag[j]);
        acc += loo * loo;
    }
    return std::sqrt(acc / static_cast<double>(model.m()));
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from(const nlohmann::json& j) {
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                             static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

std::string emulator_to_json(const EmulatorModel& model) {
    nlohmann::json j;
    j["kind"] = "kernel_ridge_emulator";
    j["input_dim"] = model.input_dim();
    j["param_dim"] = model.param_dim();
    j["lengthscales"] = vector_json(model.lengthscales);
    j["ridge"] = model.ridge;
    j["jitter"] = model.jitter;
    j["mean_offset"] = model.mean_offset;
    j["dual"] = vector_json(model.dual);
    std::vector<std::vector<double>> rows(model.m());
    for (Eigen::Index i = 0; i < model.m(); ++i)
        rows[i].assign(model.train_unit.row(i).begin(), model.train_unit.row(i).end());
    j["train_unit"] = rows;
    j["input_offset"] = vector_json(model.input_map.offset);
    j["input_scale"] = vector_json(model.input_map.scale);
    j["param_offset"] = vector_json(model.param_map.offset);
    j["param_scale"] = vector_json(model.param_map.scale);
    j["param_lower"] = vector_json(model.param_lower);
    j["param_upper"] = vector_json(model.param_upper);
    j["fitted"] = vector_json(model.fitted);
    j["residuals"] = vector_json(model.residuals);
    j["hat_diag"] = vector_json(model.hat_diag);
    j["train_rmse"] = model.train_rmse;
    // infinity marks an unstable leave-one-out (JSON has no inf literal)
    if (std::isfinite(model.loocv))
        j["loocv"] = model.loocv;
    else
        j["loocv"] = nullptr;
    return j.dump(2);
}

EmulatorModel emulator_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("emulator model: ") + e.what());
    }
    if (!j.contains("kind") || j["kind"] != "kernel_ridge_emulator")
        throw data_error("emulator model: unrecognized file kind");
    EmulatorModel model;
    model.lengthscales = vector_from(j.at("lengthscales"));
    model.ridge = j.at("ridge").get<double>();
    model.jitter = j.at("jitter").get<double>();
    model.mean_offset = j.at("mean_offset").get<double>();
    model.dual = vector_from(j.at("dual"));
    const auto rows = j.at("train_unit").get<std::vector<std::vector<double>>>();
    model.train_unit.resize(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < rows[i].size(); ++c)
            model.train_unit(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                rows[i][c];
    model.input_map.offset = vector_from(j.at("input_offset"));
    model.input_map.scale = vector_from(j.at("input_scale"));
    model.param_map.offset = vector_from(j.at("param_offset"));
    model.param_map.scale = vector_from(j.at("param_scale"));
    model.param_lower = vector_from(j.at("param_lower"));
    model.param_upper = vector_from(j.at("param_upper"));
    model.fitted = vector_from(j.at("fitted"));
    model.residuals = vector_from(j.at("residuals"));
    model.hat_diag = vector_from(j.at("hat_diag"));
    model.train_rmse = j.at("train_rmse").get<double>();
    model.loocv = j.at("loocv").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("loocv").get<double>();
    return model;
}

}  // namespace calib
