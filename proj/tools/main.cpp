#include "calib/bootstrap.hpp"
#include "calib/calibrate.hpp"
#include "calib/csv.hpp"
#include "calib/emulator.hpp"
#include "calib/problems.hpp"
#include "calib/rng.hpp"
#include "calib/run_config.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using calib::RunConfig;
using nlohmann::json;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw calib::data_error(path + ": cannot open file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

struct LoadedInputs {
    calib::ParameterSpace space;
    calib::ExperimentalDataset experimental;
    calib::SimulatorDataset simulator;
};

calib::ParameterSpace load_space(const RunConfig& cfg) {
    if (cfg.parameter_space.empty())
        throw calib::config_error("config: parameter_space path is required for this command");
    return calib::parse_parameter_space(slurp(cfg.parameter_space));
}

LoadedInputs load_inputs(const RunConfig& cfg, bool need_experimental) {
    LoadedInputs in;
    in.space = load_space(cfg);
    if (cfg.simulator_csv.empty())
        throw calib::config_error("config: simulator_csv path is required for this command");
    in.simulator = calib::read_simulator_csv(cfg.simulator_csv, in.space.dim());
    const calib::ValidationReport sim_report = calib::validate_dataset(in.simulator);
    if (!sim_report.ok())
        throw calib::data_error(cfg.simulator_csv + ": invalid simulator data\n" +
                                sim_report.to_string());
    for (const auto& issue : sim_report.issues)
        std::cerr << "note: " << cfg.simulator_csv << ": " << issue.message << "\n";
    if (need_experimental) {
        if (cfg.experimental_csv.empty())
            throw calib::config_error("config: experimental_csv path is required for this command");
        in.experimental = calib::read_experimental_csv(cfg.experimental_csv);
        if (in.experimental.p() != in.simulator.p())
            throw calib::data_error("experimental and simulator data disagree on the input dimension");
        const calib::ValidationReport report = calib::validate_dataset(in.experimental);
        if (!report.ok())
            throw calib::data_error(cfg.experimental_csv + ": invalid experimental data\n" +
                                    report.to_string());
        for (const auto& issue : report.issues)
            std::cerr << "note: " << cfg.experimental_csv << ": " << issue.message << "\n";
    }
    return in;
}

calib::CalibrationConfig calibration_config(const RunConfig& cfg) {
    calib::CalibrationConfig cc;
    cc.optimizer = cfg.optimizer;
    cc.optimizer.seed = calib::rng::derive_seed(cfg.seed, 1);
    cc.nonparam.knot_cap = cfg.knot_cap;
    cc.nonparam.lambda_grid = cfg.lambda_grid;
    return cc;
}

void write_theta_csv(const RunConfig& cfg, const calib::ParameterSpace& space,
                     const Eigen::VectorXd& theta,
                     const std::vector<calib::ConfidenceInterval>* cis) {
    std::ostringstream os;
    os << "name,lower_bound,upper_bound,estimate";
    if (cis) os << ",ci_lower,ci_upper";
    os << "\n";
    for (Eigen::Index k = 0; k < space.dim(); ++k) {
        os << space.names[k] << "," << calib::format_double(space.lower[k]) << ","
           << calib::format_double(space.upper[k]) << "," << calib::format_double(theta[k]);
        if (cis)
            os << "," << calib::format_double((*cis)[k].lower) << ","
               << calib::format_double((*cis)[k].upper);
        os << "\n";
    }
    calib::write_text_atomic(out_path(cfg, "theta_estimates.csv"), os.str());
}

void write_discrepancy_csv(const RunConfig& cfg, const Eigen::MatrixXd& grid,
                           const Eigen::VectorXd& estimate, int per_dim,
                           const std::vector<calib::ConfidenceInterval>* band) {
    std::ostringstream os;
    os << "dimension,input,estimate";
    if (band) os << ",lower,upper";
    os << "\n";
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        const Eigen::Index dim = r / per_dim;
        os << dim << "," << calib::format_double(grid(r, dim)) << ","
           << calib::format_double(estimate[r]);
        if (band)
            os << "," << calib::format_double((*band)[r].lower) << ","
               << calib::format_double((*band)[r].upper);
        os << "\n";
    }
    calib::write_text_atomic(out_path(cfg, "discrepancy_grid.csv"), os.str());
}

json theta_summary(const calib::ParameterSpace& space, const Eigen::VectorXd& theta,
                   const std::vector<calib::ConfidenceInterval>* cis) {
    json arr = json::array();
    for (Eigen::Index k = 0; k < space.dim(); ++k) {
        json item;
        item["name"] = space.names[k];
        item["estimate"] = theta[k];
        if (cis) {
            item["ci_lower"] = (*cis)[k].lower;
            item["ci_upper"] = (*cis)[k].upper;
        }
        arr.push_back(std::move(item));
    }
    return arr;
}

int cmd_emulate(const RunConfig& cfg) {
    const LoadedInputs in = load_inputs(cfg, false);
    const calib::EmulatorModel model = calib::fit_emulator(in.simulator, in.space);
    calib::write_text_atomic(out_path(cfg, "emulator.json"), calib::emulator_to_json(model));

    json summary;
    summary["command"] = "emulate";
    summary["rows"] = model.m();
    summary["ridge"] = model.ridge;
    summary["lengthscales"] = std::vector<double>(
        model.lengthscales.data(), model.lengthscales.data() + model.lengthscales.size());
    summary["train_rmse"] = model.train_rmse;
    summary["loocv_rmse"] = std::isfinite(model.loocv) ? json(model.loocv) : json(nullptr);
    calib::write_text_atomic(out_path(cfg, "summary.json"), summary.dump(2) + "\n");
    std::cout << "emulator fitted on " << model.m() << " runs; loocv rmse = " << model.loocv
              << "\n";
    return 0;
}

struct CalibrationOutputs {
    LoadedInputs in;
    calib::EmulatorModel emulator;
    calib::CalibrationResult result;
    Eigen::MatrixXd grid;
};

CalibrationOutputs run_calibration(const RunConfig& cfg) {
    CalibrationOutputs out{load_inputs(cfg, true), {}, {}, {}};
    out.emulator = calib::fit_emulator(out.in.simulator, out.in.space);
    const calib::EmulatorModel& em = out.emulator;
    const calib::Simulator simulator = [&em](const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& theta) {
        return em.predict(x, theta);
    };
    out.result = calib::two_step(out.in.experimental, simulator, out.in.space,
                                 calibration_config(cfg));
    out.grid = calib::profile_grid(out.in.experimental.inputs, cfg.grid_resolution);
    return out;
}

int cmd_calibrate(const RunConfig& cfg) {
    const CalibrationOutputs out = run_calibration(cfg);

    write_theta_csv(cfg, out.in.space, out.result.theta, nullptr);
    const Eigen::VectorXd delta = out.result.discrepancy_at(out.grid);
    write_discrepancy_csv(cfg, out.grid, delta, cfg.grid_resolution, nullptr);
    calib::write_text_atomic(out_path(cfg, "discrepancy_model.json"),
                             calib::additive_to_json(out.result.discrepancy));

    json summary;
    summary["command"] = "calibrate";
    summary["theta"] = theta_summary(out.in.space, out.result.theta, nullptr);
    summary["objective_value"] = out.result.objective_value;
    summary["lambda"] = out.result.lambda;
    summary["discrepancy_edf"] = out.result.discrepancy.total_edf;
    summary["emulator_loocv"] =
        std::isfinite(out.emulator.loocv) ? json(out.emulator.loocv) : json(nullptr);
    summary["optimizer_generations"] = out.result.optimization.generations;
    summary["optimizer_evaluations"] = out.result.optimization.evaluations;
    calib::write_text_atomic(out_path(cfg, "summary.json"), summary.dump(2) + "\n");

    std::cout << "calibrated " << out.in.space.dim() << " parameters; objective = "
              << out.result.objective_value << "\n";
    return 0;
}

int cmd_bootstrap(const RunConfig& cfg) {
    const CalibrationOutputs out = run_calibration(cfg);

    calib::BootstrapConfig bc = cfg.bootstrap;
    bc.seed = calib::rng::derive_seed(cfg.seed, 2);
    bc.threads = cfg.threads;
    const calib::BootstrapProblem problem = calib::make_bootstrap_problem(
        out.in.experimental, out.in.simulator, out.emulator, calib::KernelConfig{},
        out.in.space, calibration_config(cfg), out.result, out.grid);
    const calib::BootstrapEnsemble ensemble = calib::run_bootstrap(problem, bc);

    // ensemble.csv: replicate number, theta columns, then delta grid columns
    {
        std::ostringstream os;
        os << "replicate";
        for (const auto& name : out.in.space.names) os << ",theta_" << name;
        for (Eigen::Index r = 0; r < out.grid.rows(); ++r)
            os << ",delta_" << r / cfg.grid_resolution << "_" << r % cfg.grid_resolution;
        os << "\n";
        for (Eigen::Index b = 0; b < ensemble.thetas.rows(); ++b) {
            os << b + 1;
            for (Eigen::Index k = 0; k < ensemble.thetas.cols(); ++k)
                os << "," << calib::format_double(ensemble.thetas(b, k));
            for (Eigen::Index r = 0; r < ensemble.delta_grid.cols(); ++r)
                os << "," << calib::format_double(ensemble.delta_grid(b, r));
            os << "\n";
        }
        calib::write_text_atomic(out_path(cfg, "ensemble.csv"), os.str());
    }

    std::vector<calib::ConfidenceInterval> theta_cis;
    for (Eigen::Index k = 0; k < out.in.space.dim(); ++k) {
        std::vector<double> column(ensemble.thetas.rows());
        for (Eigen::Index b = 0; b < ensemble.thetas.rows(); ++b)
            column[b] = ensemble.thetas(b, k);
        theta_cis.push_back(calib::percentile_interval(std::move(column), bc.alpha));
    }
    const auto delta_band = calib::pointwise_band(ensemble.delta_grid, bc.alpha);
    const auto zeta_band = calib::pointwise_band(ensemble.zeta_grid, bc.alpha);

    write_theta_csv(cfg, out.in.space, out.result.theta, &theta_cis);
    const Eigen::VectorXd delta = out.result.discrepancy_at(out.grid);
    write_discrepancy_csv(cfg, out.grid, delta, cfg.grid_resolution, &delta_band);

    json summary;
    summary["command"] = "bootstrap";
    summary["replicates"] = ensemble.requested;
    summary["failures"] = ensemble.failures;
    summary["level"] = 1.0 - bc.alpha;
    summary["theta"] = theta_summary(out.in.space, out.result.theta, &theta_cis);
    const auto band_json = [&](const std::vector<calib::ConfidenceInterval>& band) {
        json grid_arr = json::array(), lower = json::array(), upper = json::array();
        for (Eigen::Index r = 0; r < out.grid.rows(); ++r) {
            grid_arr.push_back(out.grid(r, r / cfg.grid_resolution));
            lower.push_back(band[r].lower);
            upper.push_back(band[r].upper);
        }
        return json{{"grid", grid_arr}, {"lower", lower}, {"upper", upper}};
    };
    summary["delta_band"] = band_json(delta_band);
    summary["zeta_band"] = band_json(zeta_band);
    calib::write_text_atomic(out_path(cfg, "summary.json"), summary.dump(2) + "\n");

    std::cout << "bootstrap finished: " << ensemble.thetas.rows() << " replicates kept, "
              << ensemble.failures << " failed\n";
    return 0;
}

calib::SyntheticProblem study_problem(const RunConfig& cfg) {
    calib::SyntheticProblem problem = cfg.study.problem == "linear"
                                          ? calib::make_linear_problem()
                                          : calib::make_nonlinear_problem();
    if (cfg.study.sigma >= 0.0) problem = problem.with_sigma(cfg.study.sigma);
    return problem;
}

calib::StudyConfig study_config(const RunConfig& cfg) {
    calib::StudyConfig sc;
    sc.optimizer = cfg.optimizer;
    sc.knot_cap = cfg.study.knot_cap > 0 ? cfg.study.knot_cap : cfg.knot_cap;
    sc.lambda_grid = cfg.lambda_grid;
    sc.rate_lambda = cfg.study.rate_lambda;
    sc.rate_scale = cfg.study.rate_scale;
    sc.rate_exponent = cfg.study.rate_exponent;
    sc.design = calib::parse_design_scheme(cfg.study.design);
    sc.coverage_grid_points = cfg.study.coverage_grid_points;
    sc.threads = cfg.threads;
    sc.seed = cfg.seed;
    return sc;
}

int cmd_rate_study(const RunConfig& cfg) {
    const calib::SyntheticProblem problem = study_problem(cfg);
    const calib::StudyReport report =
        calib::rate_study(problem, cfg.study.sizes, cfg.study.replicates, study_config(cfg));
    calib::write_study_csv(report, out_path(cfg, "study_report.csv"));
    calib::write_text_atomic(out_path(cfg, "summary.json"),
                             calib::study_summary_json(report) + "\n");
    std::cerr << "rate study wall time: " << report.wall_seconds << " s\n";
    std::cout << "rate study done; theta slope = " << report.slope_theta
              << ", delta slope = " << report.slope_delta << "\n";
    return 0;
}

int cmd_coverage_study(const RunConfig& cfg) {
    const calib::SyntheticProblem problem = study_problem(cfg);
    const calib::StudyReport report =
        calib::coverage_study(problem, cfg.study.n, cfg.study.inner_replicates,
                              cfg.study.outer, study_config(cfg), cfg.bootstrap.alpha);
    calib::write_study_csv(report, out_path(cfg, "study_report.csv"));
    calib::write_text_atomic(out_path(cfg, "summary.json"),
                             calib::study_summary_json(report) + "\n");
    std::cerr << "coverage study wall time: " << report.wall_seconds << " s\n";
    std::cout << "coverage study done; theta coverage =";
    for (const double c : report.coverage_theta) std::cout << " " << c;
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibkit: frequentist computer-model calibration toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::int64_t seed_override = -1;
    int threads_override = -1;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed_override, "seed (overrides config)");
        sub->add_option("--threads", threads_override, "worker threads, 0 = auto");
    };
    CLI::App* calibrate = app.add_subcommand("calibrate", "two-step point estimates");
    CLI::App* bootstrap = app.add_subcommand("bootstrap", "residual bootstrap ensemble and intervals");
    CLI::App* emulate = app.add_subcommand("emulate", "fit and save the simulator surrogate");
    CLI::App* rate = app.add_subcommand("rate-study", "convergence-rate Monte Carlo study");
    CLI::App* coverage = app.add_subcommand("coverage-study", "bootstrap coverage Monte Carlo study");
    for (CLI::App* sub : {calibrate, bootstrap, emulate, rate, coverage}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        RunConfig cfg = calib::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
        if (threads_override >= 0) cfg.threads = threads_override;
        std::filesystem::create_directories(cfg.output_dir);

        if (app.got_subcommand(calibrate)) return cmd_calibrate(cfg);
        if (app.got_subcommand(bootstrap)) return cmd_bootstrap(cfg);
        if (app.got_subcommand(emulate)) return cmd_emulate(cfg);
        if (app.got_subcommand(rate)) return cmd_rate_study(cfg);
        return cmd_coverage_study(cfg);
    } catch (const calib::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const calib::data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
