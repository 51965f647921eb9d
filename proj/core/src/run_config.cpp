#include "calib/run_config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace calib {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& item : obj.items())
        if (!known.count(item.key()))
            throw config_error("config: unknown key \"" + item.key() + "\"" +
                               (where.empty() ? "" : " in " + where));
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(std::string("config: key \"") + key + "\" has the wrong type");
    }
}

void require_exists(const std::string& path, const char* key) {
    if (path.empty()) return;
    if (!std::filesystem::exists(path))
        throw config_error(std::string("config: ") + key + " path does not exist: " + path);
}

std::vector<double> parse_lambda_grid(const json& spec) {
    static const std::set<std::string> known = {"min", "max", "count"};
    reject_unknown_keys(spec, known, "lambda_grid");
    double lo = 1e-8, hi = 1e2;
    int count = 41;
    read_into(spec, "min", lo);
    read_into(spec, "max", hi);
    read_into(spec, "count", count);
    if (!(lo > 0.0) || !(hi >= lo) || count < 1)
        throw config_error("config: lambda_grid needs 0 < min <= max and count >= 1");
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = lo;
    } else {
        const double step = (std::log10(hi) - std::log10(lo)) / (count - 1);
        for (int k = 0; k < count; ++k) grid[k] = std::pow(10.0, std::log10(lo) + step * k);
    }
    return grid;
}

void parse_optimizer(const json& spec, OptimizerConfig& cfg) {
    static const std::set<std::string> known = {
        "population", "mutation",          "crossover", "max_generations",
        "stall_generations", "stall_tolerance", "polish"};
    reject_unknown_keys(spec, known, "optimizer");
    read_into(spec, "population", cfg.population);
    read_into(spec, "mutation", cfg.mutation);
    read_into(spec, "crossover", cfg.crossover);
    read_into(spec, "max_generations", cfg.max_generations);
    read_into(spec, "stall_generations", cfg.stall_generations);
    read_into(spec, "stall_tolerance", cfg.stall_tolerance);
    read_into(spec, "polish", cfg.polish);
}

void parse_bootstrap(const json& spec, BootstrapConfig& cfg) {
    static const std::set<std::string> known = {"replicates", "alpha", "resample_design",
                                                "undersmooth"};
    reject_unknown_keys(spec, known, "bootstrap");
    read_into(spec, "replicates", cfg.replicates);
    read_into(spec, "alpha", cfg.alpha);
    read_into(spec, "resample_design", cfg.resample_design);
    read_into(spec, "undersmooth", cfg.undersmooth);
    cfg.validate();  // B >= 2, alpha in (0,1), undersmooth in (0,1]
}

void parse_study(const json& spec, RunConfig::Study& study) {
    static const std::set<std::string> known = {
        "problem",     "sigma",       "design",        "sizes",
        "replicates",  "n",           "inner_replicates", "outer",
        "rate_lambda", "rate_scale",  "rate_exponent", "knot_cap",
        "coverage_grid_points"};
    reject_unknown_keys(spec, known, "study");
    read_into(spec, "problem", study.problem);
    read_into(spec, "sigma", study.sigma);
    read_into(spec, "design", study.design);
    read_into(spec, "sizes", study.sizes);
    read_into(spec, "replicates", study.replicates);
    read_into(spec, "n", study.n);
    read_into(spec, "inner_replicates", study.inner_replicates);
    read_into(spec, "outer", study.outer);
    read_into(spec, "rate_lambda", study.rate_lambda);
    read_into(spec, "rate_scale", study.rate_scale);
    read_into(spec, "rate_exponent", study.rate_exponent);
    read_into(spec, "knot_cap", study.knot_cap);
    read_into(spec, "coverage_grid_points", study.coverage_grid_points);
    if (study.problem != "linear" && study.problem != "nonlinear")
        throw config_error("config: study.problem must be linear or nonlinear");
    parse_design_scheme(study.design);  // throws on unknown scheme
}

}  // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();

    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw config_error("config: " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw config_error("config: top level must be a JSON object");

    static const std::set<std::string> known = {
        "experimental_csv", "simulator_csv", "parameter_space", "output_dir",
        "seed",             "threads",       "grid_resolution", "knot_cap",
        "lambda_grid",      "optimizer",     "bootstrap",       "study"};
    reject_unknown_keys(doc, known, "");

    RunConfig cfg;
    read_into(doc, "experimental_csv", cfg.experimental_csv);
    read_into(doc, "simulator_csv", cfg.simulator_csv);
    read_into(doc, "parameter_space", cfg.parameter_space);
    read_into(doc, "output_dir", cfg.output_dir);
    if (!doc.contains("seed"))
        throw config_error("config: missing mandatory seed");
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
        throw config_error("config: seed must be a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
    read_into(doc, "threads", cfg.threads);
    read_into(doc, "grid_resolution", cfg.grid_resolution);
    read_into(doc, "knot_cap", cfg.knot_cap);
    cfg.lambda_grid =
        doc.contains("lambda_grid") ? parse_lambda_grid(doc["lambda_grid"]) : default_lambda_grid();
    if (doc.contains("optimizer")) parse_optimizer(doc["optimizer"], cfg.optimizer);
    if (doc.contains("bootstrap")) parse_bootstrap(doc["bootstrap"], cfg.bootstrap);
    if (doc.contains("study")) parse_study(doc["study"], cfg.study);

    if (cfg.grid_resolution < 2)
        throw config_error("config: grid_resolution must be at least 2");
    if (cfg.knot_cap < 4) throw config_error("config: knot_cap must be at least 4");
    if (cfg.threads < 0) throw config_error("config: threads must be >= 0");

    require_exists(cfg.experimental_csv, "experimental_csv");
    require_exists(cfg.simulator_csv, "simulator_csv");
    require_exists(cfg.parameter_space, "parameter_space");
    return cfg;
}

}  // namespace calib
