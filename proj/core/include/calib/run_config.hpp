#pragma once

#include "calib/bootstrap.hpp"
#include "calib/optimize.hpp"
#include "calib/problems.hpp"

#include <string>
#include <vector>

namespace calib {

// Fully-validated CLI run configuration. Unknown keys are rejected; the seed
// is mandatory (there is no wall-clock fallback, reruns must be exact).
struct RunConfig {
    std::string experimental_csv;
    std::string simulator_csv;
    std::string parameter_space;
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    int threads = 0;               // 0: all hardware threads
    int grid_resolution = 101;     // prediction grid points per dimension
    int knot_cap = 200;
    std::vector<double> lambda_grid;   // defaults to default_lambda_grid()
    OptimizerConfig optimizer;
    BootstrapConfig bootstrap;     // replicates, alpha, resample, undersmooth

    struct Study {
        std::string problem = "linear";      // linear | nonlinear
        double sigma = -1.0;                 // < 0: problem default
        std::string design = "grid";
        std::vector<int> sizes = {100, 200, 400, 800, 1600, 3200};
        int replicates = 100;
        int n = 200;
        int inner_replicates = 500;
        int outer = 200;
        bool rate_lambda = true;
        double rate_scale = 0.1;
        double rate_exponent = -0.4;
        int knot_cap = 0;                    // 0: top-level knot_cap
        int coverage_grid_points = 21;
    } study;
};

RunConfig load_config(const std::string& path);

}  // namespace calib
