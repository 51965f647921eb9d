#pragma once

#include "calib/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace calib {

struct OptimizerConfig {
    int population = 0;             // 0: max(20, 10 d)
    double mutation = 0.8;          // F, in (0, 2)
    double crossover = 0.9;         // CR, in [0, 1]
    int max_generations = 500;
    int stall_generations = 50;     // stop when best improves by less than
    double stall_tolerance = 1e-12; // stall_tolerance over this many generations
    std::uint64_t seed = 0;
    bool polish = true;             // Nelder-Mead refinement of the DE best
    int polish_max_iterations = 0;  // 0: 200 + 100 d

    void validate(Eigen::Index dim) const;
    int resolved_population(Eigen::Index dim) const;
};

struct MinimizeResult {
    Eigen::VectorXd theta;          // original units, inside the box
    double value = 0.0;
    std::vector<double> trace;      // best objective per generation
    long evaluations = 0;
    int generations = 0;
};

// Global minimization over the parameter box: differential evolution
// (rand/1/bin) in the scaled unit cube with reflection at the bounds,
// followed by an optional Nelder-Mead polish whose iterates are clipped to
// the box. Deterministic for a fixed seed. Throws numeric_error when the
// objective returns a non-finite value.
MinimizeResult minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                        const ParameterSpace& space, const OptimizerConfig& config);

}  // namespace calib
