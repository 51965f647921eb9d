#include "calib/optimize.hpp"

#include "calib/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace calib {

void OptimizerConfig::validate(Eigen::Index dim) const {
    if (resolved_population(dim) < 4) throw config_error("population must be at least 4");
    if (!(mutation > 0.0 && mutation < 2.0)) throw config_error("mutation factor must lie in (0, 2)");
    if (!(crossover >= 0.0 && crossover <= 1.0)) throw config_error("crossover rate must lie in [0, 1]");
    if (max_generations < 1) throw config_error("max_generations must be positive");
    if (stall_generations < 1) throw config_error("stall_generations must be positive");
}

int OptimizerConfig::resolved_population(Eigen::Index dim) const {
    if (population > 0) return population;
    return std::max(20, 10 * static_cast<int>(dim));
}

namespace {

std::string format_point(const Eigen::VectorXd& theta) {
    std::ostringstream os;
    os << "(";
    for (Eigen::Index k = 0; k < theta.size(); ++k) os << (k ? ", " : "") << theta[k];
    os << ")";
    return os.str();
}

struct BoxProblem {
    const std::function<double(const Eigen::VectorXd&)>& objective;
    const ParameterSpace& space;
    long evaluations = 0;

    Eigen::VectorXd unscale(const Eigen::VectorXd& u) const {
        Eigen::VectorXd theta(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            theta[k] = space.lower[k] + u[k] * (space.upper[k] - space.lower[k]);
            theta[k] = std::clamp(theta[k], space.lower[k], space.upper[k]);
        }
        return theta;
    }

    double eval_unit(const Eigen::VectorXd& u) {
        const Eigen::VectorXd theta = unscale(u);
        const double v = objective(theta);
        ++evaluations;
        if (!std::isfinite(v))
            throw numeric_error("objective returned a non-finite value at theta = " +
                                format_point(theta));
        return v;
    }
};

// fold into [0, 1] by reflection
double reflect01(double v) {
    while (v < 0.0 || v > 1.0) {
        if (v < 0.0) v = -v;
        if (v > 1.0) v = 2.0 - v;
    }
    return v;
}

// Nelder-Mead with every candidate clipped to the unit box before
// evaluation; feasibility is preserved by construction.
void nelder_mead(BoxProblem& problem, Eigen::VectorXd& best_u, double& best_f,
                 int max_iterations) {
    const Eigen::Index d = best_u.size();
    const int np = static_cast<int>(d) + 1;
    std::vector<Eigen::VectorXd> simplex(np, best_u);
    std::vector<double> fv(np);
    fv[0] = best_f;
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::VectorXd pt = best_u;
        const double step = pt[j] + 0.05 <= 1.0 ? 0.05 : -0.05;
        pt[j] = std::clamp(pt[j] + step, 0.0, 1.0);
        simplex[j + 1] = pt;
        fv[j + 1] = problem.eval_unit(pt);
    }

    const auto clip = [](Eigen::VectorXd v) {
        for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = std::clamp(v[k], 0.0, 1.0);
        return v;
    };

    std::vector<int> order(np);
    for (int it = 0; it < max_iterations; ++it) {
        for (int i = 0; i < np; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int lo = order[0], hi = order[np - 1], second_hi = order[np - 2];
        if (fv[hi] - fv[lo] <= 1e-14 * (1.0 + std::abs(fv[lo]))) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < np; ++i)
            if (i != hi) centroid += simplex[i];
        centroid /= static_cast<double>(np - 1);

        const Eigen::VectorXd reflected = clip(centroid + (centroid - simplex[hi]));
        const double fr = problem.eval_unit(reflected);
        if (fr < fv[lo]) {
            const Eigen::VectorXd expanded = clip(centroid + 2.0 * (centroid - simplex[hi]));
            const double fe = problem.eval_unit(expanded);
            if (fe < fr) {
                simplex[hi] = expanded;
                fv[hi] = fe;
            } else {
                simplex[hi] = reflected;
                fv[hi] = fr;
            }
        } else if (fr < fv[second_hi]) {
            simplex[hi] = reflected;
            fv[hi] = fr;
        } else {
            const Eigen::VectorXd contracted =
                clip(centroid + 0.5 * (simplex[hi] - centroid));
            const double fc = problem.eval_unit(contracted);
            if (fc < fv[hi]) {
                simplex[hi] = contracted;
                fv[hi] = fc;
            } else {
                for (int i = 0; i < np; ++i) {
                    if (i == lo) continue;
                    simplex[i] = clip(simplex[lo] + 0.5 * (simplex[i] - simplex[lo]));
                    fv[i] = problem.eval_unit(simplex[i]);
                }
            }
        }
    }
    for (int i = 0; i < np; ++i) {
        if (fv[i] < best_f) {
            best_f = fv[i];
            best_u = simplex[i];
        }
    }
}

}  // namespace

MinimizeResult minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                        const ParameterSpace& space, const OptimizerConfig& config) {
    space.validate();
    const Eigen::Index d = space.dim();
    config.validate(d);
    const int np = config.resolved_population(d);

    BoxProblem problem{objective, space};
    rng::Engine rng(config.seed);

    std::vector<Eigen::VectorXd> pop(np);
    std::vector<double> fv(np);
    for (int i = 0; i < np; ++i) {
        pop[i].resize(d);
        for (Eigen::Index j = 0; j < d; ++j) pop[i][j] = rng.uniform();
        fv[i] = problem.eval_unit(pop[i]);
    }

    int best_i = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    double best_f = fv[best_i];
    Eigen::VectorXd best_u = pop[best_i];

    MinimizeResult result;
    result.trace.push_back(best_f);

    double stall_reference = best_f;
    int stall_count = 0;
    std::vector<Eigen::VectorXd> trials(np);
    std::vector<double> trial_f(np);
    int gen = 0;
    for (gen = 1; gen <= config.max_generations; ++gen) {
        // All random draws happen here in a fixed order; evaluation and
        // selection below are order-independent (generation barrier).
        for (int i = 0; i < np; ++i) {
            int r1, r2, r3;
            do { r1 = static_cast<int>(rng.below(np)); } while (r1 == i);
            do { r2 = static_cast<int>(rng.below(np)); } while (r2 == i || r2 == r1);
            do { r3 = static_cast<int>(rng.below(np)); } while (r3 == i || r3 == r1 || r3 == r2);
            const int j_rand = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
            Eigen::VectorXd trial = pop[i];
            for (Eigen::Index j = 0; j < d; ++j) {
                const double coin = rng.uniform();
                if (coin < config.crossover || j == j_rand) {
                    trial[j] = reflect01(pop[r1][j] +
                                         config.mutation * (pop[r2][j] - pop[r3][j]));
                }
            }
            trials[i] = std::move(trial);
        }
        for (int i = 0; i < np; ++i) trial_f[i] = problem.eval_unit(trials[i]);
        for (int i = 0; i < np; ++i) {
            if (trial_f[i] < fv[i]) {  // strict: scale-invariant comparisons
                fv[i] = trial_f[i];
                pop[i] = trials[i];
                if (trial_f[i] < best_f) {
                    best_f = trial_f[i];
                    best_u = pop[i];
                }
            }
        }
        result.trace.push_back(best_f);

        if (stall_reference - best_f < config.stall_tolerance) {
            if (++stall_count >= config.stall_generations) break;
        } else {
            stall_reference = best_f;
            stall_count = 0;
        }
    }
    result.generations = std::min(gen, config.max_generations);

    if (config.polish) {
        const int iters = config.polish_max_iterations > 0
                              ? config.polish_max_iterations
                              : 200 + 100 * static_cast<int>(d);
        nelder_mead(problem, best_u, best_f, iters);
    }

    result.theta = problem.unscale(best_u);
    result.value = best_f;
    result.evaluations = problem.evaluations;
    return result;
}

}  // namespace calib
