#pragma once

#include "calib/types.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <vector>

namespace calib {

// Cubic B-spline basis (order 4) on [0,1] with the integrated squared second
// derivative as roughness penalty. Knots sit at the unique training values,
// thinned to at most knot_cap sites by even-quantile selection. The fitting
// structures that depend only on the design are precomputed here and shared
// by every fit on the same basis.
struct SplineBasis {
    Eigen::VectorXd sites;      // distinct knot sites, ascending
    Eigen::VectorXd knots;      // full knot vector, 4-fold boundary multiplicity
    int num_basis = 0;          // K = sites.size() + 2

    Eigen::VectorXd x;          // training inputs
    // Sparse design rows: row i has 4 consecutive nonzeros starting at first[i].
    Eigen::VectorXi first;
    Eigen::Matrix<double, Eigen::Dynamic, 4> weights;

    Eigen::MatrixXd penalty;    // Omega, K x K, symmetric PSD, null space = {1, x}

    // Rotated fitting frame: T = [Q1 Z] with Q1 spanning the coefficient
    // vectors of 1 and x (partition of unity / Greville identity). In this
    // frame the penalty's null space is enforced exactly, which keeps the
    // large-lambda limit stable.
    Eigen::MatrixXd rotation;      // T, orthogonal K x K
    Eigen::MatrixXd gram_rot;      // T' (B'B/n) T
    Eigen::MatrixXd penalty_rot;   // T' Omega T with null-space rows/cols zeroed

    Eigen::Index n() const { return x.size(); }
    double lo() const { return sites[0]; }
    double hi() const { return sites[sites.size() - 1]; }

    // Basis functions (or a derivative) at one point; 4 nonzero values
    // starting at basis index *first. x outside [lo, hi] is clamped.
    void evaluate(double x, int deriv, int* first, double out[4]) const;
};

std::shared_ptr<const SplineBasis> build_spline_basis(const Eigen::VectorXd& x,
                                                      int knot_cap = 200);

struct PenalizedFit {
    std::shared_ptr<const SplineBasis> basis;
    Eigen::VectorXd coefficients;   // B-spline coordinates
    double lambda = 0.0;
    double edf = 0.0;               // trace of the hat matrix
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    double rss = 0.0;

    double penalty_value() const;   // c' Omega c = squared roughness J^2
};

// Factors (B'B/n + lambda^2 Omega) once; cheap repeated fits for new y on the
// same basis and lambda (used heavily by backfitting).
class PenalizedSolver {
public:
    PenalizedSolver(std::shared_ptr<const SplineBasis> basis, double lambda);

    double edf() const { return edf_; }
    double lambda() const { return lambda_; }
    PenalizedFit fit(const Eigen::VectorXd& y) const;

private:
    std::shared_ptr<const SplineBasis> basis_;
    double lambda_ = 0.0;
    double edf_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Minimizes (1/n) sum (y_i - f(x_i))^2 + lambda^2 J^2(f) over the spline
// space via the SPD normal system, with 1e-10 ridge jitter if needed.
PenalizedFit fit_penalized(std::shared_ptr<const SplineBasis> basis,
                           const Eigen::VectorXd& y, double lambda);

// (RSS/n) / (1 - edf/n)^2; +infinity when edf >= n.
double gcv_score(const PenalizedFit& fit);

struct LambdaSelection {
    double lambda = 0.0;
    std::vector<double> scores;   // GCV per grid value
};

// Grid argmin of gcv_score; ties break toward the larger (smoother) lambda.
LambdaSelection select_lambda(const std::shared_ptr<const SplineBasis>& basis,
                              const Eigen::VectorXd& y,
                              const std::vector<double>& grid);

// 41 log-spaced values, 1e-8 .. 1e2.
std::vector<double> default_lambda_grid();

// Basis evaluation times coefficients; linear extrapolation beyond the
// boundary knots (natural-spline convention).
double spline_predict(const PenalizedFit& fit, double x);
Eigen::VectorXd spline_predict(const PenalizedFit& fit, const Eigen::VectorXd& x_new);

}  // namespace calib
