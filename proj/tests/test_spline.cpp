#include "calib/rng.hpp"
#include "calib/spline.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

using namespace calib;

namespace {

Eigen::VectorXd grid01(int n) { return Eigen::VectorXd::LinSpaced(n, 0.0, 1.0); }

// Coefficients representing a + b x through the Greville abscissae.
Eigen::VectorXd line_coefficients(const SplineBasis& basis, double a, double b) {
    Eigen::VectorXd c(basis.num_basis);
    for (int i = 0; i < basis.num_basis; ++i) {
        const double greville =
            (basis.knots[i + 1] + basis.knots[i + 2] + basis.knots[i + 3]) / 3.0;
        c[i] = a + b * greville;
    }
    return c;
}

// (1/n) ||y - B c||^2 + lambda^2 c' Omega c, straight from the basis rows.
double penalized_objective(const SplineBasis& basis, const Eigen::VectorXd& y,
                           double lambda, const Eigen::VectorXd& coeffs) {
    double rss = 0.0;
    for (Eigen::Index i = 0; i < basis.n(); ++i) {
        double fit = 0.0;
        for (int j = 0; j < 4; ++j) fit += basis.weights(i, j) * coeffs[basis.first[i] + j];
        rss += (y[i] - fit) * (y[i] - fit);
    }
    return rss / static_cast<double>(basis.n()) +
           lambda * lambda * coeffs.dot(basis.penalty * coeffs);
}

}  // namespace

TEST_CASE("basis: four sites, penalty annihilates straight lines") {
    Eigen::VectorXd x(4);
    x << 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0;
    auto basis = build_spline_basis(x, 200);
    CHECK(basis->sites.size() == 4);
    CHECK(basis->num_basis == 6);

    const Eigen::VectorXd line = line_coefficients(*basis, 2.0, -3.0);
    CHECK((basis->penalty * line).cwiseAbs().maxCoeff() < 1e-10);

    // null space is exactly {1, x}: third-smallest eigenvalue well away from 0
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(basis->penalty);
    CHECK(std::abs(eig.eigenvalues()[0]) < 1e-10);
    CHECK(std::abs(eig.eigenvalues()[1]) < 1e-10);
    CHECK(eig.eigenvalues()[2] > 1e-4);
}

TEST_CASE("basis: knot cap binds by even quantiles") {
    rng::Engine eng(9);
    Eigen::VectorXd x(500);
    for (int i = 0; i < 500; ++i) x[i] = eng.uniform();
    auto basis = build_spline_basis(x, 200);
    CHECK(basis->sites.size() == 200);
    CHECK(basis->num_basis == 202);
    // endpoints kept, strictly ascending
    std::vector<double> sorted(x.data(), x.data() + 500);
    std::sort(sorted.begin(), sorted.end());
    CHECK(basis->sites[0] == sorted.front());
    CHECK(basis->sites[199] == sorted.back());
    for (int i = 1; i < 200; ++i) CHECK(basis->sites[i] > basis->sites[i - 1]);
}

TEST_CASE("basis: fewer than 4 unique values is an error") {
    Eigen::VectorXd x(6);
    x << 0.0, 0.0, 0.5, 0.5, 1.0, 1.0;
    CHECK_THROWS_AS(build_spline_basis(x, 200), data_error);
}

TEST_CASE("fit: lambda 0 with saturated knots interpolates") {
    Eigen::VectorXd x = grid01(40);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) y[i] = std::sin(7.0 * x[i]) + 0.3 * std::cos(19.0 * x[i]);
    auto basis = build_spline_basis(x, 400);
    const PenalizedFit fit = fit_penalized(basis, y, 0.0);
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit: lambda 1e8 equals the least-squares straight line") {
    rng::Engine eng(4);
    const int n = 120;
    Eigen::VectorXd x = grid01(n), y(n);
    for (int i = 0; i < n; ++i)
        y[i] = 1.5 + 0.7 * x[i] + std::sin(6.0 * x[i]) + 0.1 * eng.gaussian();
    auto basis = build_spline_basis(x, 200);
    const PenalizedFit fit = fit_penalized(basis, y, 1e8);

    Eigen::MatrixXd h(n, 2);
    h.col(0).setOnes();
    h.col(1) = x;
    const Eigen::Vector2d beta = (h.transpose() * h).ldlt().solve(h.transpose() * y);
    for (int i = 0; i < n; ++i)
        CHECK(std::abs(fit.fitted[i] - (beta[0] + beta[1] * x[i])) < 1e-8);
    CHECK(fit.edf == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("fit: exactly linear data leaves no residual at any lambda") {
    Eigen::VectorXd x = grid01(30);
    const Eigen::VectorXd y = (0.25 - 1.75 * x.array()).matrix();
    auto basis = build_spline_basis(x, 200);
    for (const double lambda : {0.0, 1e-4, 1.0, 1e4, 1e8})
        CHECK(fit_penalized(basis, y, lambda).residuals.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gcv: guards and the direct formula") {
    Eigen::VectorXd x = grid01(20);
    auto basis = build_spline_basis(x, 200);
    const Eigen::VectorXd y = Eigen::VectorXd::Random(20);

    PenalizedFit synthetic = fit_penalized(basis, y, 1.0);
    synthetic.rss = 0.0;
    synthetic.edf = 20.0;  // interpolation: denominator guard
    CHECK(gcv_score(synthetic) == std::numeric_limits<double>::infinity());

    synthetic.rss = 20.0;  // RSS/n = 1
    synthetic.edf = 10.0;  // edf/n = 0.5
    CHECK(gcv_score(synthetic) == doctest::Approx(4.0).epsilon(1e-15));

    const PenalizedFit fit = fit_penalized(basis, y, 0.01);
    const double n = static_cast<double>(basis->n());
    const double recomputed = (fit.rss / n) / ((1.0 - fit.edf / n) * (1.0 - fit.edf / n));
    CHECK(gcv_score(fit) == doctest::Approx(recomputed).epsilon(1e-15));
}

TEST_CASE("select_lambda: single point, tie rule, brute-force equality") {
    rng::Engine eng(5);
    const int n = 80;
    Eigen::VectorXd x = grid01(n), y(n);
    for (int i = 0; i < n; ++i) y[i] = std::sin(6.283185307179586 * x[i]) + 0.2 * eng.gaussian();
    auto basis = build_spline_basis(x, 60);

    const LambdaSelection single = select_lambda(basis, y, {0.37});
    CHECK(single.lambda == 0.37);

    // y = 0 makes every score exactly zero: ties resolve to the largest lambda
    const std::vector<double> grid = default_lambda_grid();
    const LambdaSelection ties = select_lambda(basis, Eigen::VectorXd::Zero(n), grid);
    CHECK(ties.lambda == grid.back());

    // independent brute-force loop over the same grid, same tie rule
    double best = std::numeric_limits<double>::infinity();
    double best_lambda = grid.front();
    for (const double lambda : grid) {
        const double score = gcv_score(fit_penalized(basis, y, lambda));
        if (score <= best) {
            best = score;
            best_lambda = lambda;
        }
    }
    const LambdaSelection sel = select_lambda(basis, y, grid);
    CHECK(sel.lambda == best_lambda);
    REQUIRE(sel.scores.size() == grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(sel.scores[k] == gcv_score(fit_penalized(basis, y, grid[k])));
}

TEST_CASE("select_lambda validates its grid") {
    auto basis = build_spline_basis(grid01(10), 200);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    CHECK_THROWS_AS(select_lambda(basis, y, {}), data_error);
    CHECK_THROWS_AS(select_lambda(basis, y, {1.0, 0.1}), data_error);
}

TEST_CASE("predict: training points, linear data, boundary extrapolation") {
    Eigen::VectorXd x = grid01(25);
    Eigen::VectorXd y(25);
    for (int i = 0; i < 25; ++i) y[i] = std::cos(3.0 * x[i]);
    auto basis = build_spline_basis(x, 400);
    const PenalizedFit interp = fit_penalized(basis, y, 0.0);
    for (int i = 0; i < 25; ++i) CHECK(std::abs(spline_predict(interp, x[i]) - y[i]) < 1e-6);

    const Eigen::VectorXd ylin = (0.5 + 2.0 * x.array()).matrix();
    const PenalizedFit lin = fit_penalized(basis, ylin, 1.0);
    CHECK(std::abs(spline_predict(lin, 0.5) - 1.5) < 1e-8);

    // x = 1.1 extrapolates linearly from the value and slope at 1.0
    const double value_at_1 = spline_predict(interp, 1.0);
    const double fd_slope = (value_at_1 - spline_predict(interp, 1.0 - 1e-6)) / 1e-6;
    const double extrapolated = spline_predict(interp, 1.1);
    CHECK(extrapolated == doctest::Approx(value_at_1 + 0.1 * fd_slope).epsilon(1e-4));
    // further out, still on the same straight line
    const double extr2 = spline_predict(interp, 1.2);
    CHECK(extr2 - extrapolated == doctest::Approx(extrapolated - value_at_1).epsilon(1e-9));
}

TEST_CASE("edf is non-increasing in lambda over the default grid") {
    rng::Engine eng(17);
    Eigen::VectorXd x(150);
    for (int i = 0; i < 150; ++i) x[i] = eng.uniform();
    auto basis = build_spline_basis(x, 80);
    double prev = std::numeric_limits<double>::infinity();
    for (const double lambda : default_lambda_grid()) {
        const double edf = PenalizedSolver(basis, lambda).edf();
        CHECK(edf <= prev + 1e-9);
        CHECK(edf >= 2.0 - 1e-9);
        prev = edf;
    }
}

TEST_CASE("fitted coefficients are a local minimum of the penalized objective") {
    rng::Engine eng(23);
    const int n = 60;
    Eigen::VectorXd x = grid01(n), y(n);
    for (int i = 0; i < n; ++i) y[i] = std::sin(5.0 * x[i]) + 0.1 * eng.gaussian();
    auto basis = build_spline_basis(x, 40);
    const double lambda = 0.03;
    const PenalizedFit fit = fit_penalized(basis, y, lambda);
    const double at_solution = penalized_objective(*basis, y, lambda, fit.coefficients);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd direction(basis->num_basis);
        for (int j = 0; j < basis->num_basis; ++j) direction[j] = eng.gaussian();
        direction.normalize();
        const double perturbed =
            penalized_objective(*basis, y, lambda, fit.coefficients + 1e-4 * direction);
        CHECK(at_solution <= perturbed + 1e-15);
    }
}

TEST_CASE("smoothing never roughens: selected penalty below the near-zero-lambda penalty") {
    rng::Engine eng(31);
    const int n = 100;
    Eigen::VectorXd x = grid01(n), y(n);
    for (int i = 0; i < n; ++i) y[i] = 0.3 + 1.2 * x[i] + 0.05 * eng.gaussian();
    auto basis = build_spline_basis(x, 60);
    const LambdaSelection sel = select_lambda(basis, y, default_lambda_grid());
    const double selected_penalty = fit_penalized(basis, y, sel.lambda).penalty_value();
    const double rough_penalty = fit_penalized(basis, y, 1e-8).penalty_value();
    CHECK(selected_penalty <= rough_penalty + 1e-12);
}
