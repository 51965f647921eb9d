#include "calib/additive.hpp"
#include "calib/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace calib;

TEST_CASE("p = 1 reduces to the univariate path bit for bit") {
    rng::Engine eng(11);
    const int n = 90;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = eng.uniform();
        y[i] = 2.0 + std::sin(5.0 * x(i, 0)) + 0.15 * eng.gaussian();
    }
    AdditiveOptions options;
    options.knot_cap = 50;
    const AdditiveModel model = fit_additive(x, y, options);

    auto basis = build_spline_basis(x.col(0), options.knot_cap);
    const LambdaSelection sel = select_lambda(basis, y, options.lambda_grid);
    const PenalizedFit fit = fit_penalized(basis, y, sel.lambda);

    CHECK(model.lambda == sel.lambda);
    CHECK(model.total_edf == fit.edf);
    for (const double probe : {0.0, 0.2, 0.5, 0.77, 1.0, 1.1, -0.05}) {
        Eigen::RowVectorXd pt(1);
        pt << probe;
        CHECK(model.predict(pt) == spline_predict(fit, probe));  // bitwise
    }
    // centered component
    const Eigen::VectorXd values = model.component_values(0, x.col(0));
    CHECK(std::abs(values.mean()) < 1e-8);
}

TEST_CASE("two additive cubic components are recovered up to constants") {
    rng::Engine eng(313);
    const int n = 400;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    const auto f1 = [](double v) { return v * v * v - 0.6 * v; };
    const auto f2 = [](double v) { return 2.0 * v * v - v * v * v; };
    for (int i = 0; i < n; ++i) {
        x(i, 0) = eng.uniform();
        x(i, 1) = eng.uniform();
        y[i] = f1(x(i, 0)) + f2(x(i, 1));  // noiseless
    }
    AdditiveOptions options;
    options.knot_cap = 30;
    const AdditiveModel model = fit_additive(x, y, options);
    CHECK(model.converged);

    for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd fitted = model.component_values(j, x.col(j));
        Eigen::VectorXd truth(n);
        for (int i = 0; i < n; ++i) truth[i] = j == 0 ? f1(x(i, j)) : f2(x(i, j));
        truth.array() -= truth.mean();  // recentered truth
        CHECK((fitted - truth).cwiseAbs().maxCoeff() < 1e-3);
    }
    // prediction error on the training design
    CHECK((model.predict(x) - y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("constant response gives the constant intercept and null components") {
    Eigen::MatrixXd x(30, 2);
    rng::Engine eng(7);
    for (int i = 0; i < 30; ++i) {
        x(i, 0) = eng.uniform();
        x(i, 1) = eng.uniform();
    }
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(30, 4.25);
    const AdditiveModel model = fit_additive(x, y, {});
    CHECK(model.intercept == doctest::Approx(4.25).epsilon(1e-12));
    for (int j = 0; j < 2; ++j)
        CHECK(model.component_values(j, x.col(j)).cwiseAbs().maxCoeff() < 1e-8);
    Eigen::RowVectorXd pt(2);
    pt << 0.31, 0.62;
    CHECK(model.predict(pt) == doctest::Approx(4.25).epsilon(1e-10));
}

TEST_CASE("preconditions and the non-convergence flag") {
    Eigen::MatrixXd x(6, 2);
    x.setRandom();
    CHECK_THROWS_AS(fit_additive(x, Eigen::VectorXd::Zero(6), {}), data_error);  // n < 4p

    // perfectly collinear columns and a single cycle: flagged, not fatal
    rng::Engine eng(2);
    const int n = 60;
    Eigen::MatrixXd xx(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        xx(i, 0) = eng.uniform();
        xx(i, 1) = xx(i, 0);
        y[i] = std::sin(6.0 * xx(i, 0)) + 0.1 * eng.gaussian();
    }
    AdditiveOptions options;
    options.knot_cap = 20;
    options.max_cycles = 1;
    options.lambda_grid = {1e-4};
    const AdditiveModel model = fit_additive(xx, y, options);
    CHECK_FALSE(model.converged);
    CHECK(model.cycles == 1);
}

TEST_CASE("undersmooth factor multiplies the selected lambda") {
    rng::Engine eng(40);
    const int n = 120;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = eng.uniform();
        y[i] = std::sin(6.283185307179586 * x(i, 0)) + 0.2 * eng.gaussian();
    }
    AdditiveOptions plain;
    plain.knot_cap = 40;
    AdditiveOptions under = plain;
    under.undersmooth = 0.5;
    const AdditiveModel a = fit_additive(x, y, plain);
    const AdditiveModel b = fit_additive(x, y, under);
    CHECK(b.lambda == doctest::Approx(0.5 * a.lambda).epsilon(1e-15));
    CHECK(b.total_edf >= a.total_edf);  // smaller lambda cannot smooth more

    AdditiveOptions bad = plain;
    bad.undersmooth = 1.5;
    CHECK_THROWS_AS(fit_additive(x, y, bad), config_error);
}

TEST_CASE("model file round trip predicts identically") {
    rng::Engine eng(99);
    const int n = 150;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = eng.uniform();
        x(i, 1) = eng.uniform();
        y[i] = x(i, 0) * x(i, 0) + std::sin(3.0 * x(i, 1)) + 0.05 * eng.gaussian();
    }
    AdditiveOptions options;
    options.knot_cap = 25;
    const AdditiveModel model = fit_additive(x, y, options);
    const AdditiveModel loaded = additive_from_json(additive_to_json(model));
    CHECK(loaded.lambda == model.lambda);
    CHECK(loaded.total_edf == model.total_edf);
    for (int i = 0; i < 20; ++i) {
        Eigen::RowVectorXd pt(2);
        pt << eng.uniform() * 1.2 - 0.1, eng.uniform();
        CHECK(loaded.predict(pt) == model.predict(pt));
    }
}
