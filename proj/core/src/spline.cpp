#include "calib/spline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace calib {

namespace {

constexpr int kOrder = 4;  // cubic

// Nonzero B-spline basis values (deriv = 0) or derivatives (1, 2) at u.
// Standard Cox-de Boor triangle with the derivative weight recurrence.
void ders_basis(const Eigen::VectorXd& knots, double u, int deriv, int* span_first,
                double out[kOrder]) {
    const int nk = static_cast<int>(knots.size());
    const double lo = knots[kOrder - 1], hi = knots[nk - kOrder];
    if (u < lo) u = lo;
    if (u > hi) u = hi;
    int i;  // knot span: knots[i] <= u < knots[i+1]
    if (u >= hi) {
        i = nk - kOrder - 1;
        while (i > kOrder - 1 && knots[i] == knots[i + 1]) --i;
    } else {
        i = static_cast<int>(std::upper_bound(knots.data() + kOrder - 1,
                                              knots.data() + nk - kOrder, u) -
                             knots.data()) - 1;
    }
    *span_first = i - kOrder + 1;

    double left[kOrder], right[kOrder];
    double ndu[kOrder][kOrder];
    ndu[0][0] = 1.0;
    for (int j = 1; j < kOrder; ++j) {
        left[j] = u - knots[i + 1 - j];
        right[j] = knots[i + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    if (deriv == 0) {
        for (int j = 0; j < kOrder; ++j) out[j] = ndu[j][kOrder - 1];
        return;
    }
    double ders[3][kOrder] = {};
    for (int j = 0; j < kOrder; ++j) ders[0][j] = ndu[j][kOrder - 1];
    for (int r = 0; r < kOrder; ++r) {
        int s1 = 0, s2 = 1;
        double a[2][kOrder];
        a[0][0] = 1.0;
        for (int k = 1; k <= deriv; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = kOrder - 1 - k;
            if (r >= k) {
                const double den = ndu[pk + 1][rk];
                a[s2][0] = den == 0.0 ? 0.0 : a[s1][0] / den;
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = r - 1 <= pk ? k - 1 : kOrder - 1 - r;
            for (int j = j1; j <= j2; ++j) {
                const double den = ndu[pk + 1][rk + j];
                a[s2][j] = den == 0.0 ? 0.0 : (a[s1][j] - a[s1][j - 1]) / den;
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                const double den = ndu[pk + 1][r];
                a[s2][k] = den == 0.0 ? 0.0 : -a[s1][k - 1] / den;
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    double factor = kOrder - 1;
    for (int k = 2; k <= deriv; ++k) factor *= kOrder - k;
    for (int j = 0; j < kOrder; ++j) out[j] = ders[deriv][j] * factor;
}

Eigen::VectorXd thin_sites(const Eigen::VectorXd& x, int knot_cap) {
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    const int u = static_cast<int>(sorted.size());
    if (u < 4) throw data_error("spline basis needs at least 4 distinct input values, got " +
                                std::to_string(u));
    if (u <= knot_cap)
        return Eigen::Map<const Eigen::VectorXd>(sorted.data(), u);
    // even-quantile thinning, endpoints always kept
    Eigen::VectorXd sites(knot_cap);
    for (int i = 0; i < knot_cap; ++i) {
        const int idx = static_cast<int>(
            std::llround(static_cast<double>(i) * (u - 1) / (knot_cap - 1)));
        sites[i] = sorted[idx];
    }
    return sites;
}

}  // namespace

void SplineBasis::evaluate(double u, int deriv, int* first_out, double out[4]) const {
    ders_basis(knots, u, deriv, first_out, out);
}

std::shared_ptr<const SplineBasis> build_spline_basis(const Eigen::VectorXd& x,
                                                      int knot_cap) {
    if (x.size() < 4) throw data_error("spline basis needs at least 4 observations");
    if (knot_cap < 4) throw data_error("knot cap must be at least 4");
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw data_error("non-finite input at row " + std::to_string(i));

    auto basis = std::make_shared<SplineBasis>();
    basis->sites = thin_sites(x, knot_cap);
    const int q = static_cast<int>(basis->sites.size());
    const int K = q + 2;
    basis->num_basis = K;

    basis->knots.resize(q + 2 * (kOrder - 1));
    for (int i = 0; i < kOrder - 1; ++i) {
        basis->knots[i] = basis->sites[0];
        basis->knots[q + kOrder - 1 + i] = basis->sites[q - 1];
    }
    basis->knots.segment(kOrder - 1, q) = basis->sites;

    // sparse design rows
    const Eigen::Index n = x.size();
    basis->x = x;
    basis->first.resize(n);
    basis->weights.resize(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        int f;
        double w[4];
        basis->evaluate(x[i], 0, &f, w);
        basis->first[i] = f;
        for (int j = 0; j < 4; ++j) basis->weights(i, j) = w[j];
    }

    // Omega by 2-point Gauss-Legendre per knot interval: second derivatives
    // are piecewise linear, so the products are quadratic and the rule is
    // exact.
    basis->penalty = Eigen::MatrixXd::Zero(K, K);
    const double gp = 1.0 / std::sqrt(3.0);
    for (int s = 0; s < q - 1; ++s) {
        const double a = basis->sites[s], b = basis->sites[s + 1];
        const double h = b - a;
        if (h <= 0.0) continue;
        for (int g = 0; g < 2; ++g) {
            const double u = 0.5 * (a + b) + 0.5 * h * (g == 0 ? -gp : gp);
            int f;
            double d2[4];
            basis->evaluate(u, 2, &f, d2);
            const double w = 0.5 * h;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c)
                    basis->penalty(f + r, f + c) += w * d2[r] * d2[c];
        }
    }

    // Rotation [Q1 Z]: Q1 spans the coefficient vectors of the constant and
    // linear functions (ones and Greville abscissae). Zeroing the null-space
    // rows/cols of the rotated penalty removes quadrature roundoff that
    // lambda^2 would otherwise amplify.
    Eigen::MatrixXd line_coeffs(K, 2);
    for (int i = 0; i < K; ++i) {
        line_coeffs(i, 0) = 1.0;
        line_coeffs(i, 1) =
            (basis->knots[i + 1] + basis->knots[i + 2] + basis->knots[i + 3]) / 3.0;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(line_coeffs);
    basis->rotation = qr.householderQ() * Eigen::MatrixXd::Identity(K, K);

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int f = basis->first[i];
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                gram(f + r, f + c) += basis->weights(i, r) * basis->weights(i, c);
    }
    gram /= static_cast<double>(n);
    basis->gram_rot = basis->rotation.transpose() * gram * basis->rotation;

    Eigen::MatrixXd pen_rot = basis->rotation.transpose() * basis->penalty * basis->rotation;
    pen_rot.topRows(2).setZero();
    pen_rot.leftCols(2).setZero();
    basis->penalty_rot = 0.5 * (pen_rot + pen_rot.transpose());
    return basis;
}

PenalizedSolver::PenalizedSolver(std::shared_ptr<const SplineBasis> basis, double lambda)
    : basis_(std::move(basis)), lambda_(lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw data_error("smoothing parameter must be finite and >= 0");
    const int K = basis_->num_basis;
    Eigen::MatrixXd m = basis_->gram_rot + (lambda * lambda) * basis_->penalty_rot;
    llt_.compute(m);
    if (llt_.info() != Eigen::Success) {
        m.diagonal().array() += 1e-10;  // ridge jitter
        llt_.compute(m);
        if (llt_.info() != Eigen::Success)
            throw numeric_error("penalized spline system singular even after 1e-10 jitter");
    }
    edf_ = llt_.solve(basis_->gram_rot).trace();
    edf_ = std::min(edf_, static_cast<double>(std::min<Eigen::Index>(K, basis_->n())));
}

PenalizedFit PenalizedSolver::fit(const Eigen::VectorXd& y) const {
    const Eigen::Index n = basis_->n();
    if (y.size() != n)
        throw data_error("fit_penalized: y length does not match basis rows");
    const int K = basis_->num_basis;

    Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int f = basis_->first[i];
        for (int j = 0; j < 4; ++j) b[f + j] += basis_->weights(i, j) * y[i];
    }
    b /= static_cast<double>(n);

    const Eigen::VectorXd w = llt_.solve(basis_->rotation.transpose() * b);
    PenalizedFit out;
    out.basis = basis_;
    out.coefficients = basis_->rotation * w;
    out.lambda = lambda_;
    out.edf = edf_;
    out.fitted.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int f = basis_->first[i];
        double v = 0.0;
        for (int j = 0; j < 4; ++j) v += basis_->weights(i, j) * out.coefficients[f + j];
        out.fitted[i] = v;
    }
    out.residuals = y - out.fitted;
    out.rss = out.residuals.squaredNorm();
    return out;
}

PenalizedFit fit_penalized(std::shared_ptr<const SplineBasis> basis,
                           const Eigen::VectorXd& y, double lambda) {
    return PenalizedSolver(std::move(basis), lambda).fit(y);
}

double PenalizedFit::penalty_value() const {
    return coefficients.dot(basis->penalty * coefficients);
}

double gcv_score(const PenalizedFit& fit) {
    const double n = static_cast<double>(fit.basis->n());
    if (fit.edf >= n) return std::numeric_limits<double>::infinity();
    const double denom = 1.0 - fit.edf / n;
    return (fit.rss / n) / (denom * denom);
}

LambdaSelection select_lambda(const std::shared_ptr<const SplineBasis>& basis,
                              const Eigen::VectorXd& y,
                              const std::vector<double>& grid) {
    if (grid.empty()) throw data_error("select_lambda: empty grid");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw data_error("select_lambda: grid must be ascending");
    LambdaSelection sel;
    sel.scores.reserve(grid.size());
    double best = std::numeric_limits<double>::infinity();
    sel.lambda = grid.front();
    for (const double lambda : grid) {
        const double score = gcv_score(fit_penalized(basis, y, lambda));
        sel.scores.push_back(score);
        if (score <= best) {  // ties break toward the larger lambda
            best = score;
            sel.lambda = lambda;
        }
    }
    return sel;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid(41);
    for (int k = 0; k <= 40; ++k) grid[k] = std::pow(10.0, -8.0 + 10.0 * k / 40.0);
    return grid;
}

namespace {

double eval_at(const PenalizedFit& fit, double u, int deriv) {
    int f;
    double w[4];
    fit.basis->evaluate(u, deriv, &f, w);
    double v = 0.0;
    for (int j = 0; j < 4; ++j) v += w[j] * fit.coefficients[f + j];
    return v;
}

}  // namespace

double spline_predict(const PenalizedFit& fit, double x) {
    const double lo = fit.basis->lo(), hi = fit.basis->hi();
    if (x < lo) return eval_at(fit, lo, 0) + eval_at(fit, lo, 1) * (x - lo);
    if (x > hi) return eval_at(fit, hi, 0) + eval_at(fit, hi, 1) * (x - hi);
    return eval_at(fit, x, 0);
}

Eigen::VectorXd spline_predict(const PenalizedFit& fit, const Eigen::VectorXd& x_new) {
    Eigen::VectorXd out(x_new.size());
    for (Eigen::Index i = 0; i < x_new.size(); ++i) out[i] = spline_predict(fit, x_new[i]);
    return out;
}

}  // namespace calib
