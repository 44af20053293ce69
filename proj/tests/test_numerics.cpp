#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "icepath/errors.hpp"
#include "icepath/numerics.hpp"
#include "oracles.hpp"

using namespace icepath;
using namespace icepath::stats;

namespace {

struct Problem {
    std::vector<std::vector<double>> rows; // with intercept
    std::vector<std::vector<double>> cols; // without intercept
    std::vector<double> y;
};

Problem linear_problem(std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    Problem p;
    p.cols.assign(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = z(gen), b = z(gen), c = (gen() % 2) ? 1.0 : 0.0;
        p.cols[0][i] = a;
        p.cols[1][i] = b;
        p.cols[2][i] = c;
        p.rows.push_back({1.0, a, b, c});
        p.y.push_back(0.3 + 1.5 * a - 0.7 * b + 2.0 * c + z(gen));
    }
    return p;
}

Problem logistic_problem(std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0, 1);
    Problem p;
    p.cols.assign(2, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = z(gen), b = z(gen);
        p.cols[0][i] = a;
        p.cols[1][i] = b;
        p.rows.push_back({1.0, a, b});
        const double pr = 1.0 / (1.0 + std::exp(-(-0.5 + 0.8 * a - 0.4 * b)));
        p.y.push_back(u(gen) < pr ? 1.0 : 0.0);
    }
    return p;
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

} // namespace

TEST(Ols, MatchesNormalEquations) {
    const Problem p = linear_problem(500, 1);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b", "c"}, p.cols);
    const LinearFit fit = ols_fit(x, p.y);
    const auto ref = oracle::normal_equations(p.rows, p.y, std::vector<double>(p.y.size(), 1.0));
    for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_LT(rel_err(fit.coefficients(j), ref[j]), 1e-10);
    EXPECT_EQ(fit.names.front(), "(Intercept)");
    EXPECT_EQ(fit.dof, 496);
    EXPECT_NEAR(fit.coefficient("a"), 1.5, 0.2);
}

TEST(Wls, MatchesNormalEquations) {
    const Problem p = linear_problem(400, 2);
    std::vector<double> w;
    std::mt19937 gen(3);
    for (std::size_t i = 0; i < p.y.size(); ++i) w.push_back(0.1 + (gen() % 1000) / 100.0);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b", "c"}, p.cols);
    const LinearFit fit = wls_fit(x, p.y, w);
    const auto ref = oracle::normal_equations(p.rows, p.y, w);
    for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_LT(rel_err(fit.coefficients(j), ref[j]), 1e-10);
}

TEST(Wls, UnitWeightsEqualOlsExactly) {
    const Problem p = linear_problem(300, 4);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b", "c"}, p.cols);
    const LinearFit a = ols_fit(x, p.y);
    const LinearFit b = wls_fit(x, p.y, std::vector<double>(p.y.size(), 1.0));
    for (Eigen::Index j = 0; j < a.coefficients.size(); ++j) EXPECT_EQ(a.coefficients(j), b.coefficients(j));
    EXPECT_EQ(a.residual_variance, b.residual_variance);
}

TEST(Wls, CovarianceIsScaledInverse) {
    const Problem p = linear_problem(200, 5);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b", "c"}, p.cols);
    const LinearFit fit = ols_fit(x, p.y);
    const Matrix xtx = x.values().transpose() * x.values();
    const Matrix expected = fit.residual_variance * xtx.inverse();
    EXPECT_LT((fit.covariance - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(fit.variance("b"), expected(2, 2), 1e-14);
}

TEST(Wls, InputErrors) {
    const Problem p = linear_problem(20, 6);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b", "c"}, p.cols);
    std::vector<double> w(p.y.size(), 1.0);
    w[3] = -1;
    EXPECT_THROW(wls_fit(x, p.y, w), ValidationError);
    EXPECT_THROW(ols_fit(x, std::vector<double>(5, 0.0)), ValidationError);
}

TEST(Wls, SingularDesign) {
    std::vector<std::vector<double>> cols(2, std::vector<double>(10));
    for (int i = 0; i < 10; ++i) {
        cols[0][i] = i;
        cols[1][i] = 2.0 * i;
    }
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b"}, cols);
    std::vector<double> y(10, 1.0);
    EXPECT_THROW(ols_fit(x, y), SingularDesignError);
}

TEST(Logistic, ScoreMatchesFiniteDifferences) {
    const Problem p = logistic_problem(300, 7);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b"}, p.cols);
    for (const std::vector<double>& b : {std::vector<double>{0, 0, 0}, {0.3, -0.2, 0.5}, {-1, 1, -0.5}}) {
        const Vector beta = Eigen::Map<const Vector>(b.data(), 3);
        const Vector score = logistic_score(x.values(), p.y, beta);
        EXPECT_NEAR(logistic_log_likelihood(x.values(), p.y, beta), oracle::logistic_loglik(p.rows, p.y, b), 1e-9);
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-5;
            std::vector<double> up = b, dn = b;
            up[j] += h;
            dn[j] -= h;
            const double fd = (oracle::logistic_loglik(p.rows, p.y, up) - oracle::logistic_loglik(p.rows, p.y, dn)) /
                              (2 * h);
            EXPECT_LT(std::fabs(score(j) - fd) / std::max(1.0, std::fabs(fd)), 1e-4) << j;
        }
    }
}

TEST(Logistic, IrlsIsMonotoneAndConverges) {
    const Problem p = logistic_problem(1000, 8);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b"}, p.cols);
    const LogisticFit fit = logistic_fit(x, p.y);
    EXPECT_TRUE(fit.converged);
    EXPECT_LE(fit.gradient_norm, 1e-4);
    ASSERT_GE(fit.trace.size(), 2u);
    for (std::size_t k = 1; k < fit.trace.size(); ++k) EXPECT_GE(fit.trace[k], fit.trace[k - 1]);
    EXPECT_NEAR(fit.coefficients(1), 0.8, 0.3);
    const Vector score = logistic_score(x.values(), p.y, fit.coefficients);
    EXPECT_LT(score.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Logistic, SeparationIsReported) {
    std::vector<std::vector<double>> cols(1, std::vector<double>(20));
    std::vector<double> y(20);
    for (int i = 0; i < 20; ++i) {
        cols[0][i] = i;
        y[i] = i >= 10 ? 1.0 : 0.0;
    }
    const DesignMatrix x = DesignMatrix::with_intercept({"a"}, cols);
    EXPECT_THROW(logistic_fit(x, y), NumericalError);
}

TEST(Logistic, RejectsNonBinaryOutcome) {
    std::vector<std::vector<double>> cols(1, std::vector<double>{0, 1, 2, 3});
    const DesignMatrix x = DesignMatrix::with_intercept({"a"}, cols);
    EXPECT_THROW(logistic_fit(x, std::vector<double>{0, 1, 0.5, 1}), ValidationError);
}

TEST(PosteriorDraw, LinearDrawsCenterOnFit) {
    const Problem p = linear_problem(300, 9);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b", "c"}, p.cols);
    const LinearFit fit = ols_fit(x, p.y);
    Vector mean = Vector::Zero(4);
    double s2 = 0;
    const int draws = 4000;
    for (int k = 0; k < draws; ++k) {
        Stream rng(derive_seed(1, {static_cast<std::uint64_t>(k)}));
        const LinearDraw d = posterior_draw(fit, rng);
        mean += d.coefficients;
        s2 += d.residual_variance;
    }
    mean /= draws;
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(mean(j), fit.coefficients(j), 4 * std::sqrt(fit.covariance(j, j) / draws));
    EXPECT_NEAR(s2 / draws, fit.residual_variance, 0.05 * fit.residual_variance);
}

TEST(PosteriorDraw, Deterministic) {
    const Problem p = logistic_problem(300, 10);
    const DesignMatrix x = DesignMatrix::with_intercept({"a", "b"}, p.cols);
    const LogisticFit fit = logistic_fit(x, p.y);
    Stream a(42), b(42);
    EXPECT_EQ(posterior_draw(fit, a), posterior_draw(fit, b));
}

TEST(Rubin, HandCase) {
    const std::vector<double> est{1.0, 2.0}, var{0.5, 0.5};
    const PooledEstimate r = rubins_pool(est, var);
    EXPECT_EQ(r.point, 1.5);
    EXPECT_EQ(r.within_var, 0.5);
    EXPECT_EQ(r.between_var, 0.5);
    EXPECT_EQ(r.total_var, 1.25);
}

TEST(Rubin, PermutationInvariantAndConstant) {
    std::vector<double> est{0.3, 0.1, 0.7, 0.2, 0.9}, var{0.01, 0.02, 0.03, 0.04, 0.05};
    const PooledEstimate a = rubins_pool(est, var);
    std::reverse(est.begin(), est.end());
    std::rotate(var.begin(), var.begin() + 2, var.end());
    const PooledEstimate b = rubins_pool(est, var);
    EXPECT_EQ(a.point, b.point);
    EXPECT_EQ(a.total_var, b.total_var);
    const std::vector<double> same(7, 0.123456789), v(7, 0.01);
    const PooledEstimate c = rubins_pool(same, v);
    EXPECT_EQ(c.point, 0.123456789);
    EXPECT_EQ(c.between_var, 0.0);
    EXPECT_EQ(c.total_var, c.within_var);
}

TEST(Rubin, Errors) {
    EXPECT_THROW(rubins_pool(std::vector<double>{1.0}, std::vector<double>{1.0}), ValidationError);
    EXPECT_THROW(rubins_pool(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}), ValidationError);
    EXPECT_THROW(rubins_pool(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, -1.0}), ValidationError);
}
