#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "icepath/rng.hpp"

namespace icepath::stats {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Named design matrix. Column 0 is the intercept when built with
/// `with_intercept`.
class DesignMatrix {
public:
    DesignMatrix() = default;
    DesignMatrix(std::vector<std::string> names, Matrix values);

    /// Prepends an intercept column named "(Intercept)".
    static DesignMatrix with_intercept(std::vector<std::string> names, const std::vector<std::vector<double>>& columns);

    const Matrix& values() const { return values_; }
    const std::vector<std::string>& names() const { return names_; }
    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    Eigen::Index column(std::string_view name) const;

private:
    std::vector<std::string> names_;
    Matrix values_;
};

struct LinearFit {
    std::vector<std::string> names;
    Vector coefficients;
    double residual_variance = 0;
    /// residual_variance * (X'WX)^{-1}
    Matrix covariance;
    /// (X'WX)^{-1} X' W^{1/2}: maps a vector of standard normals to a draw
    /// with covariance (X'WX)^{-1}. Kept so posterior draws transform with
    /// the design (a reparameterised design gives the same fitted draws).
    Matrix noise_map;
    long dof = 0;

    double coefficient(std::string_view name) const;
    double variance(std::string_view name) const;
};

struct LogisticFit {
    std::vector<std::string> names;
    Vector coefficients;
    /// (X'WX)^{-1} at the optimum
    Matrix covariance;
    /// (X'WX)^{-1} X' W^{1/2} at the optimum
    Matrix noise_map;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0;
    double log_likelihood = 0;
    /// log-likelihood after each accepted Newton step, starting at beta = 0
    std::vector<double> trace;

    Vector predict(const Matrix& x) const;
};

struct LogisticOptions {
    double gradient_tolerance = 1e-8;
    double relative_tolerance = 1e-12;
    int max_iterations = 100;
    /// |coefficient| above this at a convergence failure is reported as separation
    double separation_bound = 50.0;
};

/// Condition-number estimate above which a design is treated as singular.
inline constexpr double kSingularCondition = 1e12;

LinearFit ols_fit(const DesignMatrix& x, std::span<const double> y);
LinearFit wls_fit(const DesignMatrix& x, std::span<const double> y, std::span<const double> w);
LogisticFit logistic_fit(const DesignMatrix& x, std::span<const double> y, const LogisticOptions& opts = {});

double logistic_log_likelihood(const Matrix& x, std::span<const double> y, const Vector& beta);
Vector logistic_score(const Matrix& x, std::span<const double> y, const Vector& beta);

struct LinearDraw {
    Vector coefficients;
    double residual_variance = 0;
};

/// sigma^2 ~ dof * s^2 / chi^2_dof, then beta ~ N(beta_hat, sigma^2 (X'WX)^{-1}).
LinearDraw posterior_draw(const LinearFit& fit, Stream& rng);
/// beta ~ N(beta_hat, (X'WX)^{-1}) (asymptotic normal approximation).
Vector posterior_draw(const LogisticFit& fit, Stream& rng);

struct PooledEstimate {
    double point = 0;
    double within_var = 0;
    double between_var = 0;
    double total_var = 0;
    std::size_t m = 0;
};

PooledEstimate rubins_pool(std::span<const double> estimates, std::span<const double> variances);

} // namespace icepath::stats
