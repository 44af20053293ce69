#include "icepath/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "icepath/datagen.hpp"
#include "icepath/errors.hpp"

namespace icepath::stats {

DesignMatrix::DesignMatrix(std::vector<std::string> names, Matrix values)
    : names_(std::move(names)), values_(std::move(values)) {
    if (static_cast<Eigen::Index>(names_.size()) != values_.cols()) {
        throw ValidationError("design matrix has " + std::to_string(values_.cols()) + " columns but " +
                              std::to_string(names_.size()) + " names");
    }
    if (!values_.allFinite()) throw ValidationError("design matrix contains non-finite entries");
}

DesignMatrix DesignMatrix::with_intercept(std::vector<std::string> names,
                                          const std::vector<std::vector<double>>& columns) {
    if (names.size() != columns.size()) throw ValidationError("column names and columns differ in length");
    const Eigen::Index n = columns.empty() ? 0 : static_cast<Eigen::Index>(columns.front().size());
    Matrix x(n, static_cast<Eigen::Index>(columns.size()) + 1);
    x.col(0).setOnes();
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (static_cast<Eigen::Index>(columns[j].size()) != n) throw ValidationError("design columns differ in length");
        x.col(static_cast<Eigen::Index>(j) + 1) = Eigen::Map<const Vector>(columns[j].data(), n);
    }
    names.insert(names.begin(), "(Intercept)");
    return DesignMatrix(std::move(names), std::move(x));
}

Eigen::Index DesignMatrix::column(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ValidationError("no design column named '" + std::string(name) + "'");
    return it - names_.begin();
}

namespace {

Eigen::Index find_name(const std::vector<std::string>& names, std::string_view name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ValidationError("no coefficient named '" + std::string(name) + "'");
    return it - names.begin();
}

/// Pivoted QR of a (weighted) design; throws if rank-deficient or too
/// ill-conditioned. Returns (X'WX)^{-1}.
Matrix checked_inverse_gram(const Eigen::ColPivHouseholderQR<Matrix>& qr, const std::vector<std::string>& names) {
    const Eigen::Index p = qr.cols();
    const Matrix r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const double largest = std::abs(r(0, 0));
    const double smallest = std::abs(r(p - 1, p - 1));
    if (qr.rank() < p || smallest == 0.0 || largest / smallest > kSingularCondition) {
        // the last pivoted column is the one that is (nearly) collinear
        const Eigen::Index culprit = qr.colsPermutation().indices()(p - 1);
        throw SingularDesignError("singular design: column '" + names[static_cast<std::size_t>(culprit)] +
                                  "' is (nearly) collinear with the others");
    }
    const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
    const Matrix inner = r_inv * r_inv.transpose();
    const auto& perm = qr.colsPermutation();
    return perm * inner * perm.transpose();
}

Vector symmetric_sqrt_draw(const Matrix& cov, Stream& rng) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    Vector z(cov.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * z;
}

Vector standard_normals(Eigen::Index n, Stream& rng) {
    Vector e(n);
    for (Eigen::Index i = 0; i < n; ++i) e(i) = rng.normal();
    return e;
}

} // namespace

double LinearFit::coefficient(std::string_view name) const { return coefficients(find_name(names, name)); }

double LinearFit::variance(std::string_view name) const {
    const Eigen::Index i = find_name(names, name);
    return covariance(i, i);
}

Vector LogisticFit::predict(const Matrix& x) const {
    Vector eta = x * coefficients;
    return eta.unaryExpr([](double v) { return sim::expit(v); });
}

LinearFit wls_fit(const DesignMatrix& x, std::span<const double> y, std::span<const double> w) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (static_cast<Eigen::Index>(y.size()) != n || static_cast<Eigen::Index>(w.size()) != n) {
        throw ValidationError("outcome/weights length does not match the design");
    }
    if (n <= p) {
        throw ValidationError("regression needs more rows than columns (" + std::to_string(n) + " <= " +
                              std::to_string(p) + ")");
    }
    Vector sw(n), ys(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(w[i] > 0.0) || !std::isfinite(w[i])) throw ValidationError("weights must be positive and finite");
        if (!std::isfinite(y[i])) throw ValidationError("outcome contains non-finite values");
        sw(i) = std::sqrt(w[i]);
        ys(i) = sw(i) * y[i];
    }
    const Matrix xs = sw.asDiagonal() * x.values();
    const Eigen::ColPivHouseholderQR<Matrix> qr(xs);
    const Matrix gram_inv = checked_inverse_gram(qr, x.names());

    LinearFit fit;
    fit.names = x.names();
    fit.coefficients = qr.solve(ys);
    fit.dof = static_cast<long>(n - p);
    fit.residual_variance = (ys - xs * fit.coefficients).squaredNorm() / static_cast<double>(fit.dof);
    fit.covariance = fit.residual_variance * gram_inv;
    fit.noise_map = gram_inv * xs.transpose();
    return fit;
}

LinearFit ols_fit(const DesignMatrix& x, std::span<const double> y) {
    const std::vector<double> ones(static_cast<std::size_t>(x.rows()), 1.0);
    return wls_fit(x, y, ones);
}

double logistic_log_likelihood(const Matrix& x, std::span<const double> y, const Vector& beta) {
    const Vector eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta(i);
        // log(1 + exp(e)), stable for both signs
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y[static_cast<std::size_t>(i)] * e - softplus;
    }
    return ll;
}

Vector logistic_score(const Matrix& x, std::span<const double> y, const Vector& beta) {
    const Vector eta = x * beta;
    Vector resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) resid(i) = y[static_cast<std::size_t>(i)] - sim::expit(eta(i));
    return x.transpose() * resid;
}

LogisticFit logistic_fit(const DesignMatrix& x, std::span<const double> y, const LogisticOptions& opts) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (static_cast<Eigen::Index>(y.size()) != n) throw ValidationError("outcome length does not match the design");
    if (n < p) throw ValidationError("logistic regression needs at least as many rows as columns");
    for (double v : y) {
        if (v != 0.0 && v != 1.0) throw ValidationError("logistic outcome must be 0/1");
    }
    const Matrix& X = x.values();
    // rank check on the unweighted design
    checked_inverse_gram(Eigen::ColPivHouseholderQR<Matrix>(X), x.names());

    LogisticFit fit;
    fit.names = x.names();
    Vector beta = Vector::Zero(p);
    double ll = logistic_log_likelihood(X, y, beta);
    fit.trace.push_back(ll);

    auto separation_check = [&](const Vector& b) {
        Eigen::Index worst = 0;
        const double biggest = b.cwiseAbs().maxCoeff(&worst);
        if (biggest > opts.separation_bound) {
            throw ConvergenceError("logistic regression did not converge: (quasi-)separation along '" +
                                   fit.names[static_cast<std::size_t>(worst)] + "' (|coefficient| = " +
                                   std::to_string(biggest) + ")");
        }
    };

    Vector score = logistic_score(X, y, beta);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (score.cwiseAbs().maxCoeff() <= opts.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        const Vector prob = (X * beta).unaryExpr([](double v) { return sim::expit(v); });
        const Vector wdiag = prob.cwiseProduct(Vector::Ones(n) - prob);
        const Matrix hessian = X.transpose() * wdiag.asDiagonal() * X;
        const Vector step = hessian.colPivHouseholderQr().solve(score);
        if (!step.allFinite()) break;

        // step-halving keeps the likelihood non-decreasing
        double t = 1.0;
        Vector candidate = beta + step;
        double cand_ll = logistic_log_likelihood(X, y, candidate);
        for (int h = 0; h < 40 && !(cand_ll >= ll); ++h) {
            t *= 0.5;
            candidate = beta + t * step;
            cand_ll = logistic_log_likelihood(X, y, candidate);
        }
        if (!(cand_ll >= ll)) break;
        const double change = std::abs(cand_ll - ll);
        beta = candidate;
        ll = cand_ll;
        fit.trace.push_back(ll);
        fit.iterations = iter + 1;
        score = logistic_score(X, y, beta);
        if (change <= opts.relative_tolerance * std::abs(ll)) {
            fit.converged = true;
            break;
        }
    }
    separation_check(beta);
    if (!fit.converged && score.cwiseAbs().maxCoeff() <= opts.gradient_tolerance) fit.converged = true;
    if (!fit.converged) {
        throw ConvergenceError("logistic regression did not converge in " + std::to_string(opts.max_iterations) +
                               " iterations (max |score| = " + std::to_string(score.cwiseAbs().maxCoeff()) + ")");
    }

    const Vector prob = (X * beta).unaryExpr([](double v) { return sim::expit(v); });
    const Vector sw = prob.cwiseProduct(Vector::Ones(n) - prob).cwiseSqrt();
    const Matrix xs = sw.asDiagonal() * X;
    const Matrix gram_inv = checked_inverse_gram(Eigen::ColPivHouseholderQR<Matrix>(xs), x.names());
    fit.coefficients = beta;
    fit.covariance = gram_inv;
    fit.noise_map = gram_inv * xs.transpose();
    fit.gradient_norm = score.cwiseAbs().maxCoeff();
    fit.log_likelihood = ll;
    return fit;
}

LinearDraw posterior_draw(const LinearFit& fit, Stream& rng) {
    LinearDraw out;
    if (fit.dof <= 0) throw ValidationError("posterior draw needs positive residual degrees of freedom");
    std::chi_squared_distribution<double> chi2(static_cast<double>(fit.dof));
    const double scale = chi2(rng);
    out.residual_variance = static_cast<double>(fit.dof) * fit.residual_variance / scale;
    if (fit.residual_variance == 0.0) {
        out.coefficients = fit.coefficients;
        return out;
    }
    if (fit.noise_map.size() > 0) {
        out.coefficients =
            fit.coefficients + std::sqrt(out.residual_variance) * (fit.noise_map * standard_normals(fit.noise_map.cols(), rng));
    } else {
        out.coefficients = fit.coefficients +
                           symmetric_sqrt_draw(fit.covariance * (out.residual_variance / fit.residual_variance), rng);
    }
    return out;
}

Vector posterior_draw(const LogisticFit& fit, Stream& rng) {
    if (fit.noise_map.size() > 0) {
        return fit.coefficients + fit.noise_map * standard_normals(fit.noise_map.cols(), rng);
    }
    return fit.coefficients + symmetric_sqrt_draw(fit.covariance, rng);
}

PooledEstimate rubins_pool(std::span<const double> estimates, std::span<const double> variances) {
    if (estimates.size() != variances.size()) throw ValidationError("estimates and variances differ in length");
    const std::size_t m = estimates.size();
    if (m < 2) throw ValidationError("Rubin's rules need at least 2 imputations");
    // summing in sorted order makes the result exactly permutation-invariant
    std::vector<double> est(estimates.begin(), estimates.end());
    std::vector<double> var(variances.begin(), variances.end());
    std::sort(est.begin(), est.end());
    std::sort(var.begin(), var.end());
    PooledEstimate out;
    out.m = m;
    // shifted means: identical inputs pool back to exactly that value
    double shift_e = 0, shift_v = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!(var[i] >= 0.0)) throw ValidationError("imputation variances must be nonnegative");
        shift_e += est[i] - est[0];
        shift_v += var[i] - var[0];
    }
    out.point = est[0] + shift_e / static_cast<double>(m);
    out.within_var = var[0] + shift_v / static_cast<double>(m);
    for (double e : est) out.between_var += (e - out.point) * (e - out.point);
    out.between_var /= static_cast<double>(m - 1);
    out.total_var = out.within_var + (1.0 + 1.0 / static_cast<double>(m)) * out.between_var;
    return out;
}

} // namespace icepath::stats
