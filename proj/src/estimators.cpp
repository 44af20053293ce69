#include "icepath/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "icepath/errors.hpp"
#include "icepath/graph.hpp"
#include "icepath/numerics.hpp"

namespace icepath::est {

using stats::DesignMatrix;
using stats::Vector;

// ---------------------------------------------------------------------------
// Names

namespace {

struct NamedEstimator {
    const char* name;
    EstimatorKind kind;
    std::optional<CausalStructure> assumed;
};

const NamedEstimator kNamed[] = {
    {"treatment-policy", EstimatorKind::TreatmentPolicy, std::nullopt},
    {"naive", EstimatorKind::Naive, std::nullopt},
    {"ipw-independent", EstimatorKind::IPW, CausalStructure::NoCrossEffects},
    {"ipw-d-first", EstimatorKind::IPW, CausalStructure::DPrecedesR},
    {"ipw-r-first", EstimatorKind::IPW, CausalStructure::RPrecedesD},
    {"mi-independent", EstimatorKind::MI, CausalStructure::NoCrossEffects},
    {"mi-d-first", EstimatorKind::MI, CausalStructure::DPrecedesR},
    {"mi-r-first", EstimatorKind::MI, CausalStructure::RPrecedesD},
    {"crossworld", EstimatorKind::CrossWorld, std::nullopt},
};

} // namespace

std::vector<std::string> estimator_names() {
    std::vector<std::string> out;
    for (const auto& e : kNamed) out.emplace_back(e.name);
    return out;
}

EstimatorSpec EstimatorSpec::parse(std::string_view name) {
    for (const auto& e : kNamed) {
        if (name == e.name) {
            EstimatorSpec spec;
            spec.kind = e.kind;
            spec.assumed = e.assumed;
            return spec;
        }
    }
    throw ValidationError("unknown estimator '" + std::string(name) + "'");
}

std::string EstimatorSpec::name() const {
    for (const auto& e : kNamed) {
        if (e.kind == kind && e.assumed == assumed) return e.name;
    }
    return "?";
}

void EstimatorSpec::validate() const {
    const bool needs_structure = kind == EstimatorKind::IPW || kind == EstimatorKind::MI;
    if (needs_structure != assumed.has_value()) {
        throw ValidationError("an assumed causal structure is required for IPW/MI and only for them");
    }
    if (kind == EstimatorKind::MI && m < 2) throw ValidationError("MI needs m >= 2 imputations");
}

sim::FixedIces EstimatorSpec::target() const {
    return kind == EstimatorKind::TreatmentPolicy ? sim::FixedIces::None : sim::FixedIces::R;
}

// ---------------------------------------------------------------------------
// Shared pieces

namespace {

double trial_value(const TrialRecord& t, std::string_view var) {
    if (var == "L0") return t.l0;
    if (var == "A") return t.a;
    if (var == "L1") return t.l1;
    if (var == "D1") return t.d1;
    if (var == "R1") return t.r1;
    if (var == "L2") return t.l2;
    if (var == "D2") return t.d2;
    if (var == "R2") return t.r2;
    if (var == "Y") return t.y;
    throw ValidationError("unknown trial variable '" + std::string(var) + "'");
}

template <typename Row, typename Getter>
DesignMatrix design_for(const std::vector<const Row*>& rows, const std::vector<std::string>& covariates, Getter&& get) {
    std::vector<std::vector<double>> cols(covariates.size(), std::vector<double>(rows.size()));
    for (std::size_t j = 0; j < covariates.size(); ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) cols[j][i] = get(*rows[i], covariates[j]);
    }
    return DesignMatrix::with_intercept(covariates, cols);
}

void require_both_arms(std::span<const TrialRecord> data, const char* what) {
    bool arm[2] = {false, false};
    for (const auto& t : data) arm[t.a == 1] = true;
    if (!arm[0] || !arm[1]) throw ValidationError(std::string(what) + " needs subjects in both arms");
}

/// Y on (intercept, A, L0); returns the A coefficient.
EffectEstimate outcome_regression(const std::vector<const TrialRecord*>& rows, const std::vector<double>* weights) {
    bool arm[2] = {false, false};
    for (const TrialRecord* t : rows) arm[t->a == 1] = true;
    if (!arm[0] || !arm[1]) throw NumericalError("no ICE-free subjects in one of the arms");
    const DesignMatrix x = design_for(rows, {"A", "L0"}, trial_value);
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = rows[i]->y;
    const stats::LinearFit fit = weights ? stats::wls_fit(x, y, *weights) : stats::ols_fit(x, y);
    EffectEstimate est;
    est.point = fit.coefficient("A");
    est.variance = fit.variance("A");
    est.diagnostics.retained = rows.size();
    return est;
}

std::vector<const TrialRecord*> all_rows(std::span<const TrialRecord> data) {
    std::vector<const TrialRecord*> rows;
    rows.reserve(data.size());
    for (const auto& t : data) rows.push_back(&t);
    return rows;
}

} // namespace

EffectEstimate estimate_treatment_policy(std::span<const TrialRecord> data) {
    require_both_arms(data, "treatment-policy estimation");
    return outcome_regression(all_rows(data), nullptr);
}

EffectEstimate estimate_naive(std::span<const TrialRecord> data) {
    std::vector<const TrialRecord*> rows;
    for (const auto& t : data) {
        if (t.r1 == 0 && t.r2 == 0) rows.push_back(&t);
    }
    return outcome_regression(rows, nullptr);
}

// ---------------------------------------------------------------------------
// IPW

namespace {

/// P(R = 0 | covariates) for each row, floored; identically 1 when nobody
/// in `rows` has the event.
std::vector<double> no_event_probability(const std::vector<const TrialRecord*>& rows,
                                         const std::vector<std::string>& covariates, int TrialRecord::*event,
                                         Diagnostics& diag) {
    std::vector<double> y(rows.size());
    bool any = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        y[i] = rows[i]->*event;
        any = any || y[i] == 1.0;
    }
    if (!any) return std::vector<double>(rows.size(), 1.0);
    const DesignMatrix x = design_for(rows, covariates, trial_value);
    const stats::LogisticFit fit = stats::logistic_fit(x, y);
    diag.models_converged = diag.models_converged && fit.converged;
    const Vector p_event = fit.predict(x.values());
    std::vector<double> pi(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        pi[i] = 1.0 - p_event(static_cast<Eigen::Index>(i));
        if (pi[i] < kWeightFloor) {
            pi[i] = kWeightFloor;
            ++diag.floored;
        }
    }
    return pi;
}

} // namespace

EffectEstimate estimate_ipw(std::span<const TrialRecord> data, CausalStructure assumed) {
    require_both_arms(data, "IPW estimation");
    const graph::AdjustmentPlan plan = graph::derive_adjustment_plan(assumed, 2);
    Diagnostics diag;

    const std::vector<const TrialRecord*> everyone = all_rows(data);
    const std::vector<double> pi1 = no_event_probability(everyone, plan.per_period[0].r_model_covariates,
                                                         &TrialRecord::r1, diag);

    std::vector<const TrialRecord*> at_risk2;
    std::vector<double> pi1_at_risk2;
    for (std::size_t i = 0; i < everyone.size(); ++i) {
        if (everyone[i]->r1 == 0) {
            at_risk2.push_back(everyone[i]);
            pi1_at_risk2.push_back(pi1[i]);
        }
    }
    const std::vector<double> pi2 = no_event_probability(at_risk2, plan.per_period[1].r_model_covariates,
                                                         &TrialRecord::r2, diag);

    std::vector<const TrialRecord*> retained;
    std::vector<double> weights;
    for (std::size_t i = 0; i < at_risk2.size(); ++i) {
        if (at_risk2[i]->r2 == 0) {
            retained.push_back(at_risk2[i]);
            weights.push_back(1.0 / (pi1_at_risk2[i] * pi2[i]));
        }
    }
    EffectEstimate est = outcome_regression(retained, &weights);
    // the model-based WLS variance ignores weight estimation; not reported
    est.variance.reset();
    diag.retained = retained.size();
    diag.min_weight = *std::min_element(weights.begin(), weights.end());
    diag.max_weight = *std::max_element(weights.begin(), weights.end());
    est.diagnostics = diag;
    return est;
}

// ---------------------------------------------------------------------------
// Deletion and multiple imputation

std::optional<double> IncompleteRecord::get(std::string_view var) const {
    if (var == "L0") return l0;
    if (var == "A") return a;
    if (var == "L1") return l1;
    if (var == "D1") return d1;
    if (var == "R1") return r1;
    if (var == "L2") return l2;
    if (var == "D2") return d2;
    if (var == "R2") return r2;
    if (var == "Y") return y;
    throw ValidationError("unknown trial variable '" + std::string(var) + "'");
}

void IncompleteRecord::set(std::string_view var, double value) {
    if (var == "D1") d1 = value;
    else if (var == "L2") l2 = value;
    else if (var == "D2") d2 = value;
    else if (var == "Y") y = value;
    else throw ValidationError("variable '" + std::string(var) + "' is never imputed");
}

std::vector<IncompleteRecord> delete_post_ice(std::span<const TrialRecord> data, CausalStructure assumed) {
    const graph::AdjustmentPlan plan = graph::derive_adjustment_plan(assumed, 2);
    std::vector<IncompleteRecord> out;
    out.reserve(data.size());
    for (const TrialRecord& t : data) {
        IncompleteRecord rec{t.l0, t.a, t.l1, t.d1, t.r1, t.l2, t.d2, t.r2, t.y};
        for (const graph::PeriodPlan& p : plan.per_period) {
            const int event = p.period == 1 ? t.r1 : t.r2;
            if (event != 1) continue;
            for (const auto& var : p.deleted_when_r) {
                if (var == "D1") rec.d1.reset();
                else if (var == "L2") rec.l2.reset();
                else if (var == "D2") rec.d2.reset();
                else if (var == "Y") rec.y.reset();
            }
        }
        out.push_back(rec);
    }
    return out;
}

namespace {

double observed(const IncompleteRecord& r, const std::string& var) {
    auto v = r.get(var);
    if (!v) throw NumericalError("imputation covariate " + var + " is missing where it should be available");
    return *v;
}

/// One step of the sequential imputation, fitted once on the rows where the
/// variable is observed.
struct ImputationModel {
    graph::ImputationStep step;
    std::vector<std::size_t> missing;
    std::optional<stats::LinearFit> linear;
    std::optional<stats::LogisticFit> logistic;
    std::optional<double> constant; // binary variable with a single observed level
};

ImputationModel fit_imputation_model(const std::vector<IncompleteRecord>& data, const graph::ImputationStep& step) {
    ImputationModel model{step, {}, {}, {}, {}};
    std::vector<const IncompleteRecord*> fit_rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (auto v = data[i].get(step.variable)) {
            fit_rows.push_back(&data[i]);
            y.push_back(*v);
        } else {
            model.missing.push_back(i);
        }
    }
    if (model.missing.empty()) return model;
    if (fit_rows.empty()) throw NumericalError("no observed values of " + step.variable + " to fit its imputation model");
    const DesignMatrix x = design_for(fit_rows, step.covariates, observed);
    if (step.binary) {
        const bool all_same = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
        if (all_same) {
            model.constant = y.front();
        } else {
            model.logistic = stats::logistic_fit(x, y);
        }
    } else {
        model.linear = stats::ols_fit(x, y);
    }
    return model;
}

void impute_once(std::vector<IncompleteRecord>& data, const ImputationModel& model, Stream& rng) {
    if (model.missing.empty()) return;
    const auto& cov = model.step.covariates;
    auto linear_predictor = [&](const IncompleteRecord& r, const Vector& beta) {
        double eta = beta(0);
        for (std::size_t j = 0; j < cov.size(); ++j) eta += beta(static_cast<Eigen::Index>(j) + 1) * observed(r, cov[j]);
        return eta;
    };
    if (model.constant) {
        for (std::size_t i : model.missing) data[i].set(model.step.variable, *model.constant);
    } else if (model.linear) {
        const stats::LinearDraw draw = stats::posterior_draw(*model.linear, rng);
        const double sigma = std::sqrt(draw.residual_variance);
        for (std::size_t i : model.missing) {
            const double mean = linear_predictor(data[i], draw.coefficients);
            data[i].set(model.step.variable, mean + sigma * rng.normal());
        }
    } else {
        const Vector beta = stats::posterior_draw(*model.logistic, rng);
        for (std::size_t i : model.missing) {
            const double p = sim::expit(linear_predictor(data[i], beta));
            data[i].set(model.step.variable, rng.uniform() < p ? 1.0 : 0.0);
        }
    }
}

} // namespace

EffectEstimate estimate_mi(std::span<const TrialRecord> data, CausalStructure assumed, int m, Seed seed) {
    if (m < 2) throw ValidationError("MI needs m >= 2 imputations");
    require_both_arms(data, "MI estimation");
    const graph::AdjustmentPlan plan = graph::derive_adjustment_plan(assumed, 2);
    const std::vector<IncompleteRecord> incomplete = delete_post_ice(data, assumed);

    // Missingness is monotone, so each model's fitting rows have fully
    // observed covariates and the fits do not depend on earlier imputations.
    std::vector<ImputationModel> models;
    for (const graph::ImputationStep& step : plan.imputation_order) {
        models.push_back(fit_imputation_model(incomplete, step));
    }

    Diagnostics diag;
    std::vector<double> estimates, variances;
    for (int j = 0; j < m; ++j) {
        std::vector<IncompleteRecord> completed = incomplete;
        for (std::size_t s = 0; s < models.size(); ++s) {
            Stream rng(derive_seed(seed, {label_key("mi"), static_cast<std::uint64_t>(j), s}));
            impute_once(completed, models[s], rng);
        }
        std::vector<TrialRecord> full;
        full.reserve(completed.size());
        for (const IncompleteRecord& r : completed) {
            full.push_back({r.l0, r.a, r.l1, static_cast<int>(observed(r, "D1")), r.r1, observed(r, "L2"),
                            static_cast<int>(observed(r, "D2")), r.r2, observed(r, "Y")});
        }
        const EffectEstimate e = outcome_regression(all_rows(full), nullptr);
        estimates.push_back(e.point);
        variances.push_back(*e.variance);
    }
    const stats::PooledEstimate pooled = stats::rubins_pool(estimates, variances);
    std::size_t imputed = 0;
    for (const auto& mdl : models) imputed += mdl.missing.size();
    diag.retained = data.size();
    diag.notes.push_back("imputed values per dataset: " + std::to_string(imputed));
    diag.notes.push_back("between-imputation variance: " + std::to_string(pooled.between_var));
    EffectEstimate est;
    est.point = pooled.point;
    est.variance = pooled.total_var;
    est.diagnostics = diag;
    return est;
}

// ---------------------------------------------------------------------------
// Cross-world imputation estimator (one visit, R may affect D)

EffectEstimate estimate_crossworld(std::span<const SinglePeriodRecord> data, const CrossWorldOptions& opts) {
    double value[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (int a = 0; a <= 1; ++a) {
        std::vector<const SinglePeriodRecord*> arm, fit_rows, rescued;
        for (const auto& r : data) {
            if (r.a != a) continue;
            arm.push_back(&r);
            (r.r == 0 ? fit_rows : rescued).push_back(&r);
        }
        if (arm.empty()) throw ValidationError("cross-world estimation needs subjects in both arms");
        count[a] = arm.size();
        double sum = 0;
        for (const auto* r : fit_rows) sum += r->y;
        if (!rescued.empty()) {
            if (fit_rows.empty()) throw NumericalError("no rescue-free subjects in arm " + std::to_string(a));
            std::vector<std::string> covariates{"L0", "L1", "D"};
            if (opts.interaction) {
                covariates.push_back("D:L0");
                covariates.push_back("D:L1");
            }
            auto get = [](const SinglePeriodRecord& r, const std::string& var) -> double {
                if (var == "L0") return r.l0;
                if (var == "L1") return r.l1;
                if (var == "D") return r.d;
                if (var == "D:L0") return r.d * r.l0;
                return r.d * r.l1;
            };
            const DesignMatrix x = design_for(fit_rows, covariates, get);
            std::vector<double> y;
            for (const auto* r : fit_rows) y.push_back(r->y);
            const stats::LinearFit fit = stats::ols_fit(x, y);
            const DesignMatrix xr = design_for(rescued, covariates, get);
            const Vector pred = xr.values() * fit.coefficients;
            sum += pred.sum();
        }
        value[a] = sum / static_cast<double>(arm.size());
    }
    EffectEstimate est;
    est.point = value[1] - value[0];
    est.diagnostics.retained = count[0] + count[1];
    return est;
}

// ---------------------------------------------------------------------------

EffectEstimate run_estimator(const EstimatorSpec& spec, std::span<const TrialRecord> data) {
    spec.validate();
    switch (spec.kind) {
    case EstimatorKind::TreatmentPolicy: return estimate_treatment_policy(data);
    case EstimatorKind::Naive: return estimate_naive(data);
    case EstimatorKind::IPW: return estimate_ipw(data, *spec.assumed);
    case EstimatorKind::MI: return estimate_mi(data, *spec.assumed, spec.m, spec.seed);
    case EstimatorKind::CrossWorld:
        throw ValidationError("the crossworld estimator needs a single-visit dataset (l0,a,l1,r,d,y)");
    }
    throw ValidationError("unhandled estimator");
}

EffectEstimate run_estimator(const EstimatorSpec& spec, const Dataset& data) {
    if (const auto* trial = std::get_if<std::vector<TrialRecord>>(&data)) {
        return run_estimator(spec, std::span<const TrialRecord>(*trial));
    }
    spec.validate();
    if (spec.kind != EstimatorKind::CrossWorld) {
        throw ValidationError("estimator '" + spec.name() + "' needs a two-visit trial dataset");
    }
    return estimate_crossworld(std::get<std::vector<SinglePeriodRecord>>(data), {spec.interaction});
}

} // namespace icepath::est
