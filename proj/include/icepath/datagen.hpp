#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "icepath/graph.hpp"
#include "icepath/rng.hpp"

namespace icepath::sim {

using graph::CausalStructure;

inline double expit(double x) {
    // branch keeps exp() from overflowing for large |x|
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Two-visit trial generator. Coefficient names follow the simulation
/// design: alpha is the ICE intercept, beta the covariate effect, gamma the
/// ICE effect.
struct ScenarioSpec {
    CausalStructure structure = CausalStructure::NoCrossEffects;
    double alpha = -1.0;
    double beta = 0.25;
    double gamma = 1.0;
    std::size_t n = 2000;
    int periods = 2;

    void validate() const;
};

struct TrialRecord {
    double l0 = 0;
    int a = 0;
    double l1 = 0;
    int d1 = 0;
    int r1 = 0;
    double l2 = 0;
    int d2 = 0;
    int r2 = 0;
    double y = 0;

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// Interventions for counterfactual generation. ICEs can only be withheld,
/// so a fixed ICE value must be 0.
struct InterventionSet {
    int a = 1;
    std::array<std::optional<int>, 2> r{};
    std::array<std::optional<int>, 2> d{};

    void validate() const;
    static InterventionSet withhold_rescue(int a);
    static InterventionSet withhold_both(int a);
};

/// Which intercurrent events the truth oracle withholds.
enum class FixedIces { None, R, RD };

std::vector<TrialRecord> generate_trial(const ScenarioSpec& spec, Seed seed);
std::vector<TrialRecord> generate_counterfactual(const ScenarioSpec& spec, const InterventionSet& iv,
                                                 Seed seed);

/// One subject. Exposed for tests that need to compare worlds subject by
/// subject under the same noise.
TrialRecord simulate_subject(const ScenarioSpec& spec, Seed seed, std::size_t subject,
                             const InterventionSet* iv);

struct OracleResult {
    double tau = 0;
    double mc_se = 0;
    double mean_treated = 0;
    double mean_control = 0;
    std::size_t n_per_arm = 0;
};

/// Monte-Carlo truth: mean Y under a=1 minus mean Y under a=0 with the
/// chosen ICEs withheld, over n_oracle simulated subjects per arm. Arms use
/// independent streams. `threads` = 0 means hardware concurrency; the
/// result does not depend on it.
OracleResult true_effect_oracle(const ScenarioSpec& spec, FixedIces fixed, std::size_t n_oracle, Seed seed,
                                unsigned threads = 0);

// ---------------------------------------------------------------------------
// One-visit structural model with R -> D (the cross-world setting).

struct SinglePeriodSpec {
    double l1_l0 = 0.25, l1_a = 0.25;
    double r_intercept = -1.0, r_l0 = 0.25, r_a = 0.25, r_l1 = 0.25;
    double d_intercept = -1.0, d_l0 = 0.25, d_a = 0.25, d_l1 = 0.25, d_r = 1.0;
    double y_intercept = 0.0, y_l0 = 0.25, y_a = 0.25, y_l1 = 0.25, y_r = 1.0, y_d = 1.0;
    std::size_t n = 2000;
    /// When true every world reuses the subject's exogenous noise; when false
    /// non-factual worlds get their own noise (consistency still holds).
    bool shared_noise = true;

    void validate() const;
    /// All coefficients zero except the direct A -> Y effect.
    static SinglePeriodSpec direct_only(double effect);
};

/// Factual values plus the cross-world counterfactuals at the subject's
/// factual treatment: D^{a,r} for r = 0,1 and Y^{a,r=0,d} for d = 0,1.
struct SinglePeriodRecord {
    double l0 = 0;
    int a = 0;
    double l1 = 0;
    int r = 0;
    int d = 0;
    double y = 0;
    int d_a_r0 = 0;
    int d_a_r1 = 0;
    double y_a_r0_d0 = 0;
    double y_a_r0_d1 = 0;

    friend bool operator==(const SinglePeriodRecord&, const SinglePeriodRecord&) = default;
};

/// Evaluate every world of one subject with treatment forced to `a`
/// (or drawn, when `a` is empty).
SinglePeriodRecord simulate_single_subject(const SinglePeriodSpec& spec, Seed seed, std::size_t subject,
                                           std::optional<int> a);

std::vector<SinglePeriodRecord> generate_single_period(const SinglePeriodSpec& spec, Seed seed);

struct ContrastResult {
    double value_treated = 0;
    double value_control = 0;
    double contrast = 0;
    double mc_se = 0;
};

/// E(Y^{a, r=0, D^{a, R^a}}) per arm: d is the discontinuation that would
/// occur under the rescue status the subject actually has under a.
ContrastResult crossworld_oracle(const SinglePeriodSpec& spec, std::size_t n_oracle, Seed seed,
                                 unsigned threads = 0);

/// E(Y^{a, r=0}) per arm in the one-visit model (D takes its value under r=0).
ContrastResult single_period_hypothetical_oracle(const SinglePeriodSpec& spec, std::size_t n_oracle, Seed seed,
                                                 unsigned threads = 0);

} // namespace icepath::sim
