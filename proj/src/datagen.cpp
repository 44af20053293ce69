#include "icepath/datagen.hpp"

#include <string>

#include "icepath/errors.hpp"
#include "icepath/parallel.hpp"

namespace icepath::sim {

namespace {

// Stream labels: one substream per subject and variable.
enum Var : std::uint64_t { kL0 = 1, kA, kL1, kD1, kR1, kL2, kD2, kR2, kY };
// Single-period worlds.
enum SingleVar : std::uint64_t { kSpL0 = 101, kSpA, kSpL1, kSpR, kSpD, kSpY };

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw ValidationError(std::string("coefficient ") + name + " must be finite");
}

class SubjectNoise {
public:
    SubjectNoise(Seed seed, std::size_t subject) : seed_(seed), subject_(subject) {}

    Stream stream(std::uint64_t var, std::uint64_t world = 0) const {
        return Stream(derive_seed(seed_, {subject_, var, world}));
    }
    double normal(std::uint64_t var, std::uint64_t world = 0) const { return stream(var, world).normal(); }
    double uniform(std::uint64_t var, std::uint64_t world = 0) const { return stream(var, world).uniform(); }

private:
    Seed seed_;
    std::uint64_t subject_;
};

int draw(double u, double p) { return u < p ? 1 : 0; }

Seed arm_seed(Seed seed, int a) { return derive_seed(seed, {label_key("oracle-arm"), static_cast<std::uint64_t>(a)}); }

} // namespace

void ScenarioSpec::validate() const {
    if (n < 1) throw ValidationError("scenario n must be at least 1");
    if (periods != 2) throw ValidationError("the trial generator simulates exactly 2 visits");
    require_finite(alpha, "alpha");
    require_finite(beta, "beta");
    require_finite(gamma, "gamma");
}

void InterventionSet::validate() const {
    if (a != 0 && a != 1) throw ValidationError("intervention on A must set it to 0 or 1");
    for (const auto& v : r) {
        if (v && *v != 0) throw ValidationError("rescue can only be withheld (fixed to 0)");
    }
    for (const auto& v : d) {
        if (v && *v != 0) throw ValidationError("discontinuation can only be withheld (fixed to 0)");
    }
}

InterventionSet InterventionSet::withhold_rescue(int a) {
    InterventionSet iv;
    iv.a = a;
    iv.r = {0, 0};
    return iv;
}

InterventionSet InterventionSet::withhold_both(int a) {
    InterventionSet iv = withhold_rescue(a);
    iv.d = {0, 0};
    return iv;
}

TrialRecord simulate_subject(const ScenarioSpec& spec, Seed seed, std::size_t subject, const InterventionSet* iv) {
    const SubjectNoise noise(seed, subject);
    const double al = spec.alpha, b = spec.beta, g = spec.gamma;
    const CausalStructure s = spec.structure;
    TrialRecord t;

    auto forced = [](const std::optional<int>& fixed, auto&& natural) -> int {
        return fixed ? *fixed : natural();
    };
    const std::optional<int> no_fix;
    const auto& fix_r1 = iv ? iv->r[0] : no_fix;
    const auto& fix_r2 = iv ? iv->r[1] : no_fix;
    const auto& fix_d1 = iv ? iv->d[0] : no_fix;
    const auto& fix_d2 = iv ? iv->d[1] : no_fix;

    t.l0 = noise.normal(kL0);
    t.a = iv ? iv->a : draw(noise.uniform(kA), 0.5);
    t.l1 = b * t.l0 + b * t.a + noise.normal(kL1);
    const double base1 = al + b * t.l0 + b * t.a + b * t.l1;

    auto gen_d1 = [&] {
        const double lp = base1 + (s == CausalStructure::RPrecedesD ? g * t.r1 : 0.0);
        return draw(noise.uniform(kD1), expit(lp));
    };
    auto gen_r1 = [&] {
        const double lp = base1 + (s == CausalStructure::DPrecedesR ? g * t.d1 : 0.0);
        return draw(noise.uniform(kR1), expit(lp));
    };
    if (s == CausalStructure::RPrecedesD) {
        t.r1 = forced(fix_r1, gen_r1);
        t.d1 = forced(fix_d1, gen_d1);
    } else {
        t.d1 = forced(fix_d1, gen_d1);
        t.r1 = forced(fix_r1, gen_r1);
    }

    t.l2 = b * t.l0 + b * t.a + b * t.l1 + g * t.d1 + g * t.r1 + noise.normal(kL2);
    const double base2 = al + b * t.l0 + b * t.a + b * t.l1 + b * t.l2;

    auto gen_d2 = [&] {
        double lp = base2 + g * t.d1;
        if (s == CausalStructure::DPrecedesR) lp += g * t.r1;
        if (s == CausalStructure::RPrecedesD) lp += g * t.r1 + g * t.r2;
        return draw(noise.uniform(kD2), expit(lp));
    };
    auto gen_r2 = [&] {
        double lp = base2 + g * t.r1;
        if (s == CausalStructure::DPrecedesR) lp += g * t.d1 + g * t.d2;
        if (s == CausalStructure::RPrecedesD) lp += g * t.d1;
        return draw(noise.uniform(kR2), expit(lp));
    };
    if (s == CausalStructure::RPrecedesD) {
        t.r2 = forced(fix_r2, gen_r2);
        t.d2 = forced(fix_d2, gen_d2);
    } else {
        t.d2 = forced(fix_d2, gen_d2);
        t.r2 = forced(fix_r2, gen_r2);
    }

    t.y = b * t.l0 + b * t.a + b * t.l1 + g * t.d1 + g * t.r1 + b * t.l2 + g * t.d2 + g * t.r2 + noise.normal(kY);
    return t;
}

std::vector<TrialRecord> generate_trial(const ScenarioSpec& spec, Seed seed) {
    spec.validate();
    std::vector<TrialRecord> out(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) out[i] = simulate_subject(spec, seed, i, nullptr);
    return out;
}

std::vector<TrialRecord> generate_counterfactual(const ScenarioSpec& spec, const InterventionSet& iv, Seed seed) {
    spec.validate();
    iv.validate();
    std::vector<TrialRecord> out(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) out[i] = simulate_subject(spec, seed, i, &iv);
    return out;
}

OracleResult true_effect_oracle(const ScenarioSpec& spec, FixedIces fixed, std::size_t n_oracle, Seed seed,
                                unsigned threads) {
    spec.validate();
    if (n_oracle < 1) throw ValidationError("oracle size must be at least 1");
    Moments arm[2];
    for (int a = 0; a <= 1; ++a) {
        InterventionSet iv;
        iv.a = a;
        if (fixed != FixedIces::None) iv.r = {0, 0};
        if (fixed == FixedIces::RD) iv.d = {0, 0};
        const Seed s = arm_seed(seed, a);
        arm[a] = chunked_moments(n_oracle, threads, [&](std::size_t i) { return simulate_subject(spec, s, i, &iv).y; });
    }
    OracleResult res;
    res.mean_treated = arm[1].mean;
    res.mean_control = arm[0].mean;
    res.tau = arm[1].mean - arm[0].mean;
    res.mc_se = std::hypot(arm[1].standard_error(), arm[0].standard_error());
    res.n_per_arm = n_oracle;
    return res;
}

// ---------------------------------------------------------------------------
// Single period

void SinglePeriodSpec::validate() const {
    for (double v : {l1_l0, l1_a, r_intercept, r_l0, r_a, r_l1, d_intercept, d_l0, d_a, d_l1, d_r, y_intercept, y_l0,
                     y_a, y_l1, y_r, y_d}) {
        require_finite(v, "of the single-period model");
    }
    if (n < 1) throw ValidationError("single-period n must be at least 1");
}

SinglePeriodSpec SinglePeriodSpec::direct_only(double effect) {
    SinglePeriodSpec s;
    s.l1_l0 = s.l1_a = 0;
    s.r_intercept = s.r_l0 = s.r_a = s.r_l1 = 0;
    s.d_intercept = s.d_l0 = s.d_a = s.d_l1 = s.d_r = 0;
    s.y_intercept = s.y_l0 = s.y_l1 = s.y_r = s.y_d = 0;
    s.y_a = effect;
    return s;
}

SinglePeriodRecord simulate_single_subject(const SinglePeriodSpec& m, Seed seed, std::size_t subject,
                                           std::optional<int> forced_a) {
    const SubjectNoise noise(seed, subject);
    SinglePeriodRecord rec;
    rec.l0 = noise.normal(kSpL0);
    rec.a = forced_a ? *forced_a : draw(noise.uniform(kSpA), 0.5);
    rec.l1 = m.l1_l0 * rec.l0 + m.l1_a * rec.a + noise.normal(kSpL1);
    rec.r = draw(noise.uniform(kSpR), expit(m.r_intercept + m.r_l0 * rec.l0 + m.r_a * rec.a + m.r_l1 * rec.l1));

    // World indices encode the intervened values; the factual world always
    // uses world 0 noise so that shared and unshared modes agree on it.
    auto world_key = [&](std::uint64_t w, bool factual) -> std::uint64_t {
        return (m.shared_noise || factual) ? 0 : w + 1;
    };
    auto d_given = [&](int r, bool factual) {
        const double lp = m.d_intercept + m.d_l0 * rec.l0 + m.d_a * rec.a + m.d_l1 * rec.l1 + m.d_r * r;
        return draw(noise.uniform(kSpD, world_key(static_cast<std::uint64_t>(r), factual)), expit(lp));
    };
    auto y_given = [&](int r, int d, bool factual) {
        return m.y_intercept + m.y_l0 * rec.l0 + m.y_a * rec.a + m.y_l1 * rec.l1 + m.y_r * r + m.y_d * d +
               noise.normal(kSpY, world_key(static_cast<std::uint64_t>(2 * r + d), factual));
    };

    rec.d_a_r0 = d_given(0, rec.r == 0);
    rec.d_a_r1 = d_given(1, rec.r == 1);
    rec.d = rec.r == 1 ? rec.d_a_r1 : rec.d_a_r0;
    rec.y_a_r0_d0 = y_given(0, 0, rec.r == 0 && rec.d == 0);
    rec.y_a_r0_d1 = y_given(0, 1, rec.r == 0 && rec.d == 1);
    rec.y = y_given(rec.r, rec.d, true);
    return rec;
}

std::vector<SinglePeriodRecord> generate_single_period(const SinglePeriodSpec& spec, Seed seed) {
    spec.validate();
    std::vector<SinglePeriodRecord> out(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) out[i] = simulate_single_subject(spec, seed, i, std::nullopt);
    return out;
}

namespace {

template <typename Outcome>
ContrastResult single_period_contrast(const SinglePeriodSpec& spec, std::size_t n_oracle, Seed seed,
                                      unsigned threads, Outcome&& outcome) {
    spec.validate();
    if (n_oracle < 1) throw ValidationError("oracle size must be at least 1");
    Moments arm[2];
    for (int a = 0; a <= 1; ++a) {
        const Seed s = arm_seed(seed, a);
        arm[a] = chunked_moments(n_oracle, threads,
                                 [&](std::size_t i) { return outcome(simulate_single_subject(spec, s, i, a)); });
    }
    ContrastResult res;
    res.value_treated = arm[1].mean;
    res.value_control = arm[0].mean;
    res.contrast = arm[1].mean - arm[0].mean;
    res.mc_se = std::hypot(arm[1].standard_error(), arm[0].standard_error());
    return res;
}

} // namespace

ContrastResult crossworld_oracle(const SinglePeriodSpec& spec, std::size_t n_oracle, Seed seed, unsigned threads) {
    return single_period_contrast(spec, n_oracle, seed, threads, [](const SinglePeriodRecord& w) {
        // D^{a, R^a}: discontinuation under the subject's natural rescue status
        const int d = w.r == 1 ? w.d_a_r1 : w.d_a_r0;
        return d == 1 ? w.y_a_r0_d1 : w.y_a_r0_d0;
    });
}

ContrastResult single_period_hypothetical_oracle(const SinglePeriodSpec& spec, std::size_t n_oracle, Seed seed,
                                                 unsigned threads) {
    return single_period_contrast(spec, n_oracle, seed, threads, [](const SinglePeriodRecord& w) {
        return w.d_a_r0 == 1 ? w.y_a_r0_d1 : w.y_a_r0_d0;
    });
}

} // namespace icepath::sim
