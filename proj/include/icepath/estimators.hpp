#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "icepath/datagen.hpp"
#include "icepath/rng.hpp"

namespace icepath::est {

using graph::CausalStructure;
using sim::SinglePeriodRecord;
using sim::TrialRecord;

enum class EstimatorKind { TreatmentPolicy, Naive, IPW, MI, CrossWorld };

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::Naive;
    /// Present iff kind is IPW or MI.
    std::optional<CausalStructure> assumed;
    int m = 10;
    Seed seed = 0;
    /// Cross-world outcome model: add D x L0 and D x L1 terms.
    bool interaction = false;

    /// Names: treatment-policy, naive, ipw-independent, ipw-d-first,
    /// ipw-r-first, mi-independent, mi-d-first, mi-r-first, crossworld.
    static EstimatorSpec parse(std::string_view name);
    std::string name() const;
    void validate() const;
    /// Which ICEs the targeted estimand withholds.
    sim::FixedIces target() const;
};

std::vector<std::string> estimator_names();

struct Diagnostics {
    std::size_t retained = 0;
    double min_weight = 0;
    double max_weight = 0;
    std::size_t floored = 0;
    bool models_converged = true;
    std::vector<std::string> notes;
};

struct EffectEstimate {
    double point = 0;
    std::optional<double> variance;
    Diagnostics diagnostics;
};

/// Probability floor applied to estimated P(R_k = 0 | ...) before inversion.
inline constexpr double kWeightFloor = 1e-6;

EffectEstimate estimate_treatment_policy(std::span<const TrialRecord> data);
EffectEstimate estimate_naive(std::span<const TrialRecord> data);
EffectEstimate estimate_ipw(std::span<const TrialRecord> data, CausalStructure assumed);

/// A trial record after post-ICE deletion. R1 and R2 are always observed.
struct IncompleteRecord {
    double l0 = 0;
    int a = 0;
    double l1 = 0;
    std::optional<double> d1;
    int r1 = 0;
    std::optional<double> l2;
    std::optional<double> d2;
    int r2 = 0;
    std::optional<double> y;

    /// Value by variable name (L0, A, L1, D1, R1, L2, D2, R2, Y).
    std::optional<double> get(std::string_view var) const;
    void set(std::string_view var, double value);
};

std::vector<IncompleteRecord> delete_post_ice(std::span<const TrialRecord> data, CausalStructure assumed);

EffectEstimate estimate_mi(std::span<const TrialRecord> data, CausalStructure assumed, int m, Seed seed);

struct CrossWorldOptions {
    bool interaction = false;
};

EffectEstimate estimate_crossworld(std::span<const SinglePeriodRecord> data, const CrossWorldOptions& opts = {});

/// Either dataset shape; `run_estimator` checks the pairing.
using Dataset = std::variant<std::vector<TrialRecord>, std::vector<SinglePeriodRecord>>;

EffectEstimate run_estimator(const EstimatorSpec& spec, std::span<const TrialRecord> data);
EffectEstimate run_estimator(const EstimatorSpec& spec, const Dataset& data);

} // namespace icepath::est
