#pragma once

#include <cstddef>
#include <iosfwd>
#include <iterator>
#include <string>
#include <vector>

#include "icepath/datagen.hpp"
#include "icepath/estimators.hpp"

namespace icepath::harness {

struct StudyConfig {
    std::vector<graph::CausalStructure> scenarios{std::begin(graph::kAllStructures), std::end(graph::kAllStructures)};
    std::size_t n = 2000;
    std::size_t reps = 1000;
    std::vector<est::EstimatorSpec> estimators;
    std::size_t oracle_n = 1000000;
    Seed master_seed = 0;
    double alpha = -1.0;
    double beta = 0.25;
    double gamma = 1.0;
    /// 0 = all cores; never changes results
    unsigned threads = 0;

    void validate() const;
    /// Fields as above; estimators are names or {"name": ..., "m": ...}.
    /// Unknown keys are rejected.
    static StudyConfig from_json(const std::string& text);
};

struct ReplicationResult {
    graph::CausalStructure scenario{};
    std::string estimator;
    std::size_t rep = 0;
    double estimate = 0;
    bool failed = false;
    std::string reason;
    est::Diagnostics diagnostics;
};

struct ReportRow {
    graph::CausalStructure scenario{};
    std::string estimator;
    double truth = 0;
    double truth_mc_se = 0;
    double mean = 0;
    double bias = 0;
    double mc_se = 0;
    double sd = 0;
    double mse = 0;
    double q025 = 0, q25 = 0, q50 = 0, q75 = 0, q975 = 0;
    std::size_t failures = 0;
    std::size_t reps = 0;
};

struct StudyReport {
    std::vector<ReportRow> rows;
    /// ordered by scenario, then rep, then estimator
    std::vector<ReplicationResult> replications;

    const ReportRow& row(graph::CausalStructure scenario, const std::string& estimator) const;
};

/// Seed of one replication's dataset.
Seed replication_seed(Seed master, graph::CausalStructure scenario, std::size_t rep);
/// Seed of the truth oracle for a scenario and estimand.
Seed truth_seed(Seed master, graph::CausalStructure scenario, sim::FixedIces fixed);

StudyReport run_study(const StudyConfig& config);

/// Type-7 quantile of sorted data.
double quantile(const std::vector<double>& sorted, double p);

/// Failed results are counted and excluded from the moments.
ReportRow summarize(const std::vector<ReplicationResult>& results, double truth, double mc_se_truth);

enum class BiasClass { Unbiased, Biased, Indeterminate };
/// |bias| <= 3 se -> unbiased, >= 5 se -> biased, where se combines the
/// estimate's and the truth's Monte-Carlo standard errors.
BiasClass classify_bias(const ReportRow& row);
const char* to_string(BiasClass c);

void write_replications_csv(std::ostream& out, const std::vector<ReplicationResult>& results);
void write_summary_json(std::ostream& out, const StudyReport& report);

} // namespace icepath::harness
