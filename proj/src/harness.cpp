#include "icepath/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <json.hpp>

#include "icepath/errors.hpp"
#include "icepath/io.hpp"
#include "icepath/parallel.hpp"

namespace icepath::harness {

using graph::CausalStructure;
using io::fmt;

void StudyConfig::validate() const {
    if (scenarios.empty()) throw ValidationError("config: scenarios must not be empty");
    if (estimators.empty()) throw ValidationError("config: estimators must not be empty");
    if (reps < 1) throw ValidationError("config: reps must be >= 1");
    if (oracle_n < 2) throw ValidationError("config: oracle_n must be >= 2");
    for (const auto& e : estimators) {
        e.validate();
        if (e.kind == est::EstimatorKind::CrossWorld) {
            throw ValidationError("config: crossworld needs single-visit data and cannot run in a study");
        }
    }
    sim::ScenarioSpec spec{scenarios.front(), alpha, beta, gamma, n, 2};
    spec.validate();
}

StudyConfig StudyConfig::from_json(const std::string& text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    StudyConfig c;
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& key = it.key();
            const json& v = it.value();
            if (key == "scenarios") {
                c.scenarios.clear();
                for (const auto& s : v) c.scenarios.push_back(graph::parse_structure(s.get<std::string>()));
            } else if (key == "n") {
                c.n = v.get<std::size_t>();
            } else if (key == "reps") {
                c.reps = v.get<std::size_t>();
            } else if (key == "oracle_n") {
                c.oracle_n = v.get<std::size_t>();
            } else if (key == "master_seed") {
                c.master_seed = v.get<Seed>();
            } else if (key == "alpha") {
                c.alpha = v.get<double>();
            } else if (key == "beta") {
                c.beta = v.get<double>();
            } else if (key == "gamma") {
                c.gamma = v.get<double>();
            } else if (key == "threads") {
                c.threads = v.get<unsigned>();
            } else if (key == "estimators") {
                for (const auto& e : v) {
                    if (e.is_string()) {
                        c.estimators.push_back(est::EstimatorSpec::parse(e.get<std::string>()));
                    } else {
                        auto spec = est::EstimatorSpec::parse(e.at("name").get<std::string>());
                        if (e.contains("m")) spec.m = e.at("m").get<int>();
                        for (auto f = e.begin(); f != e.end(); ++f) {
                            if (f.key() != "name" && f.key() != "m") {
                                throw ValidationError("config: unknown estimator field '" + f.key() + "'");
                            }
                        }
                        c.estimators.push_back(spec);
                    }
                }
            } else {
                throw ValidationError("config: unknown field '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

const ReportRow& StudyReport::row(CausalStructure scenario, const std::string& estimator) const {
    for (const auto& r : rows) {
        if (r.scenario == scenario && r.estimator == estimator) return r;
    }
    throw ValidationError("no report row for " + std::string(graph::to_string(scenario)) + "/" + estimator);
}

Seed replication_seed(Seed master, CausalStructure scenario, std::size_t rep) {
    return derive_seed(master, {label_key("replication"), label_key(graph::to_string(scenario)), rep});
}

Seed truth_seed(Seed master, CausalStructure scenario, sim::FixedIces fixed) {
    return derive_seed(master,
                       {label_key("truth"), label_key(graph::to_string(scenario)), static_cast<std::uint64_t>(fixed)});
}

double quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return std::nan("");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ReportRow summarize(const std::vector<ReplicationResult>& results, double truth, double mc_se_truth) {
    if (results.empty()) throw ValidationError("summarize needs at least one result");
    ReportRow row;
    row.scenario = results.front().scenario;
    row.estimator = results.front().estimator;
    row.truth = truth;
    row.truth_mc_se = mc_se_truth;
    row.reps = results.size();
    std::vector<double> ok;
    for (const auto& r : results) {
        if (r.failed) ++row.failures;
        else ok.push_back(r.estimate);
    }
    const double nan = std::nan("");
    if (ok.empty()) {
        row.mean = row.bias = row.mc_se = row.sd = row.mse = nan;
        row.q025 = row.q25 = row.q50 = row.q75 = row.q975 = nan;
        return row;
    }
    // moments over the estimates in rep order; independent of completion order
    Moments m;
    double sq = 0;
    for (double e : ok) {
        m.add(e);
        sq += (e - truth) * (e - truth);
    }
    row.mean = m.mean;
    row.bias = m.mean - truth;
    row.sd = std::sqrt(m.variance());
    row.mc_se = row.sd / std::sqrt(static_cast<double>(ok.size()));
    row.mse = sq / static_cast<double>(ok.size());
    std::sort(ok.begin(), ok.end());
    row.q025 = quantile(ok, 0.025);
    row.q25 = quantile(ok, 0.25);
    row.q50 = quantile(ok, 0.5);
    row.q75 = quantile(ok, 0.75);
    row.q975 = quantile(ok, 0.975);
    return row;
}

BiasClass classify_bias(const ReportRow& row) {
    const double se = std::hypot(row.mc_se, row.truth_mc_se);
    const double b = std::fabs(row.bias);
    if (b <= 3.0 * se) return BiasClass::Unbiased;
    if (b >= 5.0 * se) return BiasClass::Biased;
    return BiasClass::Indeterminate;
}

const char* to_string(BiasClass c) {
    switch (c) {
    case BiasClass::Unbiased: return "unbiased";
    case BiasClass::Biased: return "biased";
    case BiasClass::Indeterminate: return "indeterminate";
    }
    return "?";
}

StudyReport run_study(const StudyConfig& config) {
    config.validate();
    StudyReport report;
    const std::size_t ne = config.estimators.size();
    for (CausalStructure scenario : config.scenarios) {
        sim::ScenarioSpec spec{scenario, config.alpha, config.beta, config.gamma, config.n, 2};

        std::map<sim::FixedIces, sim::OracleResult> truths;
        for (const auto& e : config.estimators) {
            const sim::FixedIces target = e.target();
            if (!truths.count(target)) {
                truths[target] = sim::true_effect_oracle(spec, target, config.oracle_n,
                                                         truth_seed(config.master_seed, scenario, target),
                                                         config.threads);
            }
        }

        std::vector<ReplicationResult> results(config.reps * ne);
        parallel_for(config.reps, config.threads, [&](std::size_t rep) {
            const Seed seed = replication_seed(config.master_seed, scenario, rep);
            const auto data = sim::generate_trial(spec, seed);
            for (std::size_t k = 0; k < ne; ++k) {
                est::EstimatorSpec es = config.estimators[k];
                es.seed = derive_seed(seed, {label_key("estimator"), label_key(es.name())});
                ReplicationResult& r = results[rep * ne + k];
                r.scenario = scenario;
                r.estimator = es.name();
                r.rep = rep;
                try {
                    const est::EffectEstimate e = est::run_estimator(es, std::span<const sim::TrialRecord>(data));
                    if (!std::isfinite(e.point)) throw NumericalError("non-finite estimate");
                    r.estimate = e.point;
                    r.diagnostics = e.diagnostics;
                } catch (const NumericalError& err) {
                    r.failed = true;
                    r.estimate = std::nan("");
                    r.reason = err.what();
                }
            }
        });

        for (std::size_t k = 0; k < ne; ++k) {
            std::vector<ReplicationResult> mine;
            mine.reserve(config.reps);
            for (std::size_t rep = 0; rep < config.reps; ++rep) mine.push_back(results[rep * ne + k]);
            const auto& truth = truths.at(config.estimators[k].target());
            ReportRow row = summarize(mine, truth.tau, truth.mc_se);
            if (row.failures * 100 >= config.reps && row.failures > 0) {
                throw NumericalError(std::string(graph::to_string(scenario)) + "/" + row.estimator + ": " +
                                     std::to_string(row.failures) + " of " + std::to_string(config.reps) +
                                     " replications failed (first: " +
                                     std::find_if(mine.begin(), mine.end(), [](auto& r) { return r.failed; })->reason +
                                     ")");
            }
            report.rows.push_back(row);
        }
        for (auto& r : results) report.replications.push_back(std::move(r));
    }
    return report;
}

namespace {

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

std::string json_number(double x) { return std::isfinite(x) ? fmt(x) : "null"; }

} // namespace

void write_replications_csv(std::ostream& out, const std::vector<ReplicationResult>& results) {
    out << "scenario,estimator,rep,estimate,failed,reason\n";
    for (const auto& r : results) {
        out << graph::to_string(r.scenario) << ',' << r.estimator << ',' << r.rep << ','
            << (r.failed ? std::string() : fmt(r.estimate)) << ',' << (r.failed ? 1 : 0) << ',' << csv_cell(r.reason)
            << '\n';
    }
}

void write_summary_json(std::ostream& out, const StudyReport& report) {
    out << "[\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const ReportRow& r = report.rows[i];
        out << "  {\"scenario\": " << json_string(std::string(graph::to_string(r.scenario)))
            << ", \"estimator\": " << json_string(r.estimator) << ", \"truth\": " << json_number(r.truth)
            << ", \"truth_mc_se\": " << json_number(r.truth_mc_se) << ", \"mean\": " << json_number(r.mean)
            << ", \"bias\": " << json_number(r.bias) << ", \"mc_se\": " << json_number(r.mc_se)
            << ", \"sd\": " << json_number(r.sd) << ", \"mse\": " << json_number(r.mse)
            << ", \"q025\": " << json_number(r.q025) << ", \"q25\": " << json_number(r.q25)
            << ", \"q50\": " << json_number(r.q50) << ", \"q75\": " << json_number(r.q75)
            << ", \"q975\": " << json_number(r.q975) << ", \"failures\": " << r.failures << "}"
            << (i + 1 < report.rows.size() ? ",\n" : "\n");
    }
    out << "]\n";
}

} // namespace icepath::harness
