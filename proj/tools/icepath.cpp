// icepath command-line front end.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "icepath/errors.hpp"
#include "icepath/estimators.hpp"
#include "icepath/graph.hpp"
#include "icepath/harness.hpp"
#include "icepath/io.hpp"

namespace {

using namespace icepath;
using io::fmt;

std::string json_str(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }
std::string json_num(double x) { return std::isfinite(x) ? fmt(x) : "null"; }

Seed env_seed() {
    const char* s = std::getenv("ICEPATH_SEED");
    if (!s || !*s) return 0;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != std::string(s).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("ICEPATH_SEED must be a non-negative integer, got '" + std::string(s) + "'");
    }
}

Seed seed_or_env(const CLI::Option* opt, Seed value) { return opt->count() ? value : env_seed(); }

graph::CausalStructure structure_flag(const std::string& flag, const std::string& value) {
    try {
        return graph::parse_structure(value);
    } catch (const ValidationError&) {
        throw ValidationError(flag + ": unknown structure '" + value + "' (independent, d-first, r-first)");
    }
}

struct GenerateArgs {
    std::string scenario = "independent";
    std::size_t n = 2000;
    Seed seed = 0;
    std::string out;
    double alpha = -1.0, beta = 0.25, gamma = 1.0;
    bool single = false;
    bool independent_noise = false;
    double d_effect = 1.0;
};

int run_generate(const GenerateArgs& g, const CLI::Option* seed_opt) {
    const Seed seed = seed_or_env(seed_opt, g.seed);
    std::ofstream file;
    if (!g.out.empty() && g.out != "-") {
        file.open(g.out);
        if (!file) throw ValidationError("--out: cannot write '" + g.out + "'");
    }
    std::ostream& out = file.is_open() ? file : std::cout;
    if (g.single) {
        sim::SinglePeriodSpec spec;
        spec.n = g.n;
        spec.shared_noise = !g.independent_noise;
        spec.y_d = g.d_effect;
        spec.validate();
        io::write_single_csv(out, sim::generate_single_period(spec, seed));
    } else {
        sim::ScenarioSpec spec{structure_flag("--scenario", g.scenario), g.alpha, g.beta, g.gamma, g.n, 2};
        spec.validate();
        io::write_trial_csv(out, sim::generate_trial(spec, seed));
    }
    return 0;
}

struct OracleArgs {
    std::string scenario = "independent";
    std::string fix = "r";
    std::size_t oracle_n = 1000000;
    Seed seed = 0;
    double alpha = -1.0, beta = 0.25, gamma = 1.0;
    unsigned threads = 0;
};

int run_oracle(const OracleArgs& o, const CLI::Option* seed_opt) {
    const Seed seed = seed_or_env(seed_opt, o.seed);
    sim::FixedIces fixed;
    if (o.fix == "r") fixed = sim::FixedIces::R;
    else if (o.fix == "rd") fixed = sim::FixedIces::RD;
    else if (o.fix == "none") fixed = sim::FixedIces::None;
    else throw ValidationError("--fix: expected r, rd or none, got '" + o.fix + "'");
    sim::ScenarioSpec spec{structure_flag("--scenario", o.scenario), o.alpha, o.beta, o.gamma, 2000, 2};
    spec.validate();
    const sim::OracleResult r = sim::true_effect_oracle(spec, fixed, o.oracle_n, seed, o.threads);
    std::cout << "{\"scenario\": " << json_str(graph::to_string(spec.structure)) << ", \"fix\": " << json_str(o.fix)
              << ", \"tau\": " << json_num(r.tau) << ", \"mc_se\": " << json_num(r.mc_se)
              << ", \"mean_treated\": " << json_num(r.mean_treated)
              << ", \"mean_control\": " << json_num(r.mean_control) << ", \"n_per_arm\": " << r.n_per_arm
              << ", \"seed\": " << seed << "}\n";
    return 0;
}

struct EstimateArgs {
    std::string data;
    std::string estimator;
    int m = 10;
    Seed seed = 0;
    bool interaction = false;
};

int run_estimate(const EstimateArgs& e, const CLI::Option* seed_opt) {
    est::EstimatorSpec spec = est::EstimatorSpec::parse(e.estimator);
    spec.m = e.m;
    spec.seed = seed_or_env(seed_opt, e.seed);
    spec.interaction = e.interaction;
    spec.validate();
    const est::Dataset data = io::read_dataset_file(e.data);
    const est::EffectEstimate r = est::run_estimator(spec, data);
    const auto& d = r.diagnostics;
    std::cout << "{\"estimator\": " << json_str(spec.name()) << ", \"point\": " << json_num(r.point)
              << ", \"variance\": " << (r.variance ? json_num(*r.variance) : "null")
              << ", \"retained\": " << d.retained << ", \"min_weight\": " << json_num(d.min_weight)
              << ", \"max_weight\": " << json_num(d.max_weight) << ", \"floored\": " << d.floored
              << ", \"models_converged\": " << (d.models_converged ? "true" : "false")
              << ", \"notes\": " << nlohmann::json(d.notes).dump() << "}\n";
    return 0;
}

struct SimulateArgs {
    std::string config;
    std::string out_dir;
    unsigned threads = 0;
};

int run_simulate(const SimulateArgs& s, const CLI::Option* threads_opt) {
    std::ifstream in(s.config);
    if (!in) throw ValidationError("--config: cannot open '" + s.config + "'");
    std::stringstream text;
    text << in.rdbuf();
    harness::StudyConfig config = harness::StudyConfig::from_json(text.str());
    bool has_seed = false;
    try {
        has_seed = nlohmann::json::parse(text.str()).contains("master_seed");
    } catch (const std::exception&) {
    }
    if (!has_seed) config.master_seed = env_seed();
    if (threads_opt->count()) config.threads = s.threads;

    std::filesystem::create_directories(s.out_dir);
    const harness::StudyReport report = harness::run_study(config);
    const auto dir = std::filesystem::path(s.out_dir);
    std::ofstream reps(dir / "replications.csv");
    std::ofstream summary(dir / "summary.json");
    if (!reps || !summary) throw ValidationError("--out-dir: cannot write into '" + s.out_dir + "'");
    harness::write_replications_csv(reps, report.replications);
    harness::write_summary_json(summary, report);
    for (const auto& row : report.rows) {
        std::cerr << graph::to_string(row.scenario) << ' ' << row.estimator << ": bias " << fmt(row.bias)
                  << " (mc se " << fmt(row.mc_se) << ", " << harness::to_string(harness::classify_bias(row))
                  << ")\n";
    }
    return 0;
}

struct GraphArgs {
    std::string structure = "independent";
    int periods = 2;
    bool check = false;
    bool unobserved = false;
};

int run_graph(const GraphArgs& g) {
    if (g.periods != 1 && g.periods != 2) throw ValidationError("--periods: must be 1 or 2");
    const auto structure = structure_flag("--structure", g.structure);
    std::cout << graph::scenario_dag(structure, g.periods, g.unobserved).to_text();
    const graph::AdjustmentPlan plan = graph::derive_adjustment_plan(structure, g.periods);
    std::cout << plan.to_text();
    if (g.check) {
        const bool ok = graph::check_exchangeability(structure, g.periods, plan, g.unobserved);
        std::cout << "exchangeability " << (ok ? "holds" : "fails") << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intercurrent-event estimand simulation and estimation"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Simulate one trial dataset and write it as CSV");
    generate->add_option("--scenario", gen.scenario, "independent, d-first or r-first")->capture_default_str();
    generate->add_option("--n", gen.n, "Number of subjects")->capture_default_str();
    auto* gen_seed = generate->add_option("--seed", gen.seed, "Seed (default: $ICEPATH_SEED, else 0)");
    generate->add_option("--out", gen.out, "Output CSV path (default: stdout)");
    generate->add_option("--alpha", gen.alpha, "ICE intercept")->capture_default_str();
    generate->add_option("--beta", gen.beta, "Covariate effect")->capture_default_str();
    generate->add_option("--gamma", gen.gamma, "ICE effect")->capture_default_str();
    generate->add_flag("--single-period", gen.single, "One-visit R -> D model with cross-world columns");
    generate->add_flag("--independent-noise", gen.independent_noise,
                       "One-visit model: fresh noise in each counterfactual world");
    generate->add_option("--d-effect", gen.d_effect, "One-visit model: effect of D on Y")->capture_default_str();

    OracleArgs orc;
    auto* oracle = app.add_subcommand("oracle", "Monte-Carlo truth of an estimand");
    oracle->add_option("--scenario", orc.scenario, "independent, d-first or r-first")->capture_default_str();
    oracle->add_option("--fix", orc.fix, "ICEs withheld: r, rd or none")->capture_default_str();
    oracle->add_option("--oracle-n", orc.oracle_n, "Subjects per arm")->capture_default_str();
    auto* orc_seed = oracle->add_option("--seed", orc.seed, "Seed (default: $ICEPATH_SEED, else 0)");
    oracle->add_option("--alpha", orc.alpha, "ICE intercept")->capture_default_str();
    oracle->add_option("--beta", orc.beta, "Covariate effect")->capture_default_str();
    oracle->add_option("--gamma", orc.gamma, "ICE effect")->capture_default_str();
    oracle->add_option("--threads", orc.threads, "Worker threads, 0 = all cores")->capture_default_str();

    EstimateArgs esa;
    std::string names;
    for (const auto& n : est::estimator_names()) names += (names.empty() ? "" : ", ") + n;
    auto* estimate = app.add_subcommand("estimate", "Apply one estimator to a CSV dataset");
    estimate->add_option("--data", esa.data, "Dataset CSV")->required();
    estimate->add_option("--estimator", esa.estimator, names)->required();
    estimate->add_option("--m", esa.m, "Imputations (MI estimators)")->capture_default_str();
    auto* est_seed = estimate->add_option("--seed", esa.seed, "MI seed (default: $ICEPATH_SEED, else 0)");
    estimate->add_flag("--interaction", esa.interaction, "crossworld: add D x L0 and D x L1 terms");

    SimulateArgs sma;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo study from a JSON config");
    simulate->add_option("--config", sma.config, "Study config JSON")->required();
    simulate->add_option("--out-dir", sma.out_dir, "Directory for replications.csv and summary.json")->required();
    auto* sim_threads = simulate->add_option("--threads", sma.threads, "Worker threads, 0 = all cores");

    GraphArgs gra;
    auto* graph_cmd = app.add_subcommand("graph", "Print the DAG and the adjustment plan");
    graph_cmd->add_option("--structure", gra.structure, "independent, d-first or r-first")->capture_default_str();
    graph_cmd->add_option("--periods", gra.periods, "1 or 2")->capture_default_str();
    graph_cmd->add_flag("--check-exchangeability", gra.check, "Verify the plan on the intervened graph");
    graph_cmd->add_flag("--unobserved", gra.unobserved, "Add unmeasured U_k -> D_k, R_k");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*generate) return run_generate(gen, gen_seed);
        if (*oracle) return run_oracle(orc, orc_seed);
        if (*estimate) return run_estimate(esa, est_seed);
        if (*simulate) return run_simulate(sma, sim_threads);
        if (*graph_cmd) return run_graph(gra);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
