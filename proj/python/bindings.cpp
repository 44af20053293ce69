#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "icepath/datagen.hpp"
#include "icepath/errors.hpp"
#include "icepath/estimators.hpp"
#include "icepath/graph.hpp"
#include "icepath/harness.hpp"
#include "icepath/io.hpp"
#include "icepath/numerics.hpp"

namespace py = pybind11;
using namespace icepath;

namespace {

using Columns = std::map<std::string, py::array_t<double>>;

template <typename Row>
py::array_t<double> column(const std::vector<Row>& rows, double (*get)(const Row&)) {
    py::array_t<double> out(static_cast<py::ssize_t>(rows.size()));
    auto v = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < rows.size(); ++i) v(static_cast<py::ssize_t>(i)) = get(rows[i]);
    return out;
}

py::dict trial_columns(const std::vector<sim::TrialRecord>& rows) {
    using R = sim::TrialRecord;
    py::dict d;
    d["l0"] = column<R>(rows, [](const R& r) { return r.l0; });
    d["a"] = column<R>(rows, [](const R& r) { return double(r.a); });
    d["l1"] = column<R>(rows, [](const R& r) { return r.l1; });
    d["d1"] = column<R>(rows, [](const R& r) { return double(r.d1); });
    d["r1"] = column<R>(rows, [](const R& r) { return double(r.r1); });
    d["l2"] = column<R>(rows, [](const R& r) { return r.l2; });
    d["d2"] = column<R>(rows, [](const R& r) { return double(r.d2); });
    d["r2"] = column<R>(rows, [](const R& r) { return double(r.r2); });
    d["y"] = column<R>(rows, [](const R& r) { return r.y; });
    return d;
}

py::dict single_columns(const std::vector<sim::SinglePeriodRecord>& rows) {
    using R = sim::SinglePeriodRecord;
    py::dict d;
    d["l0"] = column<R>(rows, [](const R& r) { return r.l0; });
    d["a"] = column<R>(rows, [](const R& r) { return double(r.a); });
    d["l1"] = column<R>(rows, [](const R& r) { return r.l1; });
    d["r"] = column<R>(rows, [](const R& r) { return double(r.r); });
    d["d"] = column<R>(rows, [](const R& r) { return double(r.d); });
    d["y"] = column<R>(rows, [](const R& r) { return r.y; });
    d["d_a_r0"] = column<R>(rows, [](const R& r) { return double(r.d_a_r0); });
    d["d_a_r1"] = column<R>(rows, [](const R& r) { return double(r.d_a_r1); });
    d["y_a_r0_d0"] = column<R>(rows, [](const R& r) { return r.y_a_r0_d0; });
    d["y_a_r0_d1"] = column<R>(rows, [](const R& r) { return r.y_a_r0_d1; });
    return d;
}

int as_binary(double v, const std::string& col) {
    if (v != 0.0 && v != 1.0) throw ValidationError("column " + col + " must be 0 or 1");
    return static_cast<int>(v);
}

// Columns -> records, via the CSV reader so both paths validate identically.
est::Dataset to_dataset(const Columns& cols) {
    const bool trial = cols.count("r1") > 0;
    const std::vector<std::string> names = trial ? std::vector<std::string>{"l0", "a", "l1", "d1", "r1", "l2", "d2", "r2", "y"}
                                                 : std::vector<std::string>{"l0", "a", "l1", "r", "d", "y"};
    std::vector<py::detail::unchecked_reference<double, 1>> views;
    py::ssize_t n = -1;
    for (const auto& name : names) {
        auto it = cols.find(name);
        if (it == cols.end()) throw ValidationError("missing column '" + name + "'");
        if (n >= 0 && it->second.size() != n) throw ValidationError("columns differ in length");
        n = it->second.size();
        views.push_back(it->second.unchecked<1>());
    }
    if (trial) {
        std::vector<sim::TrialRecord> rows(static_cast<std::size_t>(n));
        for (py::ssize_t i = 0; i < n; ++i) {
            auto& r = rows[static_cast<std::size_t>(i)];
            r = {views[0](i), as_binary(views[1](i), "a"), views[2](i), as_binary(views[3](i), "d1"),
                 as_binary(views[4](i), "r1"), views[5](i), as_binary(views[6](i), "d2"), as_binary(views[7](i), "r2"),
                 views[8](i)};
        }
        return rows;
    }
    std::vector<sim::SinglePeriodRecord> rows(static_cast<std::size_t>(n));
    for (py::ssize_t i = 0; i < n; ++i) {
        auto& r = rows[static_cast<std::size_t>(i)];
        r.l0 = views[0](i);
        r.a = as_binary(views[1](i), "a");
        r.l1 = views[2](i);
        r.r = as_binary(views[3](i), "r");
        r.d = as_binary(views[4](i), "d");
        r.y = views[5](i);
    }
    return rows;
}

sim::FixedIces parse_fix(const std::string& fix) {
    if (fix == "r") return sim::FixedIces::R;
    if (fix == "rd") return sim::FixedIces::RD;
    if (fix == "none") return sim::FixedIces::None;
    throw ValidationError("fix must be r, rd or none");
}

py::dict row_dict(const harness::ReportRow& r) {
    py::dict d;
    d["scenario"] = std::string(graph::to_string(r.scenario));
    d["estimator"] = r.estimator;
    d["truth"] = r.truth;
    d["truth_mc_se"] = r.truth_mc_se;
    d["mean"] = r.mean;
    d["bias"] = r.bias;
    d["mc_se"] = r.mc_se;
    d["sd"] = r.sd;
    d["mse"] = r.mse;
    d["q025"] = r.q025;
    d["q25"] = r.q25;
    d["q50"] = r.q50;
    d["q75"] = r.q75;
    d["q975"] = r.q975;
    d["failures"] = r.failures;
    d["classification"] = harness::to_string(harness::classify_bias(r));
    return d;
}

} // namespace

PYBIND11_MODULE(_icepath, m) {
    m.doc() = "Intercurrent-event estimand simulation and estimation";

    static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
    static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            py::set_error(validation, e.what());
        } catch (const NumericalError& e) {
            py::set_error(numerical, e.what());
        }
    });

    m.def("estimator_names", &est::estimator_names);

    m.def(
        "generate_trial",
        [](const std::string& scenario, std::size_t n, Seed seed, double alpha, double beta, double gamma) {
            sim::ScenarioSpec spec{graph::parse_structure(scenario), alpha, beta, gamma, n, 2};
            return trial_columns(sim::generate_trial(spec, seed));
        },
        py::arg("scenario"), py::arg("n") = 2000, py::arg("seed") = 0, py::arg("alpha") = -1.0,
        py::arg("beta") = 0.25, py::arg("gamma") = 1.0, "Simulate a two-visit trial; returns a dict of columns.");

    m.def(
        "generate_single_period",
        [](std::size_t n, Seed seed, bool shared_noise, double d_effect) {
            sim::SinglePeriodSpec spec;
            spec.n = n;
            spec.shared_noise = shared_noise;
            spec.y_d = d_effect;
            return single_columns(sim::generate_single_period(spec, seed));
        },
        py::arg("n") = 2000, py::arg("seed") = 0, py::arg("shared_noise") = true, py::arg("d_effect") = 1.0);

    m.def(
        "true_effect",
        [](const std::string& scenario, const std::string& fix, std::size_t oracle_n, Seed seed, double alpha,
           double beta, double gamma, unsigned threads) {
            sim::ScenarioSpec spec{graph::parse_structure(scenario), alpha, beta, gamma, 2000, 2};
            const sim::OracleResult r = sim::true_effect_oracle(spec, parse_fix(fix), oracle_n, seed, threads);
            py::dict d;
            d["tau"] = r.tau;
            d["mc_se"] = r.mc_se;
            d["mean_treated"] = r.mean_treated;
            d["mean_control"] = r.mean_control;
            d["n_per_arm"] = r.n_per_arm;
            return d;
        },
        py::arg("scenario"), py::arg("fix") = "r", py::arg("oracle_n") = 1000000, py::arg("seed") = 0,
        py::arg("alpha") = -1.0, py::arg("beta") = 0.25, py::arg("gamma") = 1.0, py::arg("threads") = 0);

    m.def(
        "estimate",
        [](const Columns& data, const std::string& estimator, int m_imputations, Seed seed, bool interaction) {
            est::EstimatorSpec spec = est::EstimatorSpec::parse(estimator);
            spec.m = m_imputations;
            spec.seed = seed;
            spec.interaction = interaction;
            const est::EffectEstimate e = est::run_estimator(spec, to_dataset(data));
            py::dict d;
            d["point"] = e.point;
            d["variance"] = e.variance ? py::cast(*e.variance) : py::none();
            d["retained"] = e.diagnostics.retained;
            d["min_weight"] = e.diagnostics.min_weight;
            d["max_weight"] = e.diagnostics.max_weight;
            d["floored"] = e.diagnostics.floored;
            d["models_converged"] = e.diagnostics.models_converged;
            return d;
        },
        py::arg("data"), py::arg("estimator"), py::arg("m") = 10, py::arg("seed") = 0, py::arg("interaction") = false,
        "Apply a named estimator to a dict of columns.");

    m.def(
        "run_study",
        [](const std::string& config_json) {
            const auto config = harness::StudyConfig::from_json(config_json);
            harness::StudyReport report;
            {
                py::gil_scoped_release release;
                report = harness::run_study(config);
            }
            py::list rows;
            for (const auto& r : report.rows) rows.append(row_dict(r));
            std::ostringstream csv;
            harness::write_replications_csv(csv, report.replications);
            return py::make_tuple(rows, csv.str());
        },
        py::arg("config_json"), "Run a study; returns (summary rows, replications CSV text).");

    m.def(
        "scenario_graph",
        [](const std::string& structure, int periods, bool unobserved) {
            return graph::scenario_dag(graph::parse_structure(structure), periods, unobserved).to_text();
        },
        py::arg("structure"), py::arg("periods") = 2, py::arg("unobserved") = false);

    m.def(
        "adjustment_plan",
        [](const std::string& structure, int periods) {
            const auto plan = graph::derive_adjustment_plan(graph::parse_structure(structure), periods);
            py::dict d;
            py::list per;
            for (const auto& p : plan.per_period) {
                py::dict e;
                e["period"] = p.period;
                e["r_model_covariates"] = p.r_model_covariates;
                e["deleted_when_r"] = p.deleted_when_r;
                per.append(e);
            }
            py::list order;
            for (const auto& s : plan.imputation_order) {
                order.append(py::make_tuple(s.variable, s.covariates, s.binary));
            }
            d["per_period"] = per;
            d["imputation_order"] = order;
            d["text"] = plan.to_text();
            return d;
        },
        py::arg("structure"), py::arg("periods") = 2);

    m.def(
        "check_exchangeability",
        [](const std::string& structure, int periods, bool unobserved) {
            const auto s = graph::parse_structure(structure);
            return graph::check_exchangeability(s, periods, graph::derive_adjustment_plan(s, periods), unobserved);
        },
        py::arg("structure"), py::arg("periods") = 2, py::arg("unobserved") = false);

    m.def(
        "d_separated",
        [](const std::vector<std::pair<std::string, std::string>>& edges, const std::string& x, const std::string& y,
           const std::set<std::string>& given) {
            std::set<std::string> names{x, y};
            names.insert(given.begin(), given.end());
            std::vector<graph::Edge> es;
            for (const auto& [p, c] : edges) {
                names.insert(p);
                names.insert(c);
                es.push_back({p, c});
            }
            std::vector<graph::NodeSpec> nodes;
            for (const auto& n : names) nodes.push_back({n});
            return graph::d_separated(graph::CausalGraph(nodes, es), x, y, given);
        },
        py::arg("edges"), py::arg("x"), py::arg("y"), py::arg("given") = std::set<std::string>{});

    m.def(
        "rubins_pool",
        [](const std::vector<double>& estimates, const std::vector<double>& variances) {
            const auto p = stats::rubins_pool(estimates, variances);
            py::dict d;
            d["point"] = p.point;
            d["within"] = p.within_var;
            d["between"] = p.between_var;
            d["total"] = p.total_var;
            return d;
        },
        py::arg("estimates"), py::arg("variances"));
}
