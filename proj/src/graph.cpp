#include "icepath/graph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <deque>
#include <sstream>

#include "icepath/errors.hpp"

namespace icepath::graph {

std::string_view to_string(CausalStructure s) {
    switch (s) {
    case CausalStructure::NoCrossEffects: return "independent";
    case CausalStructure::DPrecedesR: return "d-first";
    case CausalStructure::RPrecedesD: return "r-first";
    }
    return "?";
}

CausalStructure parse_structure(std::string_view alias) {
    for (CausalStructure s : kAllStructures) {
        if (to_string(s) == alias) return s;
    }
    throw ValidationError("unknown causal structure '" + std::string(alias) +
                          "' (expected independent, d-first or r-first)");
}

// ---------------------------------------------------------------------------
// CausalGraph

CausalGraph::CausalGraph(std::vector<NodeSpec> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].name.empty()) throw ValidationError("node names must be nonempty");
        if (!index_.emplace(nodes_[i].name, i).second) {
            throw ValidationError("duplicate node '" + nodes_[i].name + "'");
        }
    }
    parents_.assign(nodes_.size(), {});
    children_.assign(nodes_.size(), {});
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const Edge& e : edges_) {
        auto p = index_.find(e.parent);
        auto c = index_.find(e.child);
        if (p == index_.end() || c == index_.end()) {
            throw ValidationError("edge " + e.parent + " -> " + e.child + " references a missing node");
        }
        if (p->second == c->second) throw ValidationError("self-loop on '" + e.parent + "'");
        if (!seen.emplace(p->second, c->second).second) {
            throw ValidationError("duplicate edge " + e.parent + " -> " + e.child);
        }
        children_[p->second].push_back(c->second);
        parents_[c->second].push_back(p->second);
    }
    if (topological_order().size() != nodes_.size()) throw ValidationError("graph contains a cycle");
}

bool CausalGraph::has_node(std::string_view name) const { return index_.find(name) != index_.end(); }

bool CausalGraph::has_edge(std::string_view parent, std::string_view child) const {
    if (!has_node(parent) || !has_node(child)) return false;
    const auto& ch = children_[index(parent)];
    return std::find(ch.begin(), ch.end(), index(child)) != ch.end();
}

std::size_t CausalGraph::index(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown node '" + std::string(name) + "'");
    return it->second;
}

NodeKind CausalGraph::kind(std::string_view name) const { return nodes_[index(name)].kind; }

std::vector<NodeId> CausalGraph::parents(std::string_view name) const {
    std::vector<NodeId> out;
    for (std::size_t p : parents_[index(name)]) out.push_back(nodes_[p].name);
    return out;
}

std::vector<NodeId> CausalGraph::children(std::string_view name) const {
    std::vector<NodeId> out;
    for (std::size_t c : children_[index(name)]) out.push_back(nodes_[c].name);
    return out;
}

namespace {

std::set<NodeId> reach(const CausalGraph& g, std::size_t start,
                       const std::vector<std::size_t>& (CausalGraph::*next)(std::size_t) const) {
    std::set<NodeId> out;
    std::vector<bool> seen(g.size(), false);
    std::vector<std::size_t> stack{start};
    while (!stack.empty()) {
        std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t w : (g.*next)(v)) {
            if (!seen[w]) {
                seen[w] = true;
                out.insert(g.name(w));
                stack.push_back(w);
            }
        }
    }
    return out;
}

} // namespace

std::set<NodeId> CausalGraph::descendants(std::string_view name) const {
    return reach(*this, index(name), &CausalGraph::children);
}

std::set<NodeId> CausalGraph::ancestors(std::string_view name) const {
    return reach(*this, index(name), &CausalGraph::parents);
}

std::vector<NodeId> CausalGraph::topological_order() const {
    // Kahn's algorithm, ties broken by declaration order.
    std::vector<std::size_t> indegree(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) indegree[i] = parents_[i].size();
    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (indegree[i] == 0) ready.push_back(i);
    }
    std::vector<NodeId> order;
    while (!ready.empty()) {
        std::size_t v = ready.front();
        ready.pop_front();
        order.push_back(nodes_[v].name);
        for (std::size_t c : children_[v]) {
            if (--indegree[c] == 0) ready.push_back(c);
        }
    }
    return order;
}

std::string CausalGraph::to_text() const {
    std::ostringstream out;
    for (const NodeSpec& n : nodes_) {
        out << "node " << n.name << (n.kind == NodeKind::Observed ? " observed" : " unobserved") << '\n';
    }
    for (const Edge& e : edges_) out << e.parent << " -> " << e.child << '\n';
    return out.str();
}

CausalGraph CausalGraph::from_text(std::string_view text) {
    std::vector<NodeSpec> nodes;
    std::vector<Edge> edges;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream words(line);
        std::vector<std::string> tok;
        for (std::string w; words >> w;) tok.push_back(w);
        if (tok.empty() || tok[0].starts_with('#')) continue;
        if (tok.size() == 3 && tok[0] == "node" && (tok[2] == "observed" || tok[2] == "unobserved")) {
            nodes.push_back({tok[1], tok[2] == "observed" ? NodeKind::Observed : NodeKind::Unobserved});
        } else if (tok.size() == 3 && tok[1] == "->") {
            edges.push_back({tok[0], tok[2]});
        } else if (tok.size() == 3 && tok[0] == "label") {
            continue; // SWIG labels are derived, not parsed
        } else {
            throw ValidationError("graph text line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
        }
    }
    return CausalGraph(std::move(nodes), std::move(edges));
}

bool operator==(const CausalGraph& a, const CausalGraph& b) {
    if (a.size() != b.size()) return false;
    for (const NodeSpec& n : a.nodes_) {
        if (!b.has_node(n.name) || b.kind(n.name) != n.kind) return false;
    }
    auto ea = a.edges_;
    auto eb = b.edges_;
    std::sort(ea.begin(), ea.end());
    std::sort(eb.begin(), eb.end());
    return ea == eb;
}

// ---------------------------------------------------------------------------
// SWIG

std::string PotentialOutcomeLabel::render() const {
    if (interventions.empty()) return base;
    std::string out = base + "^{";
    bool first = true;
    for (const auto& [node, value] : interventions) {
        if (!first) out += ',';
        first = false;
        std::string lower = node;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        out += (value == lower) ? value : lower + "=" + value;
    }
    return out + "}";
}

NodeId Swig::fixed_name(std::string_view node, std::string_view value) {
    return std::string(node) + "=" + std::string(value);
}

bool Swig::is_fixed(std::string_view node) const {
    for (const auto& [n, v] : interventions_) {
        if (fixed_name(n, v) == node) return true;
    }
    return false;
}

std::vector<NodeId> Swig::fixed_nodes() const {
    std::vector<NodeId> out;
    for (const auto& [n, v] : interventions_) out.push_back(fixed_name(n, v));
    return out;
}

const PotentialOutcomeLabel& Swig::label(std::string_view node) const {
    auto it = labels_.find(node);
    if (it == labels_.end()) throw ValidationError("unknown SWIG node '" + std::string(node) + "'");
    return it->second;
}

Swig Swig::intervene(const InterventionMap& more) const {
    InterventionMap merged = interventions_;
    for (const auto& [node, value] : more) {
        auto [it, inserted] = merged.emplace(node, value);
        if (!inserted && it->second != value) {
            throw ValidationError("node '" + node + "' is already fixed to " + it->second);
        }
    }
    return swig_transform(base_, merged);
}

std::string Swig::to_text() const {
    std::string out = graph_.to_text();
    for (const NodeSpec& n : graph_.nodes()) {
        out += "label " + n.name + " " + labels_.at(n.name).render() + "\n";
    }
    return out;
}

Swig swig_transform(const CausalGraph& g, const InterventionMap& interventions) {
    for (const auto& [node, value] : interventions) {
        if (!g.has_node(node)) throw ValidationError("intervention on nonexistent node '" + node + "'");
        if (value.empty()) throw ValidationError("empty intervention value for '" + node + "'");
    }
    std::vector<NodeSpec> nodes = g.nodes();
    for (const auto& [node, value] : interventions) {
        nodes.push_back({Swig::fixed_name(node, value), NodeKind::Observed});
    }
    std::vector<Edge> edges;
    for (const Edge& e : g.edges()) {
        auto it = interventions.find(e.parent);
        if (it == interventions.end()) {
            edges.push_back(e);
        } else {
            edges.push_back({Swig::fixed_name(e.parent, it->second), e.child});
        }
    }

    Swig s;
    s.base_ = g;
    s.graph_ = CausalGraph(std::move(nodes), std::move(edges));
    s.interventions_ = interventions;
    for (const NodeSpec& n : s.graph_.nodes()) {
        PotentialOutcomeLabel label;
        if (s.is_fixed(n.name)) {
            // fixed halves are labelled by their set value
            label.base = n.name;
        } else {
            label.base = n.name;
            std::set<NodeId> anc = s.graph_.ancestors(n.name);
            for (const auto& [node, value] : interventions) {
                if (anc.count(Swig::fixed_name(node, value))) label.interventions.emplace_back(node, value);
            }
        }
        s.labels_.emplace(n.name, std::move(label));
    }
    return s;
}

// ---------------------------------------------------------------------------
// d-separation

bool d_separated(const CausalGraph& g, std::string_view x, std::string_view y,
                 const std::set<NodeId>& z) {
    const std::size_t xi = g.index(x);
    const std::size_t yi = g.index(y);
    std::vector<bool> in_z(g.size(), false);
    for (const NodeId& n : z) in_z[g.index(n)] = true;
    if (in_z[xi] || in_z[yi]) throw ValidationError("d_separated: query nodes must not be in the conditioning set");
    if (xi == yi) return false;

    // Nodes that are in z or have a descendant in z.
    std::vector<bool> anc_z(g.size(), false);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (in_z[i]) {
            anc_z[i] = true;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t p : g.parents(v)) {
            if (!anc_z[p]) {
                anc_z[p] = true;
                stack.push_back(p);
            }
        }
    }

    // Traverse (node, direction): up = entered from a child, down = entered
    // from a parent.
    enum Dir : int { Up = 0, Down = 1 };
    std::vector<std::array<bool, 2>> visited(g.size(), {false, false});
    std::vector<std::pair<std::size_t, Dir>> queue{{xi, Up}};
    while (!queue.empty()) {
        auto [v, dir] = queue.back();
        queue.pop_back();
        if (visited[v][dir]) continue;
        visited[v][dir] = true;
        if (v == yi) return false;
        if (dir == Up) {
            if (in_z[v]) continue;
            for (std::size_t p : g.parents(v)) queue.emplace_back(p, Up);
            for (std::size_t c : g.children(v)) queue.emplace_back(c, Down);
        } else {
            if (!in_z[v]) {
                for (std::size_t c : g.children(v)) queue.emplace_back(c, Down);
            }
            if (anc_z[v]) {
                for (std::size_t p : g.parents(v)) queue.emplace_back(p, Up);
            }
        }
    }
    return true;
}

bool d_separated(const Swig& g, std::string_view x, std::string_view y, const std::set<NodeId>& z) {
    // a constant is independent of everything
    if (g.is_fixed(x) || g.is_fixed(y)) return true;
    std::set<NodeId> cond = z;
    for (const NodeId& f : g.fixed_nodes()) cond.insert(f);
    return d_separated(g.graph(), x, y, cond);
}

// ---------------------------------------------------------------------------
// Trial DAGs and adjustment plans

namespace {

void require_periods(int periods) {
    if (periods != 1 && periods != 2) {
        throw ValidationError("unsupported period count " + std::to_string(periods) + " (expected 1 or 2)");
    }
}

std::string at(const char* var, int k) { return std::string(var) + std::to_string(k); }

} // namespace

CausalGraph scenario_dag(CausalStructure structure, int periods, bool with_unobserved) {
    require_periods(periods);
    std::vector<NodeSpec> nodes{{"L0"}, {"A"}};
    std::vector<Edge> edges;
    auto add = [&edges](const std::string& p, const std::string& c) { edges.push_back({p, c}); };

    for (int k = 1; k <= periods; ++k) {
        nodes.push_back({at("L", k)});
        if (structure == CausalStructure::RPrecedesD) {
            nodes.push_back({at("R", k)});
            nodes.push_back({at("D", k)});
        } else {
            nodes.push_back({at("D", k)});
            nodes.push_back({at("R", k)});
        }
    }
    nodes.push_back({"Y"});

    // Everything measured before visit k's ICEs affects L_k, D_k, R_k and Y.
    for (int k = 1; k <= periods; ++k) {
        const std::string l = at("L", k), d = at("D", k), r = at("R", k);
        std::vector<std::string> history{"L0", "A"};
        for (int j = 1; j < k; ++j) {
            history.push_back(at("L", j));
            history.push_back(at("D", j));
            history.push_back(at("R", j));
        }
        for (const auto& h : history) {
            // D_j -> R_k and R_j -> D_k for j < k are structure-specific
            const bool cross_d_to_r = h[0] == 'D';
            const bool cross_r_to_d = h[0] == 'R';
            add(h, l);
            if (!cross_r_to_d) add(h, d);
            if (!cross_d_to_r) add(h, r);
        }
        // L_{j<k} -> D_k, R_k already covered by the history loop above
        add(l, d);
        add(l, r);
    }
    // The history loop added L_j -> L_k, D_j -> L_k, R_j -> L_k, D_j -> D_k and
    // R_j -> R_k; the cross edges come next.
    for (int k = 1; k <= periods; ++k) {
        const std::string d = at("D", k), r = at("R", k);
        switch (structure) {
        case CausalStructure::NoCrossEffects: break;
        case CausalStructure::DPrecedesR:
            for (int j = 1; j <= k; ++j) add(at("D", j), r);
            for (int j = 1; j < k; ++j) add(at("R", j), d);
            break;
        case CausalStructure::RPrecedesD:
            for (int j = 1; j <= k; ++j) add(at("R", j), d);
            for (int j = 1; j < k; ++j) add(at("D", j), r);
            break;
        }
    }
    const std::vector<std::string> before_y = [&] {
        std::vector<std::string> v{"L0", "A"};
        for (int k = 1; k <= periods; ++k) {
            v.push_back(at("L", k));
            v.push_back(at("D", k));
            v.push_back(at("R", k));
        }
        return v;
    }();
    for (const auto& v : before_y) add(v, "Y");

    if (with_unobserved) {
        for (int k = 1; k <= periods; ++k) {
            const std::string u = periods == 1 ? "U" : at("U", k);
            nodes.push_back({u, NodeKind::Unobserved});
            add(u, at("D", k));
            add(u, at("R", k));
        }
    }
    return CausalGraph(std::move(nodes), std::move(edges));
}

AdjustmentPlan derive_adjustment_plan(CausalStructure structure, int periods) {
    require_periods(periods);
    AdjustmentPlan plan;
    plan.structure = structure;
    plan.periods = periods;

    // D_k enters at visit k when it precedes R_k, at visit k+1 when it
    // follows R_k, and not at all when the two ICEs are unrelated.
    for (int k = 1; k <= periods; ++k) {
        PeriodPlan p;
        p.period = k;
        p.r_model_covariates = {"A", "L0"};
        for (int j = 1; j <= k; ++j) p.r_model_covariates.push_back(at("L", j));
        if (structure == CausalStructure::DPrecedesR) {
            for (int j = 1; j <= k; ++j) p.r_model_covariates.push_back(at("D", j));
        } else if (structure == CausalStructure::RPrecedesD) {
            for (int j = 1; j < k; ++j) p.r_model_covariates.push_back(at("D", j));
        }
        for (int j = k; j <= periods; ++j) {
            if (structure == CausalStructure::RPrecedesD) p.deleted_when_r.push_back(at("D", j));
            if (j > k) {
                p.deleted_when_r.push_back(at("L", j));
                if (structure == CausalStructure::DPrecedesR) p.deleted_when_r.push_back(at("D", j));
            }
        }
        p.deleted_when_r.push_back("Y");
        // temporal order within the deletion list
        std::sort(p.deleted_when_r.begin(), p.deleted_when_r.end(), [](const NodeId& a, const NodeId& b) {
            auto rank = [](const NodeId& n) {
                if (n == "Y") return 100;
                return 10 * (n[1] - '0') + (n[0] == 'L' ? 0 : 1);
            };
            return rank(a) < rank(b);
        });
        plan.per_period.push_back(std::move(p));
    }

    // Sequential imputation follows time order; covariates are everything
    // earlier that the structure says must be adjusted for.
    const bool uses_d = structure != CausalStructure::NoCrossEffects;
    std::vector<NodeId> history{"A", "L0", "L1"};
    if (structure == CausalStructure::DPrecedesR) history.push_back("D1");
    if (structure == CausalStructure::RPrecedesD) {
        plan.imputation_order.push_back({"D1", history, true});
        history.push_back("D1");
    }
    for (int k = 2; k <= periods; ++k) {
        const NodeId l = at("L", k);
        plan.imputation_order.push_back({l, history, false});
        history.push_back(l);
        if (uses_d) {
            const NodeId d = at("D", k);
            plan.imputation_order.push_back({d, history, true});
            history.push_back(d);
        }
    }
    plan.imputation_order.push_back({"Y", history, false});
    return plan;
}

std::string AdjustmentPlan::to_text() const {
    std::ostringstream out;
    auto list = [&out](const std::vector<NodeId>& v) {
        out << '{';
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
        out << '}';
    };
    out << "structure " << to_string(structure) << '\n';
    for (const PeriodPlan& p : per_period) {
        out << "R" << p.period << " model covariates ";
        list(p.r_model_covariates);
        out << '\n' << "R" << p.period << "=1 deletes ";
        list(p.deleted_when_r);
        out << '\n';
    }
    for (std::size_t i = 0; i < imputation_order.size(); ++i) {
        const ImputationStep& s = imputation_order[i];
        out << "impute " << i + 1 << ' ' << s.variable << (s.binary ? " (logistic) " : " (linear) ");
        list(s.covariates);
        out << '\n';
    }
    return out.str();
}

bool check_exchangeability(CausalStructure structure, int periods, const AdjustmentPlan& plan,
                           bool with_unobserved) {
    const CausalGraph g = scenario_dag(structure, periods, with_unobserved);
    InterventionMap iv{{"A", "a"}};
    for (int k = 1; k <= periods; ++k) iv.emplace(at("R", k), "0");
    const Swig swig = swig_transform(g, iv);
    for (const PeriodPlan& p : plan.per_period) {
        std::set<NodeId> z{"A"};
        for (const NodeId& c : p.r_model_covariates) {
            if (!g.has_node(c)) throw ValidationError("plan covariate '" + c + "' is not in the scenario graph");
            z.insert(c);
        }
        if (!d_separated(swig, at("R", p.period), "Y", z)) return false;
    }
    return true;
}

} // namespace icepath::graph
