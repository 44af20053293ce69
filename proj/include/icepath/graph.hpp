#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace icepath::graph {

using NodeId = std::string;

enum class NodeKind { Observed, Unobserved };

struct NodeSpec {
    NodeId name;
    NodeKind kind = NodeKind::Observed;
};

struct Edge {
    NodeId parent;
    NodeId child;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Causal structure relating the two intercurrent events.
enum class CausalStructure {
    NoCrossEffects, ///< D_k and R_k do not affect each other
    DPrecedesR,     ///< D_k precedes and affects R_k
    RPrecedesD,     ///< R_k precedes and affects D_k
};

/// CLI alias: independent, d-first, r-first.
std::string_view to_string(CausalStructure s);
CausalStructure parse_structure(std::string_view alias);
inline constexpr CausalStructure kAllStructures[] = {
    CausalStructure::NoCrossEffects, CausalStructure::DPrecedesR, CausalStructure::RPrecedesD};

/// Immutable labelled DAG. Construction validates acyclicity, node
/// uniqueness, edge endpoints, self-loops and duplicate edges.
class CausalGraph {
public:
    CausalGraph() = default;
    CausalGraph(std::vector<NodeSpec> nodes, std::vector<Edge> edges);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<NodeSpec>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_node(std::string_view name) const;
    bool has_edge(std::string_view parent, std::string_view child) const;
    NodeKind kind(std::string_view name) const;

    /// Index of a node; throws ValidationError for unknown names.
    std::size_t index(std::string_view name) const;
    const NodeId& name(std::size_t i) const { return nodes_[i].name; }
    const std::vector<std::size_t>& parents(std::size_t i) const { return parents_[i]; }
    const std::vector<std::size_t>& children(std::size_t i) const { return children_[i]; }

    std::vector<NodeId> parents(std::string_view name) const;
    std::vector<NodeId> children(std::string_view name) const;
    std::set<NodeId> descendants(std::string_view name) const;
    std::set<NodeId> ancestors(std::string_view name) const;
    std::vector<NodeId> topological_order() const;

    /// "node X observed|unobserved" lines followed by "parent -> child" lines.
    std::string to_text() const;
    static CausalGraph from_text(std::string_view text);

    friend bool operator==(const CausalGraph& a, const CausalGraph& b);

private:
    std::vector<NodeSpec> nodes_;
    std::vector<Edge> edges_;
    std::map<NodeId, std::size_t, std::less<>> index_;
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::vector<std::size_t>> children_;
};

/// Potential-outcome label: base variable plus the sorted interventions
/// that reach it, e.g. Y^{a,r1=0,r2=0}.
struct PotentialOutcomeLabel {
    NodeId base;
    std::vector<std::pair<NodeId, std::string>> interventions;
    std::string render() const;
    friend bool operator==(const PotentialOutcomeLabel&, const PotentialOutcomeLabel&) = default;
};

using InterventionMap = std::map<NodeId, std::string>;

/// Single-world intervention graph. Each intervened node X is split into a
/// random half (named X, keeps incoming edges) and a fixed half (named
/// "X=value", keeps outgoing edges).
class Swig {
public:
    const CausalGraph& base() const { return base_; }
    const CausalGraph& graph() const { return graph_; }
    const InterventionMap& interventions() const { return interventions_; }

    bool is_fixed(std::string_view node) const;
    std::vector<NodeId> fixed_nodes() const;
    static NodeId fixed_name(std::string_view node, std::string_view value);
    const PotentialOutcomeLabel& label(std::string_view node) const;

    /// Intervene on further nodes. Re-intervening on a node with the same
    /// value is a no-op; a conflicting value is a ValidationError.
    Swig intervene(const InterventionMap& more) const;

    /// Graph text plus "label X X^{...}" lines.
    std::string to_text() const;

private:
    friend Swig swig_transform(const CausalGraph&, const InterventionMap&);
    CausalGraph base_;
    CausalGraph graph_;
    InterventionMap interventions_;
    std::map<NodeId, PotentialOutcomeLabel, std::less<>> labels_;
};

Swig swig_transform(const CausalGraph& g, const InterventionMap& interventions);

/// d-separation of x and y given z (Bayes-ball reachability).
bool d_separated(const CausalGraph& g, std::string_view x, std::string_view y,
                 const std::set<NodeId>& z);

/// Fixed nodes are constants: they are added to the conditioning set.
bool d_separated(const Swig& g, std::string_view x, std::string_view y, const std::set<NodeId>& z);

/// DAG of the longitudinal trial (periods = 2) or its one-visit analogue
/// (periods = 1). Node names: L0, A, L1, D1, R1 [, L2, D2, R2], Y, and U
/// when `with_unobserved` adds a per-visit unmeasured common cause U_k of
/// D_k and R_k (named U when periods = 1).
CausalGraph scenario_dag(CausalStructure structure, int periods, bool with_unobserved = false);

struct ImputationStep {
    NodeId variable;
    std::vector<NodeId> covariates;
    bool binary = false;
};

struct PeriodPlan {
    int period = 1;
    /// Covariates of the model for R_period.
    std::vector<NodeId> r_model_covariates;
    /// Variables set to missing when R_period = 1.
    std::vector<NodeId> deleted_when_r;
};

struct AdjustmentPlan {
    CausalStructure structure = CausalStructure::NoCrossEffects;
    int periods = 2;
    std::vector<PeriodPlan> per_period;
    std::vector<ImputationStep> imputation_order;

    std::string to_text() const;
};

AdjustmentPlan derive_adjustment_plan(CausalStructure structure, int periods);

/// For each visit k, intervene on A and every R_j and test whether the
/// random half of R_k is d-separated from Y given A and the R_k covariates.
bool check_exchangeability(CausalStructure structure, int periods, const AdjustmentPlan& plan,
                           bool with_unobserved = false);

} // namespace icepath::graph
