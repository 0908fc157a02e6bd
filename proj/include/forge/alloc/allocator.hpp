#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "forge/canonical.hpp"
#include "forge/model.hpp"

namespace forge::alloc {

struct InstanceReq {
    InstanceId id;
    std::size_t function = 0; ///< index into AllocationProblem::functions
    std::int64_t cpu_req = 0;
    std::int64_t mem_req = 0;
    double power_req = 0.0;
    Asil asil = Asil::QM;
};

/// One replica-to-replica stream produced by expanding a flow edge.
struct Flow {
    std::string edge;
    std::size_t src = 0; ///< instance index
    std::size_t dst = 0;
    double rate_hz = 0.0;
    std::int64_t msg_bytes = 0;
    std::optional<double> latency_budget_ms;

    double bps() const noexcept { return rate_hz * static_cast<double>(msg_bytes) * 8.0; }
};

struct Route {
    bool reachable = false;
    std::vector<std::size_t> nodes; ///< node indices, both endpoints included
    std::vector<std::size_t> links; ///< link indices along the path
    double latency_ms = 0.0;

    std::size_t hops() const noexcept { return links.size(); }
};

struct Pin {
    InstanceId instance;
    std::string node;
};

struct AllocationProblem {
    std::vector<std::string> functions; ///< function ids, sorted
    std::vector<InstanceReq> instances; ///< sorted by (function, replica)
    std::vector<HardwareNode> nodes;    ///< sorted by id
    std::vector<Link> links;
    std::vector<Flow> flows;
    /// routes[a][b]; routes[a][a] is the empty path. routes[b][a] is the
    /// reverse of routes[a][b].
    std::vector<std::vector<Route>> routes;
    std::vector<std::optional<std::size_t>> pins; ///< per instance

    std::optional<std::size_t> instance_index(const InstanceId& id) const;
    std::optional<std::size_t> node_index(std::string_view id) const;
};

/// Throws CoverageError for a pin on an unknown instance and UnknownNodeError
/// for an unknown node.
AllocationProblem build_problem(const InstanceModel& model, const std::vector<Pin>& pins = {});

/// Node index per instance.
using Assignment = std::vector<std::size_t>;

AllocationMatrix to_matrix(const AllocationProblem& p, const Assignment& a);
/// Throws TotalityError unless every instance is placed exactly once;
/// UnknownNodeError for a node outside the problem.
Assignment from_matrix(const AllocationProblem& p, const AllocationMatrix& m);

enum class ViolationKind {
    cpu_capacity,
    mem_capacity,
    asil,
    anti_affinity,
    pinning,
    link_bandwidth,
    latency_budget,
    unroutable,
};

std::string_view to_string(ViolationKind k) noexcept;

struct Violation {
    ViolationKind kind;
    std::vector<std::string> subjects;
    double magnitude = 0.0;   ///< amount over the limit, in the limit's unit
    double normalized = 0.0;  ///< magnitude relative to the limit
};

std::string describe(const Violation& v);

struct ObjectiveVector {
    double power_w = 0.0;
    double cost = 0.0;
    double traffic_bps = 0.0;

    std::array<double, 3> values() const noexcept { return {power_w, cost, traffic_bps}; }
    friend auto operator<=>(const ObjectiveVector&, const ObjectiveVector&) = default;
};

/// Component-wise <= with at least one strict <.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) noexcept;

struct Assessment {
    ObjectiveVector objectives;
    double violation = 0.0; ///< sum of normalized magnitudes
    std::size_t violation_count = 0;

    bool feasible() const noexcept { return violation_count == 0; }
};

/// Reusable evaluator; keeps scratch buffers between calls.
class Assessor {
public:
    explicit Assessor(const AllocationProblem& p);
    Assessment run(const Assignment& a, std::vector<Violation>* details = nullptr);

private:
    const AllocationProblem& p_;
    std::vector<std::int64_t> cpu_, mem_;
    std::vector<double> power_;
    std::vector<int> hosted_;
    std::vector<int> per_function_node_;
    std::vector<double> link_load_;
};

/// Violations in kind order; empty iff feasible. Throws TotalityError.
std::vector<Violation> check_feasible(const AllocationProblem& p, const AllocationMatrix& m);
std::vector<Violation> check_feasible(const AllocationProblem& p, const Assignment& a);

/// Throws TotalityError.
ObjectiveVector objectives(const AllocationProblem& p, const AllocationMatrix& m);
ObjectiveVector objectives(const AllocationProblem& p, const Assignment& a);

struct ParetoPoint {
    Assignment assignment;
    AllocationMatrix matrix;
    ObjectiveVector objectives;
};

/// Mutually non-dominated, sorted by objective vector. One representative
/// assignment per objective point: the lexicographically smallest found.
struct ParetoSet {
    std::vector<ParetoPoint> points;
};

/// No feasible assignment: the assignment with minimal total normalized
/// violation and its violations.
struct EmptyFront {
    AllocationMatrix witness;
    std::vector<Violation> violations;
};

using SolveResult = std::variant<ParetoSet, EmptyFront>;

struct ExactOptions {
    double cap = 1e7; ///< maximum |nodes|^|instances|
};

/// Depth-first enumeration with pruning. Throws SizeError above the cap.
SolveResult solve_exact(const AllocationProblem& p, const ExactOptions& opts = {});

struct Nsga2Params {
    int population = 64;
    int generations = 200;
    double crossover_p = 0.9;
    std::optional<double> mutation_p; ///< default 1 / |instances|
    std::uint64_t seed = 1;
};

/// Throws std::invalid_argument for an odd population or one below 4.
SolveResult solve_nsga2(const AllocationProblem& p, const Nsga2Params& params);

/// Weighted sum of min-max normalized objectives; ties go to the earlier point.
/// Throws EmptyFrontError on an empty front and std::invalid_argument for
/// negative or all-zero weights.
const ParetoPoint& select_solution(const ParetoSet& front, const std::array<double, 3>& weights);

Json front_to_json(const ParetoSet& front);
Json violations_to_json(const std::vector<Violation>& vs);
/// "instance,node" header plus one row per placement.
std::string allocation_csv(const AllocationMatrix& m);

} // namespace forge::alloc
