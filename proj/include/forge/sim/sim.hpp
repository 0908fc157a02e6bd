#pragma once

// Discrete-event simulation of a deployed topology.
//
// Every producer replica emits on each outgoing flow edge at t = k * period
// (period = 1000 / rate_hz ms) for all k with t < horizon. A message reaches
// each consumer replica after the static route latency. Faults are permanent
// node crashes and per-link drop probabilities; when a fault and a message
// event share a timestamp the fault goes first. Messages already in flight at
// the horizon are still delivered; nothing new is emitted and no fault fires
// after it.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/codegen/codegen.hpp"
#include "forge/model.hpp"

namespace forge::sim {

using codegen::FaultKind;
using codegen::FaultSpec;
using codegen::TestCase;
using codegen::TestKind;

struct SimInstance {
    std::string id;
    std::string function;
    int replica = 0;
    std::size_t node = 0;
};

struct SimPath {
    bool reachable = false;
    double latency_ms = 0.0;             ///< static route latency
    std::vector<std::size_t> nodes;      ///< both endpoints included
    std::vector<std::size_t> links;
    std::vector<double> link_entry_ms;   ///< offset at which each link is entered
    std::vector<double> node_pass_ms;    ///< offset at which each node is reached
};

enum class DeliveryMode { first_arrival, voting };

struct SimFlow {
    std::string edge;
    std::string src_fn, dst_fn;
    double period_ms = 0.0;
    std::vector<std::size_t> producers; ///< instance indices, by replica
    std::vector<std::size_t> consumers;
    DeliveryMode mode = DeliveryMode::first_arrival;
    int quorum = 1;
    std::vector<std::vector<SimPath>> paths; ///< [producer][consumer]
};

struct SimWorld {
    std::vector<std::string> nodes; ///< sorted ids
    std::vector<std::string> links; ///< model order
    std::vector<SimInstance> instances;
    std::vector<SimFlow> flows; ///< sorted by edge id
};

/// Cross-checks the deployment against the model's allocation and routes.
/// Throws MissingAllocationError or ConsistencyError.
SimWorld build_sim(const codegen::DeploymentPlan& plan, const InstanceModel& model);
SimWorld build_sim(const std::vector<codegen::NodeDeployment>& deployment, const InstanceModel& model);

struct NodeState {
    double at_ms = 0.0;
    bool up = true;
};

struct LinkState {
    double at_ms = 0.0;
    double drop_p = 0.0;
};

struct FlowStats {
    std::string edge;
    std::string src_fn, dst_fn;
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::vector<double> latencies_ms; ///< one per delivered sequence number, in order

    double ratio() const noexcept { return sent ? static_cast<double>(delivered) / static_cast<double>(sent) : 1.0; }
};

struct SimReport {
    std::uint64_t seed = 0;
    double horizon_ms = 0.0;
    std::vector<FlowStats> flows;
    std::map<std::string, std::vector<NodeState>> nodes;
    std::map<std::string, std::vector<LinkState>> links;
};

/// Deterministic in (world, faults, horizon, seed). Throws PreconditionError
/// for a non-positive horizon or a fault on an unknown target.
SimReport run(const SimWorld& world, const std::vector<FaultSpec>& faults, double horizon_ms, std::uint64_t seed);

/// Uniform [0, 1) draw keyed by message identity, independent of draw order.
double drop_draw(std::uint64_t seed, std::string_view edge, std::string_view producer, std::string_view consumer,
                 std::uint64_t seq, std::string_view link);

/// Nearest-rank percentile; nullopt for an empty sample.
std::optional<double> percentile_nearest_rank(std::vector<double> samples, double pct);

struct Measured {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    double delivery_ratio = 1.0;
    std::optional<double> p95_latency_ms;
};

struct CaseResult {
    std::string id;
    TestKind kind = TestKind::functional;
    bool passed = true;
    Measured measured;
    std::vector<std::string> failures; ///< one line per unmet assertion
};

struct TestResults {
    std::vector<CaseResult> cases;
    std::vector<std::string> functional_failures;    ///< case ids
    std::vector<std::string> nonfunctional_failures; ///< case ids

    bool all_passed() const noexcept { return functional_failures.empty() && nonfunctional_failures.empty(); }
};

/// Measures every case against one report (all edges src -> dst pooled).
/// Throws UnknownFlowError.
TestResults evaluate_tests(const SimReport& report, const std::vector<TestCase>& suite);

struct SuiteRun {
    TestResults results;
    std::vector<SimReport> reports; ///< one per case
};

/// Each case runs in its own world copy with its own faults and duration.
SuiteRun run_suite(const SimWorld& world, const std::vector<TestCase>& suite, std::uint64_t seed);

struct RedundancyOutcome {
    std::string function;     ///< the replicated function under test
    int crashed_replica = 0;
    std::string crashed_node;
    double crash_at_ms = 0.0;
    std::vector<TestCase> suite;
    TestResults redundant;
    TestResults degraded;     ///< same crash, redundancy forced to 1
};

/// Crashes one replica's node at horizon/2 for the deployed redundancy and for
/// a variant with that function reduced to one replica. Throws
/// PreconditionError when no function has two or more replicas on distinct
/// nodes.
RedundancyOutcome redundancy_scenarios(const codegen::DeploymentPlan& plan, const InstanceModel& model,
                                       double horizon_ms, std::uint64_t seed = 0);

Json report_to_json(const SimReport& r);
Json results_to_json(const TestResults& r);
Json redundancy_to_json(const RedundancyOutcome& r);

} // namespace forge::sim
