#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "forge/canonical.hpp"
#include "forge/model.hpp"

namespace forge::codegen {

enum class Middleware { pubsub, queue };
enum class Virtualization { container, process };

struct RuntimeEnvSpec {
    Middleware middleware = Middleware::pubsub;
    std::string transport = "udp"; // documentation only
    Virtualization virtualization = Virtualization::container;
    int base_port = 5000;
    std::string subnet_prefix = "10.0.0.";

    /// Throws PreconditionError.
    void validate() const;
};

std::string_view to_string(Middleware m) noexcept;
std::string_view to_string(Virtualization v) noexcept;

inline constexpr int voting_window_ms = 50;
inline int voting_quorum(int replicas) { return (replicas + 2) / 2; } // ceil((r+1)/2)

struct ServiceEntry {
    std::string name;
    /// Instance this service runs; for a voter, the consumer instance it guards.
    std::string instance;
    bool voter = false;
    int port = 0;
    std::string command;
    std::vector<std::pair<std::string, std::string>> env; // sorted by key
    std::string restart = "always";

    const std::string* env_value(std::string_view key) const noexcept;
};

struct NodeDeployment {
    std::string node;
    std::string address;
    std::vector<ServiceEntry> services; // sorted by name
};

/// Topic wiring of one flow edge.
struct FlowTopics {
    std::string edge;
    std::string src_fn, src_port, dst_fn, dst_port;
    std::vector<std::string> topics; // one per producer replica
    bool voted = false;
};

struct DeploymentPlan {
    RuntimeEnvSpec rtenv;
    std::vector<NodeDeployment> nodes; // sorted by node id
    std::vector<FlowTopics> flows;     // sorted by edge id
    std::vector<std::string> links;    // link ids, for fault targets

    const NodeDeployment* find_node(std::string_view id) const noexcept;
    /// Node hosting the service named `name`, or nullptr.
    const NodeDeployment* node_of_service(std::string_view name) const noexcept;
};

/// "<fn>/<port>", suffixed "#k" when the producer is replicated.
std::string topic_name(const FunctionSpec& src, std::string_view port, int replica);
std::string voter_name(std::string_view src_fn, std::string_view src_port, std::string_view consumer);
std::string voted_topic(std::string_view src_fn, std::string_view src_port, std::string_view consumer);

/// Throws MissingAllocationError for an unenhanced model, ConsistencyError if
/// the result fails lint_plan.
DeploymentPlan plan_deployment(const InstanceModel& model, const RuntimeEnvSpec& rtenv = {});

/// Referential closure, placement fidelity, uniqueness. Empty when clean.
std::vector<std::string> lint_plan(const DeploymentPlan& plan, const InstanceModel& model);

enum class Direction { in, out };

struct PortBinding {
    std::string port;
    std::string datatype;
    Direction direction = Direction::out;
    std::vector<std::string> topics;
    std::string wire_note;
};

struct AdapterSpec {
    std::string instance;
    std::vector<PortBinding> bindings; // out ports then in ports, each by name
};

std::vector<AdapterSpec> emit_adapters(const DeploymentPlan& plan, const InstanceModel& model);
std::string render_adapter(const AdapterSpec& a);

enum class FaultKind { node_crash, link_drop };

struct FaultSpec {
    double at_ms = 0.0;
    FaultKind kind = FaultKind::node_crash;
    std::string target;
    double p = 1.0; // link_drop only

    friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

enum class TestKind { functional, nonfunctional };

struct TestCase {
    std::string id;
    TestKind kind = TestKind::functional;
    std::string src_fn, dst_fn;
    std::optional<double> min_delivery_ratio;
    std::optional<double> max_p95_latency_ms;
    std::vector<FaultSpec> faults;
    double duration_ms = 10000.0;

    friend bool operator==(const TestCase&, const TestCase&) = default;
};

std::string_view to_string(FaultKind k) noexcept;
std::string_view to_string(TestKind k) noexcept;

/// Acceptance-criteria document:
/// {"criteria": [{"id", "flow": {"src", "dst"}, "kind"?, "min_delivery_ratio"?,
///   "max_p95_latency_ms"?, "faults"?: [...], "duration_ms"?}]}
struct Criterion {
    std::string id;
    std::optional<TestKind> kind;
    std::string src_fn, dst_fn;
    std::optional<double> min_delivery_ratio;
    std::optional<double> max_p95_latency_ms;
    std::vector<FaultSpec> faults;
    double duration_ms = 10000.0;
};

/// Throws SyntaxError or SchemaError.
std::vector<Criterion> load_criteria(std::string_view doc);

/// One TestCase per criterion. Throws UnknownFlowError for a flow with no
/// matching edge in the plan, SchemaError for a fault on an unknown target.
std::vector<TestCase> emit_tests(const std::vector<Criterion>& criteria, const DeploymentPlan& plan);

Json fault_to_json(const FaultSpec& f);
FaultSpec fault_from_json(const nlohmann::json& j, const std::string& path);
Json test_case_to_json(const TestCase& t);
std::string suite_to_json(const std::vector<TestCase>& suite);
/// Throws SyntaxError or SchemaError.
std::vector<TestCase> load_suite(std::string_view doc);

std::string render_deploy_yaml(const NodeDeployment& n);
/// Reads every deploy/*.yaml back. Topic tables are not recovered.
std::vector<NodeDeployment> load_deployment(const std::filesystem::path& deploy_dir);

/// file (relative, '/'-separated) -> sha256 hex
using Manifest = std::map<std::string, std::string>;

/// Writes deploy/<node>.yaml, adapters/<instance>.txt, tests/suite.json and
/// manifest.json under out_dir. Throws IoError.
Manifest render(const DeploymentPlan& plan, const std::vector<AdapterSpec>& adapters,
                const std::vector<TestCase>& tests, const std::filesystem::path& out_dir);

Json manifest_to_json(const Manifest& m);

} // namespace forge::codegen
