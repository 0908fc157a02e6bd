#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

// QM < A < B < C < D
enum class Asil : int { QM = 0, A = 1, B = 2, C = 3, D = 4 };

inline constexpr bool asil_at_least(Asil have, Asil need) noexcept {
    return static_cast<int>(have) >= static_cast<int>(need);
}

std::string_view to_string(Asil a) noexcept;
std::optional<Asil> parse_asil(std::string_view s) noexcept;

enum class SafetyMechanism { none, hot_standby, voting };

std::string_view to_string(SafetyMechanism m) noexcept;
std::optional<SafetyMechanism> parse_safety_mechanism(std::string_view s) noexcept;

/// Entity ids: [A-Za-z_][A-Za-z0-9_]*. Keeps "<fn>#<k>", "<fn>/<port>" and
/// generated file names unambiguous.
bool is_valid_id(std::string_view s) noexcept;

struct Port {
    std::string name;
    std::string datatype;

    friend bool operator==(const Port&, const Port&) = default;
};

struct FunctionSpec {
    std::string id;
    std::int64_t cpu_req = 1;
    std::int64_t mem_req = 1;
    double power_req = 0.0;
    Asil asil = Asil::QM;
    int redundancy = 1;
    SafetyMechanism safety_mechanism = SafetyMechanism::none;
    std::vector<Port> out_ports;
    std::vector<Port> in_ports;

    const Port* find_out_port(std::string_view name) const noexcept;
    const Port* find_in_port(std::string_view name) const noexcept;

    friend bool operator==(const FunctionSpec&, const FunctionSpec&) = default;
};

struct HardwareNode {
    std::string id;
    std::int64_t cpu_cap = 1;
    std::int64_t mem_cap = 1;
    double base_power = 0.0;
    double cost = 0.0;
    Asil asil_cap = Asil::QM;

    friend bool operator==(const HardwareNode&, const HardwareNode&) = default;
};

struct Link {
    std::string id;
    std::string endpoint_a;
    std::string endpoint_b;
    double bandwidth_bps = 0.0;
    double latency_ms = 0.0;

    friend bool operator==(const Link&, const Link&) = default;
};

struct FlowEdge {
    std::string id;
    std::string src_fn;
    std::string src_port;
    std::string dst_fn;
    std::string dst_port;
    double rate_hz = 1.0;
    std::int64_t msg_bytes = 1;
    std::optional<double> latency_budget_ms;

    friend bool operator==(const FlowEdge&, const FlowEdge&) = default;
};

/// One replica of a function, rendered "<fn_id>#<k>".
struct InstanceId {
    std::string function;
    int replica = 0;

    std::string str() const;
    /// Inverse of str(); nullopt if the text is not "<id>#<non-negative int>".
    static std::optional<InstanceId> parse(std::string_view text);

    friend auto operator<=>(const InstanceId&, const InstanceId&) = default;
    friend bool operator==(const InstanceId&, const InstanceId&) = default;
};

struct Placement {
    InstanceId instance;
    std::string node;

    friend auto operator<=>(const Placement&, const Placement&) = default;
    friend bool operator==(const Placement&, const Placement&) = default;
};

/// Total software-to-hardware mapping, one placement per expanded instance.
struct AllocationMatrix {
    std::vector<Placement> placements;

    const std::string* node_of(const InstanceId& id) const noexcept;
    friend bool operator==(const AllocationMatrix&, const AllocationMatrix&) = default;
};

/// Typed graph of functions, hardware, links and data-flow edges. Collections
/// are kept sorted by id (allocation by instance) once loaded or merged.
struct InstanceModel {
    std::vector<FunctionSpec> functions;
    std::vector<HardwareNode> hardware;
    std::vector<Link> links;
    std::vector<FlowEdge> edges;
    std::optional<std::vector<Placement>> allocation;

    const FunctionSpec* find_function(std::string_view id) const noexcept;
    const HardwareNode* find_node(std::string_view id) const noexcept;
    const Link* find_link(std::string_view id) const noexcept;
    const FlowEdge* find_edge(std::string_view id) const noexcept;
    bool enhanced() const noexcept { return allocation.has_value(); }

    friend bool operator==(const InstanceModel&, const InstanceModel&) = default;
};

/// Parse and fully validate an instance-model JSON document.
/// Throws SyntaxError or SchemaError.
InstanceModel load_instance_model(std::string_view doc);

/// Canonical JSON rendering: fixed key order, collections sorted by id,
/// decimals with at most six fractional digits.
std::string save_instance_model(const InstanceModel& model);

/// Each function yields `redundancy` instances, ordered by (function id, replica).
std::vector<InstanceId> expand_instances(const InstanceModel& model);

/// Returns `model` with its allocation populated. Throws CoverageError or
/// UnknownNodeError.
InstanceModel merge_allocation(const InstanceModel& model, const AllocationMatrix& alloc);

/// Re-run every structural check on an in-memory model. Throws SchemaError.
void validate_model(const InstanceModel& model);

/// Sort every collection into canonical order.
void canonicalize(InstanceModel& model);

} // namespace forge
