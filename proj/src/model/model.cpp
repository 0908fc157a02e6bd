#include "forge/model.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include "forge/error.hpp"
#include "forge/model_json.hpp"

namespace forge {

std::string_view to_string(Asil a) noexcept {
    switch (a) {
    case Asil::QM: return "QM";
    case Asil::A: return "A";
    case Asil::B: return "B";
    case Asil::C: return "C";
    case Asil::D: return "D";
    }
    return "QM";
}

std::optional<Asil> parse_asil(std::string_view s) noexcept {
    if (s == "QM") return Asil::QM;
    if (s == "A") return Asil::A;
    if (s == "B") return Asil::B;
    if (s == "C") return Asil::C;
    if (s == "D") return Asil::D;
    return std::nullopt;
}

std::string_view to_string(SafetyMechanism m) noexcept {
    switch (m) {
    case SafetyMechanism::none: return "none";
    case SafetyMechanism::hot_standby: return "hot_standby";
    case SafetyMechanism::voting: return "voting";
    }
    return "none";
}

std::optional<SafetyMechanism> parse_safety_mechanism(std::string_view s) noexcept {
    if (s == "none") return SafetyMechanism::none;
    if (s == "hot_standby") return SafetyMechanism::hot_standby;
    if (s == "voting") return SafetyMechanism::voting;
    return std::nullopt;
}

bool is_valid_id(std::string_view s) noexcept {
    if (s.empty())
        return false;
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    if (!alpha(s.front()))
        return false;
    return std::all_of(s.begin(), s.end(), [&](char c) { return alpha(c) || digit(c); });
}

const Port* FunctionSpec::find_out_port(std::string_view name) const noexcept {
    auto it = std::find_if(out_ports.begin(), out_ports.end(), [&](const Port& p) { return p.name == name; });
    return it == out_ports.end() ? nullptr : &*it;
}

const Port* FunctionSpec::find_in_port(std::string_view name) const noexcept {
    auto it = std::find_if(in_ports.begin(), in_ports.end(), [&](const Port& p) { return p.name == name; });
    return it == in_ports.end() ? nullptr : &*it;
}

std::string InstanceId::str() const {
    return function + "#" + std::to_string(replica);
}

std::optional<InstanceId> InstanceId::parse(std::string_view text) {
    auto hash = text.rfind('#');
    if (hash == std::string_view::npos)
        return std::nullopt;
    auto fn = text.substr(0, hash);
    auto idx = text.substr(hash + 1);
    if (!is_valid_id(fn) || idx.empty() || (idx.size() > 1 && idx.front() == '0'))
        return std::nullopt;
    int k = 0;
    auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), k);
    if (ec != std::errc{} || p != idx.data() + idx.size() || k < 0)
        return std::nullopt;
    return InstanceId{std::string(fn), k};
}

const std::string* AllocationMatrix::node_of(const InstanceId& id) const noexcept {
    for (const auto& p : placements)
        if (p.instance == id)
            return &p.node;
    return nullptr;
}

namespace {

template <typename T>
const T* find_by_id(const std::vector<T>& v, std::string_view id) noexcept {
    auto it = std::lower_bound(v.begin(), v.end(), id, [](const T& x, std::string_view k) { return x.id < k; });
    if (it != v.end() && it->id == id)
        return &*it;
    // not canonical yet: fall back to a scan
    auto lin = std::find_if(v.begin(), v.end(), [&](const T& x) { return x.id == id; });
    return lin == v.end() ? nullptr : &*lin;
}

template <typename T>
void sort_by_id(std::vector<T>& v) {
    std::sort(v.begin(), v.end(), [](const T& a, const T& b) { return a.id < b.id; });
}

std::string idx_path(const char* coll, std::size_t i) {
    return std::string(coll) + "[" + std::to_string(i) + "]";
}

} // namespace

const FunctionSpec* InstanceModel::find_function(std::string_view id) const noexcept { return find_by_id(functions, id); }
const HardwareNode* InstanceModel::find_node(std::string_view id) const noexcept { return find_by_id(hardware, id); }
const Link* InstanceModel::find_link(std::string_view id) const noexcept { return find_by_id(links, id); }
const FlowEdge* InstanceModel::find_edge(std::string_view id) const noexcept { return find_by_id(edges, id); }

void canonicalize(InstanceModel& model) {
    for (auto& f : model.functions) {
        auto by_name = [](const Port& a, const Port& b) { return a.name < b.name; };
        std::sort(f.out_ports.begin(), f.out_ports.end(), by_name);
        std::sort(f.in_ports.begin(), f.in_ports.end(), by_name);
    }
    sort_by_id(model.functions);
    sort_by_id(model.hardware);
    sort_by_id(model.links);
    sort_by_id(model.edges);
    if (model.allocation)
        std::sort(model.allocation->begin(), model.allocation->end());
}

void validate_model(const InstanceModel& model) {
    std::map<std::string, const FunctionSpec*, std::less<>> fns;
    for (std::size_t i = 0; i < model.functions.size(); ++i) {
        const auto& f = model.functions[i];
        auto path = idx_path("functions", i);
        if (!is_valid_id(f.id))
            throw SchemaError(path + ".id", "invalid identifier '" + f.id + "'");
        if (!fns.emplace(f.id, &f).second)
            throw SchemaError(path + ".id", "duplicate function id '" + f.id + "'");
        // positivity of cpu_req / mem_req is a constraint-pack rule (MinCpu, MinMem)
        if (f.cpu_req < 0)
            throw SchemaError(path + ".cpu_req", "must be non-negative");
        if (f.mem_req < 0)
            throw SchemaError(path + ".mem_req", "must be non-negative");
        if (f.power_req < 0)
            throw SchemaError(path + ".power_req", "must be non-negative");
        if (f.redundancy < 1)
            throw SchemaError(path + ".redundancy", "must be at least 1");
        if (f.redundancy > 1 && f.safety_mechanism == SafetyMechanism::none)
            throw SchemaError(path + ".safety_mechanism", "redundancy > 1 requires hot_standby or voting");
        std::set<std::string, std::less<>> port_names;
        auto check_ports = [&](const std::vector<Port>& ports, const char* kind) {
            for (std::size_t k = 0; k < ports.size(); ++k) {
                auto ppath = path + "." + kind + "[" + std::to_string(k) + "]";
                if (!is_valid_id(ports[k].name))
                    throw SchemaError(ppath + ".name", "invalid identifier '" + ports[k].name + "'");
                if (!is_valid_id(ports[k].datatype))
                    throw SchemaError(ppath + ".datatype", "invalid identifier '" + ports[k].datatype + "'");
                if (!port_names.insert(ports[k].name).second)
                    throw SchemaError(ppath + ".name", "duplicate port name '" + ports[k].name + "' in function '" + f.id + "'");
            }
        };
        check_ports(f.out_ports, "out_ports");
        check_ports(f.in_ports, "in_ports");
    }

    std::set<std::string, std::less<>> nodes;
    for (std::size_t i = 0; i < model.hardware.size(); ++i) {
        const auto& n = model.hardware[i];
        auto path = idx_path("hardware", i);
        if (!is_valid_id(n.id))
            throw SchemaError(path + ".id", "invalid identifier '" + n.id + "'");
        if (!nodes.insert(n.id).second)
            throw SchemaError(path + ".id", "duplicate hardware node id '" + n.id + "'");
        if (n.cpu_cap <= 0)
            throw SchemaError(path + ".cpu_cap", "must be positive");
        if (n.mem_cap <= 0)
            throw SchemaError(path + ".mem_cap", "must be positive");
        if (n.base_power < 0)
            throw SchemaError(path + ".base_power", "must be non-negative");
        if (n.cost < 0)
            throw SchemaError(path + ".cost", "must be non-negative");
    }

    std::set<std::string, std::less<>> link_ids;
    std::set<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < model.links.size(); ++i) {
        const auto& l = model.links[i];
        auto path = idx_path("links", i);
        if (!is_valid_id(l.id))
            throw SchemaError(path + ".id", "invalid identifier '" + l.id + "'");
        if (!link_ids.insert(l.id).second)
            throw SchemaError(path + ".id", "duplicate link id '" + l.id + "'");
        if (!nodes.contains(l.endpoint_a))
            throw SchemaError(path + ".endpoint_a", "unknown hardware node '" + l.endpoint_a + "'");
        if (!nodes.contains(l.endpoint_b))
            throw SchemaError(path + ".endpoint_b", "unknown hardware node '" + l.endpoint_b + "'");
        if (l.endpoint_a == l.endpoint_b)
            throw SchemaError(path + ".endpoint_b", "link endpoints must differ");
        if (l.bandwidth_bps <= 0)
            throw SchemaError(path + ".bandwidth_bps", "must be positive");
        if (l.latency_ms < 0)
            throw SchemaError(path + ".latency_ms", "must be non-negative");
        auto key = std::minmax(l.endpoint_a, l.endpoint_b);
        if (!pairs.emplace(key.first, key.second).second)
            throw SchemaError(path, "second link between '" + key.first + "' and '" + key.second + "'");
    }

    std::set<std::string, std::less<>> edge_ids;
    for (std::size_t i = 0; i < model.edges.size(); ++i) {
        const auto& e = model.edges[i];
        auto path = idx_path("edges", i);
        if (!is_valid_id(e.id))
            throw SchemaError(path + ".id", "invalid identifier '" + e.id + "'");
        if (!edge_ids.insert(e.id).second)
            throw SchemaError(path + ".id", "duplicate edge id '" + e.id + "'");
        auto src = fns.find(e.src_fn);
        if (src == fns.end())
            throw SchemaError(path + ".src_fn", "unknown function '" + e.src_fn + "'");
        auto dst = fns.find(e.dst_fn);
        if (dst == fns.end())
            throw SchemaError(path + ".dst_fn", "unknown function '" + e.dst_fn + "'");
        const Port* sp = src->second->find_out_port(e.src_port);
        if (!sp)
            throw SchemaError(path + ".src_port", "function '" + e.src_fn + "' has no out port '" + e.src_port + "'");
        const Port* dp = dst->second->find_in_port(e.dst_port);
        if (!dp)
            throw SchemaError(path + ".dst_port", "function '" + e.dst_fn + "' has no in port '" + e.dst_port + "'");
        if (sp->datatype != dp->datatype)
            throw SchemaError(path + ".dst_port", "incompatible interface: '" + sp->datatype + "' sent to '" + dp->datatype + "'");
        if (e.rate_hz <= 0)
            throw SchemaError(path + ".rate_hz", "must be positive");
        if (e.msg_bytes <= 0)
            throw SchemaError(path + ".msg_bytes", "must be positive");
        if (e.latency_budget_ms && *e.latency_budget_ms < 0)
            throw SchemaError(path + ".latency_budget_ms", "must be non-negative");
    }

    if (model.allocation) {
        std::set<InstanceId> seen;
        const auto& alloc = *model.allocation;
        for (std::size_t i = 0; i < alloc.size(); ++i) {
            const auto& p = alloc[i];
            auto path = idx_path("allocation", i);
            auto f = fns.find(p.instance.function);
            if (f == fns.end())
                throw SchemaError(path + ".instance", "unknown function '" + p.instance.function + "'");
            if (p.instance.replica < 0 || p.instance.replica >= f->second->redundancy)
                throw SchemaError(path + ".instance", "replica index out of range in '" + p.instance.str() + "'");
            if (!nodes.contains(p.node))
                throw SchemaError(path + ".node", "unknown hardware node '" + p.node + "'");
            if (!seen.insert(p.instance).second)
                throw SchemaError(path + ".instance", "instance '" + p.instance.str() + "' allocated twice");
        }
        for (const auto& inst : expand_instances(model))
            if (!seen.contains(inst))
                throw SchemaError("allocation", "instance '" + inst.str() + "' is not allocated");
    }
}

InstanceModel load_instance_model(std::string_view doc) {
    auto j = parse_json(doc);
    if (!j.is_object())
        throw SchemaError("$", "expected an object");
    static constexpr std::string_view known[] = {"functions", "hardware", "links", "edges", "allocation"};
    for (const auto& [k, _] : j.items())
        if (std::find(std::begin(known), std::end(known), k) == std::end(known))
            throw SchemaError(k, "unknown field");

    auto arr = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end())
            throw SchemaError(key, "missing required field");
        if (!it->is_array())
            throw SchemaError(key, "expected an array");
        return *it;
    };

    InstanceModel m;
    const auto& fns = arr("functions");
    for (std::size_t i = 0; i < fns.size(); ++i)
        m.functions.push_back(function_from_json(fns[i], idx_path("functions", i)));
    const auto& hw = arr("hardware");
    for (std::size_t i = 0; i < hw.size(); ++i)
        m.hardware.push_back(node_from_json(hw[i], idx_path("hardware", i)));
    const auto& links = arr("links");
    for (std::size_t i = 0; i < links.size(); ++i)
        m.links.push_back(link_from_json(links[i], idx_path("links", i)));
    const auto& edges = arr("edges");
    for (std::size_t i = 0; i < edges.size(); ++i)
        m.edges.push_back(edge_from_json(edges[i], idx_path("edges", i)));
    if (j.contains("allocation")) {
        const auto& alloc = arr("allocation");
        m.allocation.emplace();
        for (std::size_t i = 0; i < alloc.size(); ++i)
            m.allocation->push_back(placement_from_json(alloc[i], idx_path("allocation", i)));
    }

    validate_model(m);
    canonicalize(m);
    return m;
}

std::string save_instance_model(const InstanceModel& model) {
    InstanceModel m = model;
    canonicalize(m);
    Json j;
    auto put = [&](const char* key, const auto& coll) {
        Json arr = Json::array();
        for (const auto& x : coll)
            arr.push_back(to_json(x));
        j[key] = std::move(arr);
    };
    put("functions", m.functions);
    put("hardware", m.hardware);
    put("links", m.links);
    put("edges", m.edges);
    if (m.allocation)
        put("allocation", *m.allocation);
    return dump_json(j);
}

std::vector<InstanceId> expand_instances(const InstanceModel& model) {
    std::vector<InstanceId> out;
    for (const auto& f : model.functions)
        for (int k = 0; k < f.redundancy; ++k)
            out.push_back({f.id, k});
    std::sort(out.begin(), out.end());
    return out;
}

InstanceModel merge_allocation(const InstanceModel& model, const AllocationMatrix& alloc) {
    auto expected = expand_instances(model);
    std::set<InstanceId> want(expected.begin(), expected.end());
    std::set<InstanceId> got;
    for (const auto& p : alloc.placements) {
        if (!want.contains(p.instance))
            throw CoverageError("allocation names unknown instance '" + p.instance.str() + "'");
        if (!got.insert(p.instance).second)
            throw CoverageError("instance '" + p.instance.str() + "' allocated more than once");
        if (!model.find_node(p.node))
            throw UnknownNodeError("instance '" + p.instance.str() + "' mapped to unknown node '" + p.node + "'");
    }
    for (const auto& inst : expected)
        if (!got.contains(inst))
            throw CoverageError("instance '" + inst.str() + "' is not allocated");

    InstanceModel out = model;
    out.allocation = alloc.placements;
    std::sort(out.allocation->begin(), out.allocation->end());
    return out;
}

} // namespace forge
