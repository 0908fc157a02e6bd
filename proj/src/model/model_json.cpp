#include "forge/model_json.hpp"

#include <set>

#include "forge/error.hpp"

namespace forge {
namespace {

// Reads the fields of one JSON object and rejects whatever was not consumed.
class FieldReader {
public:
    FieldReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw SchemaError(path_, "expected an object");
    }

    std::string field_path(std::string_view key) const { return path_ + "." + std::string(key); }

    bool has(const char* key) const { return j_.contains(key); }

    const nlohmann::json& get(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end())
            throw SchemaError(field_path(key), "missing required field");
        seen_.insert(key);
        return *it;
    }

    std::string string(const char* key) {
        const auto& v = get(key);
        if (!v.is_string())
            throw SchemaError(field_path(key), "expected a string");
        return v.get<std::string>();
    }

    std::string id(const char* key) {
        auto s = string(key);
        if (!is_valid_id(s))
            throw SchemaError(field_path(key), "invalid identifier '" + s + "'");
        return s;
    }

    std::int64_t integer(const char* key) {
        const auto& v = get(key);
        if (!v.is_number_integer())
            throw SchemaError(field_path(key), "expected an integer");
        return v.get<std::int64_t>();
    }

    double decimal(const char* key) {
        const auto& v = get(key);
        if (!v.is_number())
            throw SchemaError(field_path(key), "expected a number");
        return round_decimal(v.get<double>());
    }

    Asil asil(const char* key) {
        auto s = string(key);
        auto a = parse_asil(s);
        if (!a)
            throw SchemaError(field_path(key), "unknown ASIL level '" + s + "'");
        return *a;
    }

    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.contains(k))
                throw SchemaError(field_path(k), "unknown field");
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string, std::less<>> seen_;
};

std::vector<Port> ports_from_json(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array())
        throw SchemaError(path, "expected an array");
    std::vector<Port> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        FieldReader r(j[i], path + "[" + std::to_string(i) + "]");
        Port p;
        p.name = r.id("name");
        p.datatype = r.id("datatype");
        r.finish();
        out.push_back(std::move(p));
    }
    return out;
}

Json ports_json(const std::vector<Port>& ports) {
    Json arr = Json::array();
    for (const auto& p : ports)
        arr.push_back(Json{{"name", p.name}, {"datatype", p.datatype}});
    return arr;
}

const nlohmann::json& array_field(const nlohmann::json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(where + key, "missing required field");
    if (!it->is_array())
        throw SchemaError(where + key, "expected an array");
    return *it;
}

} // namespace

nlohmann::json parse_json(std::string_view doc) {
    try {
        return nlohmann::json::parse(doc);
    } catch (const nlohmann::json::parse_error& e) {
        throw SyntaxError(e.what());
    }
}

FunctionSpec function_from_json(const nlohmann::json& j, const std::string& path) {
    FieldReader r(j, path);
    FunctionSpec f;
    f.id = r.id("id");
    f.cpu_req = r.integer("cpu_req");
    f.mem_req = r.integer("mem_req");
    if (r.has("power_req"))
        f.power_req = r.decimal("power_req");
    f.asil = r.asil("asil");
    if (r.has("redundancy")) {
        auto red = r.integer("redundancy");
        if (red < 1 || red > 64)
            throw SchemaError(r.field_path("redundancy"), "must be in [1, 64]");
        f.redundancy = static_cast<int>(red);
    }
    if (r.has("safety_mechanism")) {
        auto s = r.string("safety_mechanism");
        auto m = parse_safety_mechanism(s);
        if (!m)
            throw SchemaError(r.field_path("safety_mechanism"), "unknown safety mechanism '" + s + "'");
        f.safety_mechanism = *m;
    }
    if (r.has("out_ports"))
        f.out_ports = ports_from_json(r.get("out_ports"), r.field_path("out_ports"));
    if (r.has("in_ports"))
        f.in_ports = ports_from_json(r.get("in_ports"), r.field_path("in_ports"));
    r.finish();
    return f;
}

HardwareNode node_from_json(const nlohmann::json& j, const std::string& path) {
    FieldReader r(j, path);
    HardwareNode n;
    n.id = r.id("id");
    n.cpu_cap = r.integer("cpu_cap");
    n.mem_cap = r.integer("mem_cap");
    if (r.has("base_power"))
        n.base_power = r.decimal("base_power");
    if (r.has("cost"))
        n.cost = r.decimal("cost");
    n.asil_cap = r.asil("asil_cap");
    r.finish();
    return n;
}

Link link_from_json(const nlohmann::json& j, const std::string& path) {
    FieldReader r(j, path);
    Link l;
    l.id = r.id("id");
    l.endpoint_a = r.id("endpoint_a");
    l.endpoint_b = r.id("endpoint_b");
    l.bandwidth_bps = r.decimal("bandwidth_bps");
    l.latency_ms = r.decimal("latency_ms");
    r.finish();
    return l;
}

FlowEdge edge_from_json(const nlohmann::json& j, const std::string& path) {
    FieldReader r(j, path);
    FlowEdge e;
    e.id = r.id("id");
    e.src_fn = r.id("src_fn");
    e.src_port = r.id("src_port");
    e.dst_fn = r.id("dst_fn");
    e.dst_port = r.id("dst_port");
    e.rate_hz = r.decimal("rate_hz");
    e.msg_bytes = r.integer("msg_bytes");
    if (r.has("latency_budget_ms"))
        e.latency_budget_ms = r.decimal("latency_budget_ms");
    r.finish();
    return e;
}

Placement placement_from_json(const nlohmann::json& j, const std::string& path) {
    FieldReader r(j, path);
    auto text = r.string("instance");
    auto inst = InstanceId::parse(text);
    if (!inst)
        throw SchemaError(r.field_path("instance"), "malformed instance id '" + text + "'");
    Placement p{*inst, r.id("node")};
    r.finish();
    return p;
}

Json to_json(const FunctionSpec& f) {
    return Json{{"id", f.id},
                {"cpu_req", f.cpu_req},
                {"mem_req", f.mem_req},
                {"power_req", decimal_json(f.power_req)},
                {"asil", to_string(f.asil)},
                {"redundancy", f.redundancy},
                {"safety_mechanism", to_string(f.safety_mechanism)},
                {"out_ports", ports_json(f.out_ports)},
                {"in_ports", ports_json(f.in_ports)}};
}

Json to_json(const HardwareNode& n) {
    return Json{{"id", n.id},
                {"cpu_cap", n.cpu_cap},
                {"mem_cap", n.mem_cap},
                {"base_power", decimal_json(n.base_power)},
                {"cost", decimal_json(n.cost)},
                {"asil_cap", to_string(n.asil_cap)}};
}

Json to_json(const Link& l) {
    return Json{{"id", l.id},
                {"endpoint_a", l.endpoint_a},
                {"endpoint_b", l.endpoint_b},
                {"bandwidth_bps", decimal_json(l.bandwidth_bps)},
                {"latency_ms", decimal_json(l.latency_ms)}};
}

Json to_json(const FlowEdge& e) {
    Json j{{"id", e.id},
           {"src_fn", e.src_fn},
           {"src_port", e.src_port},
           {"dst_fn", e.dst_fn},
           {"dst_port", e.dst_port},
           {"rate_hz", decimal_json(e.rate_hz)},
           {"msg_bytes", e.msg_bytes}};
    if (e.latency_budget_ms)
        j["latency_budget_ms"] = decimal_json(*e.latency_budget_ms);
    return j;
}

Json to_json(const Placement& p) {
    return Json{{"instance", p.instance.str()}, {"node", p.node}};
}

std::vector<FunctionSpec> load_catalogue(std::string_view doc) {
    auto j = parse_json(doc);
    if (!j.is_object())
        throw SchemaError("$", "expected an object");
    for (const auto& [k, _] : j.items())
        if (k != "functions")
            throw SchemaError(k, "unknown field");
    const auto& arr = array_field(j, "functions", "");
    InstanceModel m;
    for (std::size_t i = 0; i < arr.size(); ++i)
        m.functions.push_back(function_from_json(arr[i], "functions[" + std::to_string(i) + "]"));
    validate_model(m);
    canonicalize(m);
    return m.functions;
}

HardwareSpec load_hardware_spec(std::string_view doc) {
    auto j = parse_json(doc);
    if (!j.is_object())
        throw SchemaError("$", "expected an object");
    for (const auto& [k, _] : j.items())
        if (k != "hardware" && k != "links")
            throw SchemaError(k, "unknown field");
    InstanceModel m;
    const auto& hw = array_field(j, "hardware", "");
    for (std::size_t i = 0; i < hw.size(); ++i)
        m.hardware.push_back(node_from_json(hw[i], "hardware[" + std::to_string(i) + "]"));
    if (j.contains("links")) {
        const auto& links = array_field(j, "links", "");
        for (std::size_t i = 0; i < links.size(); ++i)
            m.links.push_back(link_from_json(links[i], "links[" + std::to_string(i) + "]"));
    }
    validate_model(m);
    canonicalize(m);
    return {std::move(m.hardware), std::move(m.links)};
}

} // namespace forge
