#include <algorithm>
#include <set>

#include <yaml-cpp/yaml.h>

#include "forge/codegen/codegen.hpp"
#include "forge/error.hpp"
#include "forge/model_json.hpp"

namespace forge::codegen {

std::string_view to_string(FaultKind k) noexcept { return k == FaultKind::node_crash ? "node_crash" : "link_drop"; }
std::string_view to_string(TestKind k) noexcept { return k == TestKind::functional ? "functional" : "nonfunctional"; }

namespace {

const nlohmann::json& member(const nlohmann::json& j, const char* key, const std::string& path) {
    if (!j.contains(key))
        throw SchemaError(path, std::string("missing required field '") + key + "'");
    return j.at(key);
}

std::string get_string(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& v = member(j, key, path);
    if (!v.is_string())
        throw SchemaError(path + "." + key, "expected a string");
    return v.get<std::string>();
}

double get_number(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& v = member(j, key, path);
    if (!v.is_number())
        throw SchemaError(path + "." + key, "expected a number");
    return v.get<double>();
}

std::optional<double> opt_number(const nlohmann::json& j, const char* key, const std::string& path) {
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return get_number(j, key, path);
}

void check_ratio(std::optional<double> v, const std::string& path) {
    if (v && (*v < 0.0 || *v > 1.0))
        throw SchemaError(path, "ratio must lie in [0, 1]");
}

} // namespace

FaultSpec fault_from_json(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object())
        throw SchemaError(path, "expected an object");
    FaultSpec f;
    f.at_ms = get_number(j, "at_ms", path);
    if (f.at_ms < 0)
        throw SchemaError(path + ".at_ms", "must be non-negative");
    auto kind = get_string(j, "kind", path);
    if (kind == "node_crash")
        f.kind = FaultKind::node_crash;
    else if (kind == "link_drop")
        f.kind = FaultKind::link_drop;
    else
        throw SchemaError(path + ".kind", "unknown fault kind '" + kind + "'");
    f.target = get_string(j, "target", path);
    if (f.kind == FaultKind::link_drop) {
        f.p = opt_number(j, "p", path).value_or(1.0);
        if (f.p < 0.0 || f.p > 1.0)
            throw SchemaError(path + ".p", "drop probability must lie in [0, 1]");
    } else {
        f.p = 1.0;
    }
    return f;
}

Json fault_to_json(const FaultSpec& f) {
    Json j;
    j["at_ms"] = decimal_json(f.at_ms);
    j["kind"] = to_string(f.kind);
    j["target"] = f.target;
    if (f.kind == FaultKind::link_drop)
        j["p"] = decimal_json(f.p);
    return j;
}

std::vector<Criterion> load_criteria(std::string_view doc) {
    auto j = parse_json(doc);
    if (!j.is_object())
        throw SchemaError("$", "expected an object");
    const auto& list = member(j, "criteria", "$");
    if (!list.is_array())
        throw SchemaError("$.criteria", "expected an array");
    std::vector<Criterion> out;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& c = list[i];
        auto path = "$.criteria[" + std::to_string(i) + "]";
        if (!c.is_object())
            throw SchemaError(path, "expected an object");
        Criterion cr;
        cr.id = get_string(c, "id", path);
        if (cr.id.empty() || !ids.insert(cr.id).second)
            throw SchemaError(path + ".id", "criterion ids must be non-empty and unique");
        const auto& flow = member(c, "flow", path);
        if (!flow.is_object())
            throw SchemaError(path + ".flow", "expected an object");
        cr.src_fn = get_string(flow, "src", path + ".flow");
        cr.dst_fn = get_string(flow, "dst", path + ".flow");
        if (c.contains("kind")) {
            auto k = get_string(c, "kind", path);
            if (k == "functional")
                cr.kind = TestKind::functional;
            else if (k == "nonfunctional")
                cr.kind = TestKind::nonfunctional;
            else
                throw SchemaError(path + ".kind", "expected functional or nonfunctional");
        }
        cr.min_delivery_ratio = opt_number(c, "min_delivery_ratio", path);
        check_ratio(cr.min_delivery_ratio, path + ".min_delivery_ratio");
        cr.max_p95_latency_ms = opt_number(c, "max_p95_latency_ms", path);
        if (cr.max_p95_latency_ms && *cr.max_p95_latency_ms < 0)
            throw SchemaError(path + ".max_p95_latency_ms", "must be non-negative");
        if (c.contains("faults")) {
            const auto& fs = c.at("faults");
            if (!fs.is_array())
                throw SchemaError(path + ".faults", "expected an array");
            for (std::size_t k = 0; k < fs.size(); ++k)
                cr.faults.push_back(fault_from_json(fs[k], path + ".faults[" + std::to_string(k) + "]"));
        }
        cr.duration_ms = opt_number(c, "duration_ms", path).value_or(10000.0);
        if (!(cr.duration_ms > 0))
            throw SchemaError(path + ".duration_ms", "must be positive");
        if (cr.kind == TestKind::functional && (!cr.faults.empty() || cr.max_p95_latency_ms))
            throw SchemaError(path, "a functional criterion carries neither faults nor latency bounds");
        out.push_back(std::move(cr));
    }
    return out;
}

std::vector<TestCase> emit_tests(const std::vector<Criterion>& criteria, const DeploymentPlan& plan) {
    std::vector<TestCase> out;
    for (const auto& c : criteria) {
        bool known = std::any_of(plan.flows.begin(), plan.flows.end(),
                                 [&](const FlowTopics& f) { return f.src_fn == c.src_fn && f.dst_fn == c.dst_fn; });
        if (!known)
            throw UnknownFlowError("criterion " + c.id + ": no flow " + c.src_fn + " -> " + c.dst_fn);
        for (std::size_t k = 0; k < c.faults.size(); ++k) {
            const auto& f = c.faults[k];
            bool ok = f.kind == FaultKind::node_crash
                          ? plan.find_node(f.target) != nullptr
                          : std::binary_search(plan.links.begin(), plan.links.end(), f.target);
            if (!ok)
                throw SchemaError("criterion " + c.id + ".faults[" + std::to_string(k) + "]",
                                  "unknown " + std::string(f.kind == FaultKind::node_crash ? "node" : "link") +
                                      " '" + f.target + "'");
        }
        TestCase t;
        t.id = c.id;
        t.src_fn = c.src_fn;
        t.dst_fn = c.dst_fn;
        t.duration_ms = c.duration_ms;
        t.kind = c.kind.value_or(c.faults.empty() && !c.max_p95_latency_ms ? TestKind::functional
                                                                           : TestKind::nonfunctional);
        if (t.kind == TestKind::functional) {
            t.min_delivery_ratio = c.min_delivery_ratio.value_or(1.0);
        } else {
            t.min_delivery_ratio = c.min_delivery_ratio;
            t.max_p95_latency_ms = c.max_p95_latency_ms;
            t.faults = c.faults;
            if (!t.min_delivery_ratio && !t.max_p95_latency_ms)
                t.min_delivery_ratio = 1.0;
        }
        out.push_back(std::move(t));
    }
    return out;
}

Json test_case_to_json(const TestCase& t) {
    Json j;
    j["id"] = t.id;
    j["kind"] = to_string(t.kind);
    j["flow"] = Json{{"src", t.src_fn}, {"dst", t.dst_fn}};
    Json a = Json::object();
    if (t.min_delivery_ratio)
        a["min_delivery_ratio"] = decimal_json(*t.min_delivery_ratio);
    if (t.max_p95_latency_ms)
        a["max_p95_latency_ms"] = decimal_json(*t.max_p95_latency_ms);
    j["assertions"] = a;
    j["faults"] = Json::array();
    for (const auto& f : t.faults)
        j["faults"].push_back(fault_to_json(f));
    j["duration_ms"] = decimal_json(t.duration_ms);
    return j;
}

std::string suite_to_json(const std::vector<TestCase>& suite) {
    Json j = Json::array();
    for (const auto& t : suite)
        j.push_back(test_case_to_json(t));
    return dump_json(j);
}

std::vector<TestCase> load_suite(std::string_view doc) {
    auto j = parse_json(doc);
    if (!j.is_array())
        throw SchemaError("$", "expected an array of test cases");
    std::vector<TestCase> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        auto path = "$[" + std::to_string(i) + "]";
        const auto& c = j[i];
        if (!c.is_object())
            throw SchemaError(path, "expected an object");
        TestCase t;
        t.id = get_string(c, "id", path);
        auto kind = get_string(c, "kind", path);
        if (kind != "functional" && kind != "nonfunctional")
            throw SchemaError(path + ".kind", "expected functional or nonfunctional");
        t.kind = kind == "functional" ? TestKind::functional : TestKind::nonfunctional;
        const auto& flow = member(c, "flow", path);
        t.src_fn = get_string(flow, "src", path + ".flow");
        t.dst_fn = get_string(flow, "dst", path + ".flow");
        const auto& a = member(c, "assertions", path);
        t.min_delivery_ratio = opt_number(a, "min_delivery_ratio", path + ".assertions");
        check_ratio(t.min_delivery_ratio, path + ".assertions.min_delivery_ratio");
        t.max_p95_latency_ms = opt_number(a, "max_p95_latency_ms", path + ".assertions");
        if (!t.min_delivery_ratio && !t.max_p95_latency_ms)
            throw SchemaError(path + ".assertions", "at least one assertion is required");
        if (c.contains("faults")) {
            const auto& fs = c.at("faults");
            if (!fs.is_array())
                throw SchemaError(path + ".faults", "expected an array");
            for (std::size_t k = 0; k < fs.size(); ++k)
                t.faults.push_back(fault_from_json(fs[k], path + ".faults[" + std::to_string(k) + "]"));
        }
        t.duration_ms = get_number(c, "duration_ms", path);
        if (!(t.duration_ms > 0))
            throw SchemaError(path + ".duration_ms", "must be positive");
        out.push_back(std::move(t));
    }
    return out;
}

std::string render_deploy_yaml(const NodeDeployment& n) {
    YAML::Emitter y;
    y << YAML::BeginMap;
    y << YAML::Key << "node" << YAML::Value << n.node;
    y << YAML::Key << "address" << YAML::Value << n.address;
    y << YAML::Key << "services" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : n.services) {
        y << YAML::BeginMap;
        y << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << s.name;
        y << YAML::Key << "command" << YAML::Value << YAML::DoubleQuoted << s.command;
        y << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
        for (const auto& [k, v] : s.env)
            y << YAML::Key << k << YAML::Value << YAML::DoubleQuoted << v;
        y << YAML::EndMap;
        y << YAML::Key << "restart" << YAML::Value << s.restart;
        y << YAML::EndMap;
    }
    y << YAML::EndSeq << YAML::EndMap;
    return std::string(y.c_str()) + "\n";
}

std::vector<NodeDeployment> load_deployment(const std::filesystem::path& deploy_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(deploy_dir, ec))
        throw IoError("deployment directory " + deploy_dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(deploy_dir))
        if (e.path().extension() == ".yaml")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<NodeDeployment> out;
    for (const auto& file : files) {
        auto path = file.filename().string();
        YAML::Node doc;
        try {
            doc = YAML::Load(read_file(file));
        } catch (const YAML::Exception& e) {
            throw SyntaxError(path + ": " + e.what());
        }
        try {
            NodeDeployment n;
            n.node = doc["node"].as<std::string>();
            n.address = doc["address"].as<std::string>();
            for (const auto& s : doc["services"]) {
                ServiceEntry e;
                e.name = s["name"].as<std::string>();
                e.command = s["command"].as<std::string>();
                e.restart = s["restart"].as<std::string>();
                for (const auto& kv : s["env"])
                    e.env.emplace_back(kv.first.as<std::string>(), kv.second.as<std::string>());
                std::sort(e.env.begin(), e.env.end());
                const auto* inst = e.env_value("INSTANCE");
                const auto* port = e.env_value("PORT");
                if (!inst || !port)
                    throw SchemaError(path, "service " + e.name + " lacks INSTANCE or PORT");
                e.instance = *inst;
                e.port = std::stoi(*port);
                e.voter = e.env_value("VOTE_QUORUM") != nullptr;
                n.services.push_back(std::move(e));
            }
            out.push_back(std::move(n));
        } catch (const YAML::Exception& e) {
            throw SchemaError(path, e.what());
        } catch (const std::logic_error& e) {
            throw SchemaError(path, std::string("bad value: ") + e.what());
        }
    }
    return out;
}

Json manifest_to_json(const Manifest& m) {
    Json j = Json::object();
    for (const auto& [file, digest] : m)
        j[file] = digest;
    return j;
}

Manifest render(const DeploymentPlan& plan, const std::vector<AdapterSpec>& adapters,
                const std::vector<TestCase>& tests, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    Manifest m;
    try {
        for (const char* sub : {"deploy", "adapters", "tests"}) {
            fs::remove_all(out_dir / sub);
            fs::create_directories(out_dir / sub);
        }
    } catch (const fs::filesystem_error& e) {
        throw IoError(std::string("cannot prepare ") + out_dir.string() + ": " + e.what());
    }
    auto emit = [&](const std::string& rel, const std::string& content) {
        write_file(out_dir / rel, content);
        m[rel] = sha256_hex(content);
    };
    for (const auto& n : plan.nodes)
        emit("deploy/" + n.node + ".yaml", render_deploy_yaml(n));
    for (const auto& a : adapters)
        emit("adapters/" + a.instance + ".txt", render_adapter(a));
    emit("tests/suite.json", suite_to_json(tests));
    write_file(out_dir / "manifest.json", dump_json(manifest_to_json(m)));
    return m;
}

} // namespace forge::codegen
