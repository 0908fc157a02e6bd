#include <algorithm>
#include <map>
#include <set>

#include "forge/codegen/codegen.hpp"
#include "forge/error.hpp"

namespace forge::codegen {

std::string_view to_string(Middleware m) noexcept { return m == Middleware::pubsub ? "pubsub" : "queue"; }
std::string_view to_string(Virtualization v) noexcept {
    return v == Virtualization::container ? "container" : "process";
}

void RuntimeEnvSpec::validate() const {
    if (base_port < 1024 || base_port > 60000)
        throw PreconditionError("base_port " + std::to_string(base_port) + " is outside [1024, 60000]");
    if (subnet_prefix.empty())
        throw PreconditionError("subnet prefix is empty");
}

const std::string* ServiceEntry::env_value(std::string_view key) const noexcept {
    for (const auto& [k, v] : env)
        if (k == key)
            return &v;
    return nullptr;
}

const NodeDeployment* DeploymentPlan::find_node(std::string_view id) const noexcept {
    for (const auto& n : nodes)
        if (n.node == id)
            return &n;
    return nullptr;
}

const NodeDeployment* DeploymentPlan::node_of_service(std::string_view name) const noexcept {
    for (const auto& n : nodes)
        for (const auto& s : n.services)
            if (s.name == name)
                return &n;
    return nullptr;
}

std::string topic_name(const FunctionSpec& src, std::string_view port, int replica) {
    std::string t = src.id + "/" + std::string(port);
    if (src.redundancy > 1)
        t += "#" + std::to_string(replica);
    return t;
}

std::string voter_name(std::string_view src_fn, std::string_view src_port, std::string_view consumer) {
    return "vote_" + std::string(src_fn) + "." + std::string(src_port) + "@" + std::string(consumer);
}

std::string voted_topic(std::string_view src_fn, std::string_view src_port, std::string_view consumer) {
    return std::string(src_fn) + "/" + std::string(src_port) + "@" + std::string(consumer);
}

namespace {

std::string join(const std::vector<std::string>& xs, char sep = ',') {
    std::string out;
    for (const auto& x : xs) {
        if (!out.empty())
            out += sep;
        out += x;
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size() && !s.empty()) {
        auto at = s.find(',', start);
        out.push_back(s.substr(start, at == std::string::npos ? std::string::npos : at - start));
        if (at == std::string::npos)
            break;
        start = at + 1;
    }
    return out;
}

bool is_voted(const FunctionSpec& f) { return f.safety_mechanism == SafetyMechanism::voting && f.redundancy > 1; }

std::string command_for(const RuntimeEnvSpec& rt, const std::string& image) {
    if (rt.virtualization == Virtualization::container)
        return "container run --env-file ${SERVICE_ENV} forge/" + image + ":latest";
    return "bin/" + image;
}

// Services draft: peers are filled in once ports are known.
struct Draft {
    ServiceEntry svc;
    std::string node;
    std::map<std::string, std::set<std::string>> peers; // env key -> producer service names
};

} // namespace

DeploymentPlan plan_deployment(const InstanceModel& model, const RuntimeEnvSpec& rtenv) {
    rtenv.validate();
    if (!model.allocation)
        throw MissingAllocationError("the model carries no allocation; run the allocator first");

    std::map<std::string, std::string> placed;
    for (const auto& p : *model.allocation)
        if (!placed.emplace(p.instance.str(), p.node).second)
            throw ConsistencyError("instance " + p.instance.str() + " is allocated twice");
    for (const auto& id : expand_instances(model))
        if (!placed.count(id.str()))
            throw ConsistencyError("instance " + id.str() + " has no allocation");

    DeploymentPlan plan;
    plan.rtenv = rtenv;
    auto hw = model.hardware;
    std::sort(hw.begin(), hw.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < hw.size(); ++i)
        plan.nodes.push_back({hw[i].id, rtenv.subnet_prefix + std::to_string(i + 1), {}});
    for (const auto& l : model.links)
        plan.links.push_back(l.id);
    std::sort(plan.links.begin(), plan.links.end());

    auto edges = model.edges;
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& e : edges) {
        const auto* src = model.find_function(e.src_fn);
        if (!src || !model.find_function(e.dst_fn))
            throw ConsistencyError("edge " + e.id + " references an unknown function");
        FlowTopics ft{e.id, e.src_fn, e.src_port, e.dst_fn, e.dst_port, {}, is_voted(*src)};
        for (int k = 0; k < src->redundancy; ++k)
            ft.topics.push_back(topic_name(*src, e.src_port, k));
        plan.flows.push_back(std::move(ft));
    }

    const auto mw = std::string(to_string(rtenv.middleware));
    std::map<std::string, Draft> drafts; // by service name
    for (const auto& f : model.functions) {
        for (int k = 0; k < f.redundancy; ++k) {
            InstanceId id{f.id, k};
            Draft d;
            d.svc.name = id.str();
            d.svc.instance = id.str();
            d.node = placed.at(id.str());
            d.svc.command = command_for(rtenv, f.id);
            d.svc.env = {{"FUNCTION", f.id}, {"INSTANCE", id.str()}, {"MIDDLEWARE", mw},
                         {"REPLICA", std::to_string(k)}};
            for (const auto& p : f.out_ports)
                d.svc.env.emplace_back("PUBLISH_" + p.name, topic_name(f, p.name, k));
            for (const auto& p : f.in_ports) {
                std::set<std::string> topics;
                auto& peers = d.peers["PEERS_" + p.name];
                for (const auto& ft : plan.flows) {
                    if (ft.dst_fn != f.id || ft.dst_port != p.name)
                        continue;
                    if (ft.voted) {
                        topics.insert(voted_topic(ft.src_fn, ft.src_port, id.str()));
                        peers.insert(voter_name(ft.src_fn, ft.src_port, id.str()));
                    } else {
                        topics.insert(ft.topics.begin(), ft.topics.end());
                        for (std::size_t r = 0; r < ft.topics.size(); ++r)
                            peers.insert(InstanceId{ft.src_fn, static_cast<int>(r)}.str());
                    }
                }
                d.svc.env.emplace_back("SUBSCRIBE_" + p.name, join({topics.begin(), topics.end()}));
            }
            drafts.emplace(d.svc.name, std::move(d));
        }
    }
    for (const auto& ft : plan.flows) {
        if (!ft.voted)
            continue;
        const auto* dst = model.find_function(ft.dst_fn);
        for (int k = 0; k < dst->redundancy; ++k) {
            auto consumer = InstanceId{ft.dst_fn, k}.str();
            auto name = voter_name(ft.src_fn, ft.src_port, consumer);
            if (drafts.count(name))
                continue; // same producer port feeding several edges
            Draft d;
            d.svc.name = name;
            d.svc.instance = consumer;
            d.svc.voter = true;
            d.node = placed.at(consumer);
            d.svc.command = command_for(rtenv, "voter");
            d.svc.env = {{"INSTANCE", consumer},
                         {"MIDDLEWARE", mw},
                         {"PUBLISH_voted", voted_topic(ft.src_fn, ft.src_port, consumer)},
                         {"SUBSCRIBE_replicas", join(ft.topics)},
                         {"VOTE_QUORUM", std::to_string(voting_quorum(static_cast<int>(ft.topics.size())))},
                         {"VOTE_WINDOW_MS", std::to_string(voting_window_ms)}};
            auto& peers = d.peers["PEERS_replicas"];
            for (std::size_t r = 0; r < ft.topics.size(); ++r)
                peers.insert(InstanceId{ft.src_fn, static_cast<int>(r)}.str());
            drafts.emplace(name, std::move(d));
        }
    }

    // drafts iterate in name order, so ports follow sorted service names per node
    std::map<std::string, std::size_t> node_slot;
    for (std::size_t i = 0; i < plan.nodes.size(); ++i)
        node_slot[plan.nodes[i].node] = i;
    std::map<std::string, std::string> endpoint; // service -> address:port
    for (auto& [name, d] : drafts) {
        auto slot = node_slot.find(d.node);
        if (slot == node_slot.end())
            throw ConsistencyError("service " + name + " is allocated to unknown node " + d.node);
        auto& nd = plan.nodes[slot->second];
        d.svc.port = rtenv.base_port + static_cast<int>(nd.services.size());
        if (d.svc.port > 65535)
            throw ConsistencyError("node " + nd.node + " runs out of ports");
        d.svc.env.emplace_back("PORT", std::to_string(d.svc.port));
        endpoint[name] = nd.address + ":" + std::to_string(d.svc.port);
        nd.services.push_back(d.svc);
    }
    for (auto& nd : plan.nodes)
        for (auto& s : nd.services) {
            for (const auto& [key, names] : drafts.at(s.name).peers) {
                std::vector<std::string> addrs;
                for (const auto& n : names)
                    addrs.push_back(endpoint.at(n));
                s.env.emplace_back(key, join(addrs));
            }
            std::sort(s.env.begin(), s.env.end());
        }

    // idle nodes get no deployment file; addresses keep their global index
    std::erase_if(plan.nodes, [](const NodeDeployment& n) { return n.services.empty(); });

    if (auto problems = lint_plan(plan, model); !problems.empty()) {
        std::string msg = "deployment plan failed lint: " + problems.front();
        if (problems.size() > 1)
            msg += " (+" + std::to_string(problems.size() - 1) + " more)";
        throw ConsistencyError(msg);
    }
    return plan;
}

std::vector<std::string> lint_plan(const DeploymentPlan& plan, const InstanceModel& model) {
    std::vector<std::string> out;
    std::set<std::string> addresses;
    std::map<std::string, std::string> endpoints; // address:port -> service
    std::map<std::string, const ServiceEntry*> services;
    std::map<std::string, std::string> service_node;
    std::map<std::string, std::string> publisher; // topic -> service
    for (const auto& n : plan.nodes) {
        if (!model.find_node(n.node))
            out.push_back("node " + n.node + " is not in the model");
        if (!addresses.insert(n.address).second)
            out.push_back("address " + n.address + " is assigned twice");
        std::set<int> ports;
        for (const auto& s : n.services) {
            if (!ports.insert(s.port).second)
                out.push_back("port " + std::to_string(s.port) + " is used twice on " + n.node);
            if (!services.emplace(s.name, &s).second)
                out.push_back("service " + s.name + " is deployed twice");
            service_node[s.name] = n.node;
            endpoints[n.address + ":" + std::to_string(s.port)] = s.name;
            const auto* port = s.env_value("PORT");
            if (!port || *port != std::to_string(s.port))
                out.push_back("service " + s.name + " has a PORT entry that disagrees with its port");
            for (const auto& [k, v] : s.env)
                if (k.rfind("PUBLISH_", 0) == 0 && !publisher.emplace(v, s.name).second)
                    out.push_back("topic " + v + " has two publishers");
        }
    }

    // placement fidelity
    std::map<std::string, std::string> placed;
    if (model.allocation)
        for (const auto& p : *model.allocation)
            placed[p.instance.str()] = p.node;
    for (const auto& f : model.functions) {
        std::set<std::string> replica_nodes;
        for (int k = 0; k < f.redundancy; ++k) {
            auto id = InstanceId{f.id, k}.str();
            auto it = services.find(id);
            if (it == services.end() || it->second->voter) {
                out.push_back("instance " + id + " has no service");
                continue;
            }
            if (placed.count(id) && placed[id] != service_node[id])
                out.push_back("service " + id + " sits on " + service_node[id] + " but is allocated to " + placed[id]);
            if (!replica_nodes.insert(service_node[id]).second)
                out.push_back("replicas of " + f.id + " share node " + service_node[id]);
        }
    }
    for (const auto& [name, s] : services) {
        if (!s->voter) {
            auto id = InstanceId::parse(name);
            if (!id || !model.find_function(id->function))
                out.push_back("service " + name + " matches no model instance");
            continue;
        }
        if (!services.count(s->instance))
            out.push_back("voter " + name + " guards unknown instance " + s->instance);
        else if (service_node[name] != service_node[s->instance])
            out.push_back("voter " + name + " is not colocated with " + s->instance);
    }

    // referential closure of env maps
    for (const auto& [name, s] : services)
        for (const auto& [k, v] : s->env) {
            if (k.rfind("SUBSCRIBE_", 0) == 0) {
                for (const auto& t : split_list(v))
                    if (!publisher.count(t))
                        out.push_back("service " + name + " subscribes to unpublished topic " + t);
            } else if (k.rfind("PEERS_", 0) == 0) {
                for (const auto& a : split_list(v))
                    if (!endpoints.count(a))
                        out.push_back("service " + name + " names unknown peer " + a);
            }
        }

    // producer and consumer sides of every flow agree
    auto subscribes = [&](const std::string& svc, const std::string& key, const std::string& topic) {
        auto it = services.find(svc);
        if (it == services.end())
            return false;
        const auto* v = it->second->env_value(key);
        if (!v)
            return false;
        auto xs = split_list(*v);
        return std::find(xs.begin(), xs.end(), topic) != xs.end();
    };
    for (const auto& ft : plan.flows) {
        for (std::size_t r = 0; r < ft.topics.size(); ++r) {
            auto prod = InstanceId{ft.src_fn, static_cast<int>(r)}.str();
            auto pub = publisher.find(ft.topics[r]);
            if (pub == publisher.end() || pub->second != prod)
                out.push_back("flow " + ft.edge + ": topic " + ft.topics[r] + " is not published by " + prod);
        }
        const auto* dst = model.find_function(ft.dst_fn);
        if (!dst)
            continue;
        for (int k = 0; k < dst->redundancy; ++k) {
            auto consumer = InstanceId{ft.dst_fn, k}.str();
            if (ft.voted) {
                auto voter = voter_name(ft.src_fn, ft.src_port, consumer);
                for (const auto& t : ft.topics)
                    if (!subscribes(voter, "SUBSCRIBE_replicas", t))
                        out.push_back("flow " + ft.edge + ": voter " + voter + " misses topic " + t);
                if (!subscribes(consumer, "SUBSCRIBE_" + ft.dst_port, voted_topic(ft.src_fn, ft.src_port, consumer)))
                    out.push_back("flow " + ft.edge + ": " + consumer + " does not read its voter");
            } else {
                for (const auto& t : ft.topics)
                    if (!subscribes(consumer, "SUBSCRIBE_" + ft.dst_port, t))
                        out.push_back("flow " + ft.edge + ": " + consumer + " misses topic " + t);
            }
        }
    }
    return out;
}

std::vector<AdapterSpec> emit_adapters(const DeploymentPlan& plan, const InstanceModel& model) {
    std::vector<AdapterSpec> out;
    auto note = [&](const std::string& datatype) {
        return "payload " + datatype + " framed by serialize_" + datatype + "/deserialize_" + datatype +
               " onto " + std::string(to_string(plan.rtenv.middleware)) + " messages";
    };
    for (const auto& id : expand_instances(model)) {
        const auto* f = model.find_function(id.function);
        AdapterSpec a;
        a.instance = id.str();
        const ServiceEntry* svc = nullptr;
        for (const auto& n : plan.nodes)
            for (const auto& s : n.services)
                if (s.name == a.instance && !s.voter)
                    svc = &s;
        auto by_name = [](const Port& x, const Port& y) { return x.name < y.name; };
        auto outs = f->out_ports, ins = f->in_ports;
        std::sort(outs.begin(), outs.end(), by_name);
        std::sort(ins.begin(), ins.end(), by_name);
        for (const auto& p : outs) {
            PortBinding b{p.name, p.datatype, Direction::out, {}, note(p.datatype)};
            if (const auto* v = svc ? svc->env_value("PUBLISH_" + p.name) : nullptr)
                b.topics = split_list(*v);
            a.bindings.push_back(std::move(b));
        }
        for (const auto& p : ins) {
            PortBinding b{p.name, p.datatype, Direction::in, {}, note(p.datatype)};
            if (const auto* v = svc ? svc->env_value("SUBSCRIBE_" + p.name) : nullptr)
                b.topics = split_list(*v);
            a.bindings.push_back(std::move(b));
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::string render_adapter(const AdapterSpec& a) {
    std::string s = "adapter " + a.instance + "\n";
    if (a.bindings.empty())
        s += "  (no ports)\n";
    for (const auto& b : a.bindings) {
        bool out = b.direction == Direction::out;
        s += "\n";
        s += out ? "publish " : "subscribe ";
        s += b.port + " : " + b.datatype + "\n";
        s += "  topics: " + (b.topics.empty() ? std::string("(unwired)") : join(b.topics, ' ')) + "\n";
        s += "  wire: " + b.wire_note + "\n";
        s += out ? "  extension point: on_emit_" + b.port + "(" + b.datatype + "& value)\n"
                 : "  extension point: on_receive_" + b.port + "(const " + b.datatype + "& value)\n";
    }
    return s;
}

} // namespace forge::codegen
