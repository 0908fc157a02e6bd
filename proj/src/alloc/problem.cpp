#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>

#include "forge/alloc/allocator.hpp"
#include "forge/error.hpp"

namespace forge::alloc {

std::optional<std::size_t> AllocationProblem::instance_index(const InstanceId& id) const {
    auto it = std::lower_bound(instances.begin(), instances.end(), id,
                               [](const InstanceReq& r, const InstanceId& x) { return r.id < x; });
    if (it == instances.end() || it->id != id)
        return std::nullopt;
    return static_cast<std::size_t>(it - instances.begin());
}

std::optional<std::size_t> AllocationProblem::node_index(std::string_view id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const HardwareNode& n, std::string_view x) { return n.id < x; });
    if (it == nodes.end() || it->id != id)
        return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

namespace {

std::int64_t micro(double ms) { return std::llround(ms * 1e6); }

// Shortest path by latency, ties by the lexicographically smallest node-index
// sequence (node indices follow id order).
std::vector<Route> routes_from(std::size_t src, std::size_t n,
                               const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& adj,
                               const std::vector<Link>& links) {
    struct Label {
        std::int64_t dist;
        std::vector<std::size_t> path;
        bool operator>(const Label& o) const { return std::tie(dist, path) > std::tie(o.dist, o.path); }
    };
    std::vector<std::optional<Label>> best(n);
    std::vector<bool> done(n, false);
    std::priority_queue<Label, std::vector<Label>, std::greater<>> queue;
    best[src] = Label{0, {src}};
    queue.push(*best[src]);
    while (!queue.empty()) {
        Label cur = queue.top();
        queue.pop();
        std::size_t u = cur.path.back();
        if (done[u])
            continue;
        done[u] = true;
        for (auto [v, li] : adj[u]) {
            if (done[v])
                continue;
            Label next{cur.dist + micro(links[li].latency_ms), cur.path};
            next.path.push_back(v);
            if (!best[v] || std::tie(next.dist, next.path) < std::tie(best[v]->dist, best[v]->path)) {
                best[v] = next;
                queue.push(next);
            }
        }
    }
    std::vector<Route> out(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (!best[v])
            continue;
        out[v].reachable = true;
        out[v].nodes = best[v]->path;
    }
    return out;
}

void fill_links(Route& r, const std::map<std::pair<std::size_t, std::size_t>, std::size_t>& link_of,
                const std::vector<Link>& links) {
    r.links.clear();
    double lat = 0.0;
    for (std::size_t k = 1; k < r.nodes.size(); ++k) {
        auto a = std::min(r.nodes[k - 1], r.nodes[k]);
        auto b = std::max(r.nodes[k - 1], r.nodes[k]);
        auto li = link_of.at({a, b});
        r.links.push_back(li);
        lat += links[li].latency_ms;
    }
    r.latency_ms = round_decimal(lat);
}

} // namespace

AllocationProblem build_problem(const InstanceModel& model, const std::vector<Pin>& pins) {
    AllocationProblem p;
    p.nodes = model.hardware;
    std::sort(p.nodes.begin(), p.nodes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    p.links = model.links;
    std::sort(p.links.begin(), p.links.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    for (const auto& f : model.functions)
        p.functions.push_back(f.id);
    std::sort(p.functions.begin(), p.functions.end());
    for (const auto& id : expand_instances(model)) {
        const auto* f = model.find_function(id.function);
        InstanceReq r;
        r.id = id;
        r.function = static_cast<std::size_t>(
            std::lower_bound(p.functions.begin(), p.functions.end(), id.function) - p.functions.begin());
        r.cpu_req = f->cpu_req;
        r.mem_req = f->mem_req;
        r.power_req = f->power_req;
        r.asil = f->asil;
        p.instances.push_back(std::move(r));
    }

    std::vector<const FlowEdge*> edges;
    for (const auto& e : model.edges)
        edges.push_back(&e);
    std::sort(edges.begin(), edges.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    for (const auto* e : edges) {
        const auto* src = model.find_function(e->src_fn);
        const auto* dst = model.find_function(e->dst_fn);
        for (int i = 0; i < src->redundancy; ++i)
            for (int j = 0; j < dst->redundancy; ++j) {
                Flow fl;
                fl.edge = e->id;
                fl.src = *p.instance_index({e->src_fn, i});
                fl.dst = *p.instance_index({e->dst_fn, j});
                fl.rate_hz = e->rate_hz;
                fl.msg_bytes = e->msg_bytes;
                fl.latency_budget_ms = e->latency_budget_ms;
                p.flows.push_back(std::move(fl));
            }
    }

    const std::size_t n = p.nodes.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> link_of;
    for (std::size_t li = 0; li < p.links.size(); ++li) {
        auto a = p.node_index(p.links[li].endpoint_a);
        auto b = p.node_index(p.links[li].endpoint_b);
        if (!a || !b)
            throw UnknownNodeError("link '" + p.links[li].id + "' names an unknown node");
        adj[*a].push_back({*b, li});
        adj[*b].push_back({*a, li});
        link_of[{std::min(*a, *b), std::max(*a, *b)}] = li;
    }
    p.routes.assign(n, std::vector<Route>(n));
    for (std::size_t a = 0; a < n; ++a) {
        auto from_a = routes_from(a, n, adj, p.links);
        for (std::size_t b = a; b < n; ++b) {
            Route r = from_a[b];
            fill_links(r, link_of, p.links);
            Route back = r;
            std::reverse(back.nodes.begin(), back.nodes.end());
            std::reverse(back.links.begin(), back.links.end());
            p.routes[a][b] = std::move(r);
            p.routes[b][a] = std::move(back);
        }
    }

    p.pins.assign(p.instances.size(), std::nullopt);
    for (const auto& pin : pins) {
        auto i = p.instance_index(pin.instance);
        if (!i)
            throw CoverageError("pin names unknown instance '" + pin.instance.str() + "'");
        auto nd = p.node_index(pin.node);
        if (!nd)
            throw UnknownNodeError("pin names unknown node '" + pin.node + "'");
        p.pins[*i] = *nd;
    }
    return p;
}

AllocationMatrix to_matrix(const AllocationProblem& p, const Assignment& a) {
    AllocationMatrix m;
    m.placements.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        m.placements.push_back({p.instances[i].id, p.nodes[a[i]].id});
    return m;
}

Assignment from_matrix(const AllocationProblem& p, const AllocationMatrix& m) {
    constexpr auto unset = static_cast<std::size_t>(-1);
    Assignment a(p.instances.size(), unset);
    for (const auto& pl : m.placements) {
        auto i = p.instance_index(pl.instance);
        if (!i)
            throw TotalityError("allocation names unknown instance '" + pl.instance.str() + "'");
        if (a[*i] != unset)
            throw TotalityError("instance '" + pl.instance.str() + "' is placed twice");
        auto n = p.node_index(pl.node);
        if (!n)
            throw UnknownNodeError("allocation names unknown node '" + pl.node + "'");
        a[*i] = *n;
    }
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == unset)
            throw TotalityError("instance '" + p.instances[i].id.str() + "' is not placed");
    return a;
}

std::string_view to_string(ViolationKind k) noexcept {
    switch (k) {
    case ViolationKind::cpu_capacity: return "cpu_capacity";
    case ViolationKind::mem_capacity: return "mem_capacity";
    case ViolationKind::asil: return "asil";
    case ViolationKind::anti_affinity: return "anti_affinity";
    case ViolationKind::pinning: return "pinning";
    case ViolationKind::link_bandwidth: return "link_bandwidth";
    case ViolationKind::latency_budget: return "latency_budget";
    case ViolationKind::unroutable: return "unroutable";
    }
    return "?";
}

std::string describe(const Violation& v) {
    std::string s(to_string(v.kind));
    s += "(";
    for (std::size_t i = 0; i < v.subjects.size(); ++i)
        s += (i ? ", " : "") + v.subjects[i];
    return s + ") by " + format_decimal(v.magnitude);
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) noexcept {
    auto x = a.values(), y = b.values();
    bool strict = false;
    for (int k = 0; k < 3; ++k) {
        if (x[k] > y[k])
            return false;
        strict = strict || x[k] < y[k];
    }
    return strict;
}

Assessor::Assessor(const AllocationProblem& p) : p_(p) {}

Assessment Assessor::run(const Assignment& a, std::vector<Violation>* details) {
    const auto& p = p_;
    const std::size_t n = p.nodes.size();
    if (a.size() != p.instances.size())
        throw TotalityError("assignment covers " + std::to_string(a.size()) + " of " +
                            std::to_string(p.instances.size()) + " instances");
    cpu_.assign(n, 0);
    mem_.assign(n, 0);
    power_.assign(n, 0.0);
    hosted_.assign(n, 0);
    per_function_node_.assign(p.functions.size() * n, 0);
    link_load_.assign(p.links.size(), 0.0);

    Assessment out;
    auto add = [&](ViolationKind kind, std::vector<std::string> subjects, double magnitude, double normalized) {
        out.violation += normalized;
        ++out.violation_count;
        if (details)
            details->push_back(Violation{kind, std::move(subjects), round_decimal(magnitude), normalized});
    };

    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& inst = p.instances[i];
        std::size_t nd = a[i];
        if (nd >= n)
            throw TotalityError("instance '" + inst.id.str() + "' is placed on a node index out of range");
        cpu_[nd] += inst.cpu_req;
        mem_[nd] += inst.mem_req;
        power_[nd] += inst.power_req;
        ++hosted_[nd];
        ++per_function_node_[inst.function * n + nd];
    }

    for (std::size_t nd = 0; nd < n; ++nd)
        if (cpu_[nd] > p.nodes[nd].cpu_cap) {
            double ex = static_cast<double>(cpu_[nd] - p.nodes[nd].cpu_cap);
            add(ViolationKind::cpu_capacity, {p.nodes[nd].id}, ex, ex / static_cast<double>(p.nodes[nd].cpu_cap));
        }
    for (std::size_t nd = 0; nd < n; ++nd)
        if (mem_[nd] > p.nodes[nd].mem_cap) {
            double ex = static_cast<double>(mem_[nd] - p.nodes[nd].mem_cap);
            add(ViolationKind::mem_capacity, {p.nodes[nd].id}, ex, ex / static_cast<double>(p.nodes[nd].mem_cap));
        }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& inst = p.instances[i];
        const auto& node = p.nodes[a[i]];
        if (!asil_at_least(node.asil_cap, inst.asil)) {
            double gap = static_cast<double>(static_cast<int>(inst.asil) - static_cast<int>(node.asil_cap));
            add(ViolationKind::asil, {inst.id.str(), node.id}, gap, gap / 4.0);
        }
    }
    for (std::size_t f = 0; f < p.functions.size(); ++f)
        for (std::size_t nd = 0; nd < n; ++nd) {
            int c = per_function_node_[f * n + nd];
            if (c > 1)
                add(ViolationKind::anti_affinity, {p.functions[f], p.nodes[nd].id}, c - 1, c - 1);
        }
    for (std::size_t i = 0; i < a.size(); ++i)
        if (p.pins[i] && *p.pins[i] != a[i])
            add(ViolationKind::pinning, {p.instances[i].id.str(), p.nodes[*p.pins[i]].id}, 1.0, 1.0);

    double traffic = 0.0;
    std::vector<std::pair<std::size_t, double>> late;      // flow, excess
    std::vector<std::size_t> unroutable;
    for (std::size_t k = 0; k < p.flows.size(); ++k) {
        const auto& fl = p.flows[k];
        std::size_t na = a[fl.src], nb = a[fl.dst];
        if (na == nb)
            continue;
        const Route& r = p.routes[na][nb];
        if (!r.reachable) {
            unroutable.push_back(k);
            continue;
        }
        double bps = fl.bps();
        for (auto li : r.links)
            link_load_[li] += bps;
        traffic += bps * static_cast<double>(r.hops());
        if (fl.latency_budget_ms) {
            double ex = round_decimal(r.latency_ms - *fl.latency_budget_ms);
            if (ex > 0)
                late.push_back({k, ex});
        }
    }
    for (std::size_t li = 0; li < p.links.size(); ++li) {
        double ex = round_decimal(link_load_[li] - p.links[li].bandwidth_bps);
        if (ex > 0)
            add(ViolationKind::link_bandwidth, {p.links[li].id}, ex, ex / p.links[li].bandwidth_bps);
    }
    for (auto [k, ex] : late) {
        const auto& fl = p.flows[k];
        double budget = *fl.latency_budget_ms;
        add(ViolationKind::latency_budget, {fl.edge, p.instances[fl.src].id.str(), p.instances[fl.dst].id.str()}, ex,
            budget > 0 ? ex / budget : ex);
    }
    for (auto k : unroutable) {
        const auto& fl = p.flows[k];
        add(ViolationKind::unroutable, {fl.edge, p.instances[fl.src].id.str(), p.instances[fl.dst].id.str()},
            fl.bps(), 1.0);
    }

    double power = 0.0, cost = 0.0;
    for (std::size_t nd = 0; nd < n; ++nd)
        if (hosted_[nd] > 0) {
            power += p.nodes[nd].base_power + power_[nd];
            cost += p.nodes[nd].cost;
        }
    out.objectives = {round_decimal(power), round_decimal(cost), round_decimal(traffic)};
    return out;
}

std::vector<Violation> check_feasible(const AllocationProblem& p, const Assignment& a) {
    std::vector<Violation> vs;
    Assessor(p).run(a, &vs);
    return vs;
}

std::vector<Violation> check_feasible(const AllocationProblem& p, const AllocationMatrix& m) {
    return check_feasible(p, from_matrix(p, m));
}

ObjectiveVector objectives(const AllocationProblem& p, const Assignment& a) { return Assessor(p).run(a).objectives; }

ObjectiveVector objectives(const AllocationProblem& p, const AllocationMatrix& m) {
    return objectives(p, from_matrix(p, m));
}

Json violations_to_json(const std::vector<Violation>& vs) {
    Json arr = Json::array();
    for (const auto& v : vs) {
        Json j;
        j["kind"] = std::string(to_string(v.kind));
        j["subjects"] = v.subjects;
        j["magnitude"] = decimal_json(v.magnitude);
        arr.push_back(std::move(j));
    }
    return arr;
}

Json front_to_json(const ParetoSet& front) {
    Json arr = Json::array();
    for (const auto& pt : front.points) {
        Json assignment = Json::object();
        for (const auto& pl : pt.matrix.placements)
            assignment[pl.instance.str()] = pl.node;
        Json obj;
        obj["power_w"] = decimal_json(pt.objectives.power_w);
        obj["cost"] = decimal_json(pt.objectives.cost);
        obj["traffic_bps"] = decimal_json(pt.objectives.traffic_bps);
        Json j;
        j["assignment"] = std::move(assignment);
        j["objectives"] = std::move(obj);
        arr.push_back(std::move(j));
    }
    return arr;
}

std::string allocation_csv(const AllocationMatrix& m) {
    std::string out = "instance,node\n";
    for (const auto& pl : m.placements)
        out += pl.instance.str() + "," + pl.node + "\n";
    return out;
}

} // namespace forge::alloc
