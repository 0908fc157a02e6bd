#include "forge/sim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "forge/alloc/allocator.hpp"
#include "forge/error.hpp"

namespace forge::sim {

SimWorld build_sim(const codegen::DeploymentPlan& plan, const InstanceModel& model) {
    return build_sim(plan.nodes, model);
}

SimWorld build_sim(const std::vector<codegen::NodeDeployment>& deployment, const InstanceModel& model) {
    if (!model.allocation)
        throw MissingAllocationError("simulation needs an enhanced model");
    std::map<std::string, std::string> placed;
    for (const auto& p : *model.allocation)
        placed[p.instance.str()] = p.node;

    std::map<std::string, std::string> service_node;
    std::set<std::string> voters;
    for (const auto& n : deployment)
        for (const auto& s : n.services) {
            if (!service_node.emplace(s.name, n.node).second)
                throw ConsistencyError("service " + s.name + " is deployed twice");
            if (s.voter)
                voters.insert(s.name);
        }
    const auto instances = expand_instances(model);
    std::set<std::string> instance_ids;
    for (const auto& id : instances) {
        auto name = id.str();
        instance_ids.insert(name);
        auto it = service_node.find(name);
        if (it == service_node.end() || voters.count(name))
            throw ConsistencyError("instance " + name + " has no service in the deployment");
        if (placed.count(name) == 0 || placed[name] != it->second)
            throw ConsistencyError("service " + name + " runs on " + it->second + " but the model allocates it to " +
                                   (placed.count(name) ? placed[name] : std::string("nothing")));
    }
    for (const auto& [name, node] : service_node)
        if (!voters.count(name) && !instance_ids.count(name))
            throw ConsistencyError("service " + name + " is not an instance of the model");

    auto problem = alloc::build_problem(model);
    SimWorld w;
    for (const auto& n : problem.nodes)
        w.nodes.push_back(n.id);
    for (const auto& l : problem.links)
        w.links.push_back(l.id);
    std::map<std::string, std::size_t> inst_index;
    for (const auto& id : instances) {
        inst_index[id.str()] = w.instances.size();
        w.instances.push_back({id.str(), id.function, id.replica, *problem.node_index(placed.at(id.str()))});
    }

    auto edges = model.edges;
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& e : edges) {
        const auto* src = model.find_function(e.src_fn);
        const auto* dst = model.find_function(e.dst_fn);
        if (!src || !dst)
            throw ConsistencyError("edge " + e.id + " references an unknown function");
        SimFlow f;
        f.edge = e.id;
        f.src_fn = e.src_fn;
        f.dst_fn = e.dst_fn;
        f.period_ms = e.rate_hz > 0 ? 1000.0 / e.rate_hz : std::numeric_limits<double>::infinity();
        for (int k = 0; k < src->redundancy; ++k)
            f.producers.push_back(inst_index.at(InstanceId{src->id, k}.str()));
        for (int k = 0; k < dst->redundancy; ++k)
            f.consumers.push_back(inst_index.at(InstanceId{dst->id, k}.str()));
        if (src->safety_mechanism == SafetyMechanism::voting && src->redundancy > 1) {
            f.mode = DeliveryMode::voting;
            f.quorum = codegen::voting_quorum(src->redundancy);
            for (std::size_t c : f.consumers) {
                auto v = codegen::voter_name(e.src_fn, e.src_port, w.instances[c].id);
                auto it = service_node.find(v);
                if (it == service_node.end() || !voters.count(v))
                    throw ConsistencyError("voting flow " + e.id + " lacks voter " + v);
                if (it->second != placed.at(w.instances[c].id))
                    throw ConsistencyError("voter " + v + " is not colocated with its consumer");
            }
        }
        for (std::size_t p : f.producers) {
            std::vector<SimPath> row;
            for (std::size_t c : f.consumers) {
                const auto& r = problem.routes[w.instances[p].node][w.instances[c].node];
                SimPath sp;
                sp.reachable = r.reachable;
                sp.latency_ms = r.latency_ms;
                sp.nodes = r.nodes;
                sp.links = r.links;
                double at = 0.0;
                sp.node_pass_ms.push_back(0.0);
                for (std::size_t li : r.links) {
                    sp.link_entry_ms.push_back(at);
                    at += problem.links[li].latency_ms;
                    sp.node_pass_ms.push_back(at);
                }
                row.push_back(std::move(sp));
            }
            f.paths.push_back(std::move(row));
        }
        w.flows.push_back(std::move(f));
    }
    return w;
}

namespace {

std::uint64_t fnv(std::uint64_t h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv_u64(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Emission count: number of k with k * period < horizon.
std::uint64_t emissions(double period, double horizon) {
    if (!std::isfinite(period))
        return 0;
    auto n = static_cast<std::uint64_t>(std::floor(horizon / period));
    while (static_cast<double>(n) * period < horizon)
        ++n;
    while (n > 0 && static_cast<double>(n - 1) * period >= horizon)
        --n;
    return n;
}

enum class EvType { fault, emit, arrive };

struct Event {
    double t;
    int cls; // faults first on equal time
    std::uint64_t serial;
    EvType type;
    std::size_t flow = 0, producer = 0, consumer = 0; // producer/consumer: positions in the flow
    std::uint64_t seq = 0;
    double latency = 0.0;
    std::size_t fault = 0;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t)
            return a.t > b.t;
        if (a.cls != b.cls)
            return a.cls > b.cls;
        return a.serial > b.serial;
    }
};

} // namespace

double drop_draw(std::uint64_t seed, std::string_view edge, std::string_view producer, std::string_view consumer,
                 std::uint64_t seq, std::string_view link) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv_u64(h, seed);
    for (auto part : {edge, producer, consumer}) {
        h = fnv(h, part);
        h = fnv(h, std::string_view("\0", 1));
    }
    h = fnv_u64(h, seq);
    h = fnv(h, link);
    return static_cast<double>(mix(h) >> 11) * 0x1.0p-53;
}

SimReport run(const SimWorld& world, const std::vector<FaultSpec>& faults, double horizon_ms, std::uint64_t seed) {
    if (!(horizon_ms > 0))
        throw PreconditionError("simulation horizon must be positive");
    std::map<std::string, std::size_t> node_ix, link_ix;
    for (std::size_t i = 0; i < world.nodes.size(); ++i)
        node_ix[world.nodes[i]] = i;
    for (std::size_t i = 0; i < world.links.size(); ++i)
        link_ix[world.links[i]] = i;

    // crash time per node and drop schedule per link, for look-ahead along routes
    std::vector<double> crash_at(world.nodes.size(), std::numeric_limits<double>::infinity());
    std::vector<std::vector<std::pair<double, double>>> drops(world.links.size());
    for (const auto& f : faults) {
        if (f.kind == FaultKind::node_crash) {
            auto it = node_ix.find(f.target);
            if (it == node_ix.end())
                throw PreconditionError("fault targets unknown node '" + f.target + "'");
            if (f.at_ms <= horizon_ms)
                crash_at[it->second] = std::min(crash_at[it->second], f.at_ms);
        } else {
            auto it = link_ix.find(f.target);
            if (it == link_ix.end())
                throw PreconditionError("fault targets unknown link '" + f.target + "'");
            if (f.at_ms <= horizon_ms)
                drops[it->second].emplace_back(f.at_ms, f.p);
        }
    }
    auto drop_p = [&](std::size_t link, double t) {
        double p = 0.0;
        for (const auto& [at, q] : drops[link])
            if (at <= t)
                p = std::max(p, q);
        return p;
    };

    SimReport rep;
    rep.seed = seed;
    rep.horizon_ms = horizon_ms;
    std::vector<bool> up(world.nodes.size(), true);
    std::vector<double> link_p(world.links.size(), 0.0);
    for (const auto& n : world.nodes)
        rep.nodes[n].push_back({0.0, true});
    for (const auto& l : world.links)
        rep.links[l].push_back({0.0, 0.0});

    std::priority_queue<Event, std::vector<Event>, Later> q;
    std::uint64_t serial = 0;
    auto push = [&](Event e) {
        e.serial = serial++;
        q.push(e);
    };
    for (std::size_t i = 0; i < faults.size(); ++i)
        if (faults[i].at_ms <= horizon_ms)
            push(Event{faults[i].at_ms, 0, 0, EvType::fault, 0, 0, 0, 0, 0.0, i});

    struct FlowState {
        std::uint64_t n = 0;
        std::vector<std::optional<double>> sample;                 // per seq
        std::vector<std::vector<char>> accepted;                   // [consumer][seq]
        std::vector<std::vector<std::vector<double>>> arrivals;    // [consumer][seq], voting only
    };
    std::vector<FlowState> st(world.flows.size());
    for (std::size_t fi = 0; fi < world.flows.size(); ++fi) {
        const auto& f = world.flows[fi];
        auto& s = st[fi];
        s.n = emissions(f.period_ms, horizon_ms);
        s.sample.assign(s.n, std::nullopt);
        s.accepted.assign(f.consumers.size(), std::vector<char>(s.n, 0));
        if (f.mode == DeliveryMode::voting)
            s.arrivals.assign(f.consumers.size(), std::vector<std::vector<double>>(s.n));
        if (s.n > 0)
            for (std::size_t p = 0; p < f.producers.size(); ++p)
                push(Event{0.0, 1, 0, EvType::emit, fi, p, 0, 0, 0.0, 0});
    }

    while (!q.empty()) {
        Event e = q.top();
        q.pop();
        switch (e.type) {
        case EvType::fault: {
            const auto& f = faults[e.fault];
            if (f.kind == FaultKind::node_crash) {
                auto ni = node_ix.at(f.target);
                if (up[ni]) {
                    up[ni] = false;
                    rep.nodes[f.target].push_back({e.t, false});
                }
            } else {
                auto li = link_ix.at(f.target);
                if (f.p > link_p[li]) {
                    link_p[li] = f.p;
                    rep.links[f.target].push_back({e.t, f.p});
                }
            }
            break;
        }
        case EvType::emit: {
            const auto& f = world.flows[e.flow];
            if (e.seq + 1 < st[e.flow].n)
                push(Event{static_cast<double>(e.seq + 1) * f.period_ms, 1, 0, EvType::emit, e.flow, e.producer, 0,
                           e.seq + 1, 0.0, 0});
            const auto& prod = world.instances[f.producers[e.producer]];
            if (!up[prod.node])
                break;
            for (std::size_t c = 0; c < f.consumers.size(); ++c) {
                const auto& path = f.paths[e.producer][c];
                if (!path.reachable)
                    continue;
                bool lost = false;
                for (std::size_t h = 1; h + 1 < path.nodes.size() && !lost; ++h)
                    lost = crash_at[path.nodes[h]] <= e.t + path.node_pass_ms[h];
                for (std::size_t h = 0; h < path.links.size() && !lost; ++h) {
                    double p = drop_p(path.links[h], e.t + path.link_entry_ms[h]);
                    if (p > 0.0)
                        lost = drop_draw(seed, f.edge, prod.id, world.instances[f.consumers[c]].id, e.seq,
                                         world.links[path.links[h]]) < p;
                }
                if (!lost)
                    push(Event{e.t + path.latency_ms, 1, 0, EvType::arrive, e.flow, e.producer, c, e.seq,
                               path.latency_ms, 0});
            }
            break;
        }
        case EvType::arrive: {
            const auto& f = world.flows[e.flow];
            auto& s = st[e.flow];
            if (!up[world.instances[f.consumers[e.consumer]].node])
                break;
            if (s.accepted[e.consumer][e.seq])
                break;
            if (f.mode == DeliveryMode::voting) {
                auto& got = s.arrivals[e.consumer][e.seq];
                got.push_back(e.latency);
                int within = 0;
                for (double l : got)
                    within += l >= e.latency - codegen::voting_window_ms;
                if (within < f.quorum)
                    break;
            }
            s.accepted[e.consumer][e.seq] = 1;
            if (!s.sample[e.seq])
                s.sample[e.seq] = e.latency;
            break;
        }
        }
    }

    for (std::size_t fi = 0; fi < world.flows.size(); ++fi) {
        const auto& f = world.flows[fi];
        FlowStats fs{f.edge, f.src_fn, f.dst_fn, st[fi].n, 0, {}};
        for (const auto& s : st[fi].sample)
            if (s) {
                ++fs.delivered;
                fs.latencies_ms.push_back(*s);
            }
        rep.flows.push_back(std::move(fs));
    }
    return rep;
}

std::optional<double> percentile_nearest_rank(std::vector<double> samples, double pct) {
    if (samples.empty())
        return std::nullopt;
    std::sort(samples.begin(), samples.end());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(samples.size())));
    rank = std::clamp<std::size_t>(rank, 1, samples.size());
    return samples[rank - 1];
}

TestResults evaluate_tests(const SimReport& report, const std::vector<TestCase>& suite) {
    TestResults out;
    for (const auto& t : suite) {
        CaseResult r;
        r.id = t.id;
        r.kind = t.kind;
        std::vector<double> samples;
        bool found = false;
        for (const auto& f : report.flows)
            if (f.src_fn == t.src_fn && f.dst_fn == t.dst_fn) {
                found = true;
                r.measured.sent += f.sent;
                r.measured.delivered += f.delivered;
                samples.insert(samples.end(), f.latencies_ms.begin(), f.latencies_ms.end());
            }
        if (!found)
            throw UnknownFlowError("test " + t.id + ": no flow " + t.src_fn + " -> " + t.dst_fn + " in the report");
        r.measured.delivery_ratio =
            r.measured.sent ? static_cast<double>(r.measured.delivered) / static_cast<double>(r.measured.sent) : 1.0;
        r.measured.p95_latency_ms = percentile_nearest_rank(samples, 95.0);
        if (t.min_delivery_ratio && r.measured.delivery_ratio < *t.min_delivery_ratio)
            r.failures.push_back("delivery ratio " + format_decimal(r.measured.delivery_ratio) + " is below " +
                                 format_decimal(*t.min_delivery_ratio));
        if (t.max_p95_latency_ms) {
            if (!r.measured.p95_latency_ms)
                r.failures.push_back("no message was delivered, so p95 latency is undefined");
            else if (*r.measured.p95_latency_ms > *t.max_p95_latency_ms)
                r.failures.push_back("p95 latency " + format_decimal(*r.measured.p95_latency_ms) + " ms exceeds " +
                                     format_decimal(*t.max_p95_latency_ms) + " ms");
        }
        r.passed = r.failures.empty();
        if (!r.passed)
            (t.kind == TestKind::functional ? out.functional_failures : out.nonfunctional_failures).push_back(t.id);
        out.cases.push_back(std::move(r));
    }
    return out;
}

SuiteRun run_suite(const SimWorld& world, const std::vector<TestCase>& suite, std::uint64_t seed) {
    SuiteRun out;
    for (const auto& t : suite) {
        auto rep = run(world, t.faults, t.duration_ms, seed);
        auto one = evaluate_tests(rep, {t});
        out.results.cases.push_back(one.cases.front());
        for (auto& id : one.functional_failures)
            out.results.functional_failures.push_back(id);
        for (auto& id : one.nonfunctional_failures)
            out.results.nonfunctional_failures.push_back(id);
        out.reports.push_back(std::move(rep));
    }
    return out;
}

RedundancyOutcome redundancy_scenarios(const codegen::DeploymentPlan& plan, const InstanceModel& model,
                                       double horizon_ms, std::uint64_t seed) {
    if (!model.allocation)
        throw MissingAllocationError("redundancy scenarios need an enhanced model");
    if (!(horizon_ms > 0))
        throw PreconditionError("simulation horizon must be positive");
    std::map<std::string, std::string> placed;
    for (const auto& p : *model.allocation)
        placed[p.instance.str()] = p.node;

    const FunctionSpec* target = nullptr;
    for (const auto& f : model.functions) {
        if (f.redundancy < 2)
            continue;
        std::set<std::string> nodes;
        for (int k = 0; k < f.redundancy; ++k)
            nodes.insert(placed.at(InstanceId{f.id, k}.str()));
        if (static_cast<int>(nodes.size()) == f.redundancy) {
            target = &f;
            break;
        }
    }
    if (!target)
        throw PreconditionError("no function has two or more replicas on distinct nodes");

    // crash the replica whose node hosts the fewest other functions
    RedundancyOutcome out;
    out.function = target->id;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (int k = 0; k < target->redundancy; ++k) {
        const auto& node = placed.at(InstanceId{target->id, k}.str());
        std::size_t others = 0;
        for (const auto& p : *model.allocation)
            others += p.node == node && p.instance.function != target->id;
        if (others < best) {
            best = others;
            out.crashed_replica = k;
            out.crashed_node = node;
        }
    }
    out.crash_at_ms = horizon_ms / 2;

    auto edges = model.edges;
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& e : edges)
        if (e.src_fn == target->id || e.dst_fn == target->id)
            pairs.emplace(e.src_fn, e.dst_fn);
    for (const auto& [src, dst] : pairs) {
        TestCase t;
        t.id = "redundancy_" + src + "_to_" + dst;
        t.kind = TestKind::nonfunctional;
        t.src_fn = src;
        t.dst_fn = dst;
        t.min_delivery_ratio = 1.0;
        t.faults = {FaultSpec{out.crash_at_ms, FaultKind::node_crash, out.crashed_node, 1.0}};
        t.duration_ms = horizon_ms;
        out.suite.push_back(std::move(t));
    }

    out.redundant = run_suite(build_sim(plan, model), out.suite, seed).results;

    InstanceModel degraded = model;
    for (auto& f : degraded.functions)
        if (f.id == target->id) {
            f.redundancy = 1;
            f.safety_mechanism = SafetyMechanism::none;
        }
    std::vector<Placement> alloc;
    for (const auto& p : *model.allocation) {
        if (p.instance.function != target->id)
            alloc.push_back(p);
        else if (p.instance.replica == out.crashed_replica)
            alloc.push_back({{target->id, 0}, p.node});
    }
    degraded.allocation = std::move(alloc);
    canonicalize(degraded);
    auto degraded_plan = codegen::plan_deployment(degraded, plan.rtenv);
    out.degraded = run_suite(build_sim(degraded_plan, degraded), out.suite, seed).results;
    return out;
}

Json report_to_json(const SimReport& r) {
    Json j;
    j["seed"] = r.seed;
    j["horizon_ms"] = decimal_json(r.horizon_ms);
    j["flows"] = Json::array();
    for (const auto& f : r.flows) {
        Json jf;
        jf["edge"] = f.edge;
        jf["src"] = f.src_fn;
        jf["dst"] = f.dst_fn;
        jf["sent"] = f.sent;
        jf["delivered"] = f.delivered;
        jf["ratio"] = decimal_json(f.ratio());
        jf["latencies_ms"] = Json::array();
        for (double l : f.latencies_ms)
            jf["latencies_ms"].push_back(decimal_json(l));
        j["flows"].push_back(std::move(jf));
    }
    j["nodes"] = Json::object();
    for (const auto& [id, tl] : r.nodes) {
        Json a = Json::array();
        for (const auto& s : tl)
            a.push_back(Json{{"at_ms", decimal_json(s.at_ms)}, {"state", s.up ? "up" : "down"}});
        j["nodes"][id] = a;
    }
    j["links"] = Json::object();
    for (const auto& [id, tl] : r.links) {
        Json a = Json::array();
        for (const auto& s : tl)
            a.push_back(Json{{"at_ms", decimal_json(s.at_ms)}, {"drop_p", decimal_json(s.drop_p)}});
        j["links"][id] = a;
    }
    return j;
}

Json results_to_json(const TestResults& r) {
    Json j;
    j["cases"] = Json::array();
    for (const auto& c : r.cases) {
        Json jc;
        jc["id"] = c.id;
        jc["kind"] = codegen::to_string(c.kind);
        jc["verdict"] = c.passed ? "pass" : "fail";
        Json m;
        m["sent"] = c.measured.sent;
        m["delivered"] = c.measured.delivered;
        m["delivery_ratio"] = decimal_json(c.measured.delivery_ratio);
        m["p95_latency_ms"] = c.measured.p95_latency_ms ? decimal_json(*c.measured.p95_latency_ms) : Json();
        jc["measured"] = m;
        jc["failures"] = c.failures;
        j["cases"].push_back(std::move(jc));
    }
    j["functional_failures"] = r.functional_failures;
    j["nonfunctional_failures"] = r.nonfunctional_failures;
    return j;
}

Json redundancy_to_json(const RedundancyOutcome& r) {
    Json j;
    j["function"] = r.function;
    j["crashed_replica"] = r.crashed_replica;
    j["crashed_node"] = r.crashed_node;
    j["crash_at_ms"] = decimal_json(r.crash_at_ms);
    j["redundant"] = results_to_json(r.redundant);
    j["degraded"] = results_to_json(r.degraded);
    return j;
}

} // namespace forge::sim
