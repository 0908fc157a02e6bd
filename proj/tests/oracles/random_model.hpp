#pragma once

// Generators of valid random instance models for property tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "forge/model.hpp"

namespace forge::testing {

struct ModelShape {
    int min_functions = 0;
    int max_functions = 5;
    int min_nodes = 1;
    int max_nodes = 4;
    int max_redundancy = 2;
    double link_probability = 0.6;
    double edge_probability = 0.4;
    bool budgets = true;
};

inline std::int64_t rand_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline InstanceModel random_model(std::mt19937_64& rng, const ModelShape& shape = {}) {
    static const char* types[] = {"Speed", "Torque", "Image"};
    InstanceModel m;
    int nf = static_cast<int>(rand_int(rng, shape.min_functions, shape.max_functions));
    int nn = static_cast<int>(rand_int(rng, shape.min_nodes, shape.max_nodes));
    for (int i = 0; i < nf; ++i) {
        FunctionSpec f;
        f.id = "fn" + std::to_string(i);
        f.cpu_req = rand_int(rng, 1, 4);
        f.mem_req = rand_int(rng, 16, 256);
        f.power_req = static_cast<double>(rand_int(rng, 0, 8)) * 0.5;
        f.asil = static_cast<Asil>(rand_int(rng, 0, 4));
        f.redundancy = static_cast<int>(rand_int(rng, 1, shape.max_redundancy));
        if (f.redundancy > 1)
            f.safety_mechanism = coin(rng, 0.5) ? SafetyMechanism::hot_standby : SafetyMechanism::voting;
        f.out_ports.push_back({"out0", types[rand_int(rng, 0, 2)]});
        f.in_ports.push_back({"in0", types[rand_int(rng, 0, 2)]});
        m.functions.push_back(std::move(f));
    }
    for (int i = 0; i < nn; ++i) {
        HardwareNode n;
        n.id = "n" + std::to_string(i);
        n.cpu_cap = rand_int(rng, 2, 8);
        n.mem_cap = rand_int(rng, 128, 1024);
        n.base_power = static_cast<double>(rand_int(rng, 1, 10));
        n.cost = static_cast<double>(rand_int(rng, 1, 20));
        n.asil_cap = static_cast<Asil>(rand_int(rng, 0, 4));
        m.hardware.push_back(std::move(n));
    }
    int lid = 0;
    for (int a = 0; a < nn; ++a)
        for (int b = a + 1; b < nn; ++b)
            if (coin(rng, shape.link_probability)) {
                Link l;
                l.id = "l" + std::to_string(lid++);
                l.endpoint_a = m.hardware[a].id;
                l.endpoint_b = m.hardware[b].id;
                l.bandwidth_bps = static_cast<double>(rand_int(rng, 1, 20)) * 100000.0;
                l.latency_ms = static_cast<double>(rand_int(rng, 0, 8)) * 0.5;
                m.links.push_back(std::move(l));
            }
    int eid = 0;
    for (int s = 0; s < nf; ++s)
        for (int d = 0; d < nf; ++d) {
            if (s == d || !coin(rng, shape.edge_probability))
                continue;
            // force compatible interfaces
            m.functions[d].in_ports[0].datatype = m.functions[s].out_ports[0].datatype;
            FlowEdge e;
            e.id = "e" + std::to_string(eid++);
            e.src_fn = m.functions[s].id;
            e.src_port = "out0";
            e.dst_fn = m.functions[d].id;
            e.dst_port = "in0";
            e.rate_hz = static_cast<double>(rand_int(rng, 1, 50)) * 10.0;
            e.msg_bytes = rand_int(rng, 8, 512);
            if (shape.budgets && coin(rng, 0.3))
                e.latency_budget_ms = static_cast<double>(rand_int(rng, 0, 8));
            m.edges.push_back(std::move(e));
        }
    // an in-port may have been retyped after an earlier edge fixed it; drop
    // edges whose datatypes no longer agree
    std::erase_if(m.edges, [&](const FlowEdge& e) {
        return m.find_function(e.src_fn)->out_ports[0].datatype != m.find_function(e.dst_fn)->in_ports[0].datatype;
    });
    canonicalize(m);
    return m;
}

/// Models sized for exhaustive enumeration: at most 5 functions x 4 nodes and
/// a search space no larger than `max_space`.
inline InstanceModel random_alloc_model(std::mt19937_64& rng, double max_space = 2e5) {
    ModelShape shape;
    shape.min_functions = 1;
    shape.max_functions = 5;
    shape.min_nodes = 2;
    shape.max_nodes = 4;
    shape.max_redundancy = 2;
    for (;;) {
        auto m = random_model(rng, shape);
        // keep a useful share of problems feasible
        for (auto& f : m.functions)
            f.asil = static_cast<Asil>(rand_int(rng, 0, 3));
        for (auto& n : m.hardware) {
            if (coin(rng, 0.5))
                n.asil_cap = Asil::D;
            n.cpu_cap += rand_int(rng, 0, 4);
            n.mem_cap += 256;
        }
        double space = std::pow(static_cast<double>(m.hardware.size()), static_cast<double>(expand_instances(m).size()));
        if (space <= max_space)
            return m;
    }
}

/// Allocation problems where cheap nodes draw more power, so Pareto fronts
/// hold several points. 3-5 functions on 3-4 nodes.
inline InstanceModel random_tradeoff_model(std::mt19937_64& rng, double max_space = 1.1e6) {
    ModelShape shape;
    shape.min_functions = 3;
    shape.max_functions = 5;
    shape.min_nodes = 3;
    shape.max_nodes = 4;
    shape.max_redundancy = 2;
    shape.link_probability = 0.8;
    shape.edge_probability = 0.35;
    for (;;) {
        auto m = random_model(rng, shape);
        for (auto& f : m.functions)
            f.asil = static_cast<Asil>(rand_int(rng, 0, 2));
        for (auto& n : m.hardware) {
            auto q = rand_int(rng, 1, 10);
            n.base_power = static_cast<double>(q);
            n.cost = static_cast<double>(11 - q + rand_int(rng, 0, 2));
            n.cpu_cap = rand_int(rng, 3, 8);
            n.mem_cap = 1024;
            n.asil_cap = Asil::D;
        }
        for (auto& l : m.links)
            l.bandwidth_bps *= 5;
        double space = std::pow(static_cast<double>(m.hardware.size()), static_cast<double>(expand_instances(m).size()));
        if (space <= max_space)
            return m;
    }
}

} // namespace forge::testing
