#pragma once

// Closed-form delivery oracle. No event queue: for every sequence number it
// works out which replica messages survive the fault schedule and when they
// land, then applies the delivery rule directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "forge/codegen/codegen.hpp"
#include "forge/model.hpp"
#include "oracles/naive_alloc.hpp"

namespace oracle {

struct NaiveFlow {
    std::string edge;
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::vector<double> latencies;
};

inline double naive_draw(std::uint64_t seed, const std::string& edge, const std::string& prod, const std::string& cons,
                         std::uint64_t seq, const std::string& link) {
    // FNV-1a 64 over the key, then a splitmix64 finalizer
    std::uint64_t h = 14695981039346656037ULL;
    auto byte = [&](unsigned char c) {
        h ^= c;
        h *= 1099511628211ULL;
    };
    for (int i = 0; i < 8; ++i)
        byte(static_cast<unsigned char>(seed >> (8 * i)));
    for (const auto* s : {&edge, &prod, &cons}) {
        for (unsigned char c : *s)
            byte(c);
        byte(0);
    }
    for (int i = 0; i < 8; ++i)
        byte(static_cast<unsigned char>(seq >> (8 * i)));
    for (unsigned char c : link)
        byte(c);
    std::uint64_t z = h + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) / 9007199254740992.0;
}

inline std::vector<NaiveFlow> naive_simulate(const forge::InstanceModel& m,
                                             const std::vector<forge::codegen::FaultSpec>& faults, double horizon,
                                             std::uint64_t seed) {
    using forge::codegen::FaultKind;
    const double inf = std::numeric_limits<double>::infinity();
    NaiveAllocator routes(m);
    std::map<std::string, std::string> placed;
    for (const auto& p : *m.allocation)
        placed[p.instance.str()] = p.node;
    auto crash = [&](const std::string& node) {
        double t = inf;
        for (const auto& f : faults)
            if (f.kind == FaultKind::node_crash && f.target == node && f.at_ms <= horizon)
                t = std::min(t, f.at_ms);
        return t;
    };
    auto drop = [&](const std::string& link, double t) {
        double p = 0;
        for (const auto& f : faults)
            if (f.kind == FaultKind::link_drop && f.target == link && f.at_ms <= horizon && f.at_ms <= t)
                p = std::max(p, f.p);
        return p;
    };

    auto edges = m.edges;
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::vector<NaiveFlow> out;
    for (const auto& e : edges) {
        const auto* s = m.find_function(e.src_fn);
        const auto* d = m.find_function(e.dst_fn);
        bool voting = s->safety_mechanism == forge::SafetyMechanism::voting && s->redundancy > 1;
        int quorum = voting ? (s->redundancy + 2) / 2 : 1;
        double period = 1000.0 / e.rate_hz;
        NaiveFlow nf;
        nf.edge = e.id;
        std::uint64_t n = 0;
        while (static_cast<double>(n) * period < horizon)
            ++n;
        nf.sent = n;
        for (std::uint64_t k = 0; k < n; ++k) {
            double t = static_cast<double>(k) * period;
            double best = inf;
            for (int c = 0; c < d->redundancy; ++c) {
                std::string cons = forge::InstanceId{d->id, c}.str();
                const auto& cnode = placed.at(cons);
                std::vector<double> lands; // latencies of surviving messages
                for (int r = 0; r < s->redundancy; ++r) {
                    std::string prod = forge::InstanceId{s->id, r}.str();
                    const auto& pnode = placed.at(prod);
                    if (crash(pnode) <= t)
                        continue;
                    auto path = routes.path(pnode, cnode);
                    if (!path.ok)
                        continue;
                    bool lost = false;
                    double at = t;
                    for (std::size_t h = 0; h < path.links.size() && !lost; ++h) {
                        if (h > 0 && crash(path.nodes[h]) <= at)
                            lost = true;
                        double p = drop(path.links[h]->id, at);
                        if (!lost && p > 0 && naive_draw(seed, e.id, prod, cons, k, path.links[h]->id) < p)
                            lost = true;
                        at += path.links[h]->latency_ms;
                    }
                    if (lost || crash(cnode) <= t + path.latency)
                        continue;
                    lands.push_back(path.latency);
                }
                std::sort(lands.begin(), lands.end());
                for (std::size_t j = 0; j < lands.size(); ++j) {
                    int within = 0;
                    for (std::size_t i = 0; i <= j; ++i)
                        within += lands[i] >= lands[j] - 50.0;
                    if (within >= quorum) {
                        best = std::min(best, lands[j]);
                        break;
                    }
                }
            }
            if (best < inf) {
                ++nf.delivered;
                nf.latencies.push_back(best);
            }
        }
        out.push_back(std::move(nf));
    }
    return out;
}

} // namespace oracle
