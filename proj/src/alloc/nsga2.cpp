#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "forge/alloc/allocator.hpp"
#include "forge/error.hpp"
#include "internal.hpp"

namespace forge::alloc {

namespace {

// Distribution code is written out so results do not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}

    std::size_t below(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do
            x = g_();
        while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    double unit() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 g_;
};

struct Individual {
    Assignment genes;
    Assessment eval;
    int rank = 0;
    double crowding = 0.0;
};

bool constrained_dominates(const Assessment& a, const Assessment& b) {
    if (a.feasible() != b.feasible())
        return a.feasible();
    if (!a.feasible())
        return a.violation < b.violation;
    return dominates(a.objectives, b.objectives);
}

std::vector<std::vector<std::size_t>> sort_fronts(std::vector<Individual>& pop) {
    const std::size_t n = pop.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<int> counts(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (constrained_dominates(pop[i].eval, pop[j].eval)) {
                dominated[i].push_back(j);
                ++counts[j];
            } else if (constrained_dominates(pop[j].eval, pop[i].eval)) {
                dominated[j].push_back(i);
                ++counts[i];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (counts[i] == 0) {
            pop[i].rank = 0;
            fronts[0].push_back(i);
        }
    for (std::size_t f = 0; !fronts[f].empty(); ++f) {
        std::vector<std::size_t> next;
        for (auto i : fronts[f])
            for (auto j : dominated[i])
                if (--counts[j] == 0) {
                    pop[j].rank = static_cast<int>(f + 1);
                    next.push_back(j);
                }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

void assign_crowding(std::vector<Individual>& pop, const std::vector<std::size_t>& front) {
    for (auto i : front)
        pop[i].crowding = 0.0;
    if (front.size() <= 2) {
        for (auto i : front)
            pop[i].crowding = std::numeric_limits<double>::infinity();
        return;
    }
    std::vector<std::size_t> order(front);
    for (int k = 0; k < 3; ++k) {
        auto value = [&](std::size_t i) { return pop[i].eval.objectives.values()[static_cast<std::size_t>(k)]; };
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return value(a) < value(b); });
        double lo = value(order.front()), hi = value(order.back());
        pop[order.front()].crowding = std::numeric_limits<double>::infinity();
        pop[order.back()].crowding = std::numeric_limits<double>::infinity();
        if (hi <= lo)
            continue;
        for (std::size_t r = 1; r + 1 < order.size(); ++r)
            pop[order[r]].crowding += (value(order[r + 1]) - value(order[r - 1])) / (hi - lo);
    }
}

bool better(const Individual& a, const Individual& b) {
    if (a.eval.feasible() != b.eval.feasible())
        return a.eval.feasible();
    if (!a.eval.feasible() && a.eval.violation != b.eval.violation)
        return a.eval.violation < b.eval.violation;
    if (a.rank != b.rank)
        return a.rank < b.rank;
    return a.crowding > b.crowding;
}

} // namespace

SolveResult solve_nsga2(const AllocationProblem& p, const Nsga2Params& params) {
    if (params.population < 4 || params.population % 2 != 0)
        throw std::invalid_argument("population must be even and at least 4");
    if (params.generations < 0)
        throw std::invalid_argument("generations must be non-negative");
    if (p.nodes.empty() && !p.instances.empty())
        throw SizeError("no hardware nodes to place " + std::to_string(p.instances.size()) + " instances on");

    const auto n_pop = static_cast<std::size_t>(params.population);
    const std::size_t genes = p.instances.size();
    const std::size_t n_nodes = p.nodes.size();
    const double mutation_p = params.mutation_p.value_or(genes ? 1.0 / static_cast<double>(genes) : 0.0);
    Rng rng(params.seed);
    Assessor assessor(p);

    std::optional<Individual> best_infeasible;
    // every non-dominated feasible point seen so far, smallest genes per point;
    // the population alone can drift off front points it already found
    std::vector<ParetoPoint> archive;
    auto remember = [&](const Individual& ind) {
        const auto& obj = ind.eval.objectives;
        for (auto& q : archive) {
            if (q.objectives == obj) {
                if (ind.genes < q.assignment)
                    q.assignment = ind.genes;
                return;
            }
            if (dominates(q.objectives, obj))
                return;
        }
        std::erase_if(archive, [&](const ParetoPoint& q) { return dominates(obj, q.objectives); });
        archive.push_back(ParetoPoint{ind.genes, {}, obj});
    };
    auto evaluate = [&](Individual& ind) {
        ind.eval = assessor.run(ind.genes);
        if (ind.eval.feasible())
            remember(ind);
        else if (!best_infeasible || ind.eval.violation < best_infeasible->eval.violation)
            best_infeasible = ind;
    };

    std::vector<Individual> pop(n_pop);
    for (auto& ind : pop) {
        ind.genes.resize(genes);
        for (std::size_t g = 0; g < genes; ++g)
            ind.genes[g] = p.pins[g] ? *p.pins[g] : rng.below(n_nodes);
        evaluate(ind);
    }
    for (const auto& f : sort_fronts(pop))
        assign_crowding(pop, f);

    auto tournament = [&]() -> const Individual& {
        const auto& a = pop[rng.below(n_pop)];
        const auto& b = pop[rng.below(n_pop)];
        return better(b, a) ? b : a;
    };
    auto mutate = [&](Assignment& g) {
        for (std::size_t k = 0; k < genes; ++k)
            if (rng.unit() < mutation_p && !p.pins[k])
                g[k] = rng.below(n_nodes);
        // exchanging two placements keeps node loads and replica spread, so it
        // crosses between feasible assignments that single moves cannot
        if (genes >= 2 && rng.unit() < 0.5) {
            auto a = rng.below(genes), b = rng.below(genes);
            if (!p.pins[a] && !p.pins[b])
                std::swap(g[a], g[b]);
        }
    };

    for (int gen = 0; gen < params.generations; ++gen) {
        std::vector<Individual> combined = pop;
        combined.reserve(2 * n_pop);
        while (combined.size() < 2 * n_pop) {
            Individual c1{tournament().genes, {}, 0, 0.0};
            Individual c2{tournament().genes, {}, 0, 0.0};
            if (rng.unit() < params.crossover_p)
                for (std::size_t k = 0; k < genes; ++k)
                    if (rng.unit() < 0.5)
                        std::swap(c1.genes[k], c2.genes[k]);
            mutate(c1.genes);
            mutate(c2.genes);
            evaluate(c1);
            evaluate(c2);
            combined.push_back(std::move(c1));
            combined.push_back(std::move(c2));
        }
        // clones go to the back of the queue so they cannot crowd out diversity
        std::vector<Individual> clones;
        {
            std::vector<std::size_t> order(combined.size());
            for (std::size_t i = 0; i < order.size(); ++i)
                order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](auto a, auto b) { return combined[a].genes < combined[b].genes; });
            std::vector<bool> dup(combined.size(), false);
            for (std::size_t k = 1; k < order.size(); ++k)
                if (combined[order[k]].genes == combined[order[k - 1]].genes)
                    dup[std::max(order[k], order[k - 1])] = true;
            std::vector<Individual> unique;
            for (std::size_t i = 0; i < combined.size(); ++i)
                (dup[i] ? clones : unique).push_back(std::move(combined[i]));
            combined = std::move(unique);
        }
        auto fronts = sort_fronts(combined);
        std::vector<Individual> next;
        next.reserve(n_pop);
        for (auto& f : fronts) {
            assign_crowding(combined, f);
            if (next.size() + f.size() <= n_pop) {
                for (auto i : f)
                    next.push_back(combined[i]);
                continue;
            }
            std::stable_sort(f.begin(), f.end(),
                             [&](auto a, auto b) { return combined[a].crowding > combined[b].crowding; });
            for (std::size_t k = 0; next.size() < n_pop; ++k)
                next.push_back(combined[f[k]]);
            break;
        }
        for (std::size_t k = 0; next.size() < n_pop; ++k)
            next.push_back(std::move(clones[k]));
        // ranks and crowding of the survivors drive the next tournaments
        for (const auto& f : sort_fronts(next))
            assign_crowding(next, f);
        pop = std::move(next);
    }

    if (!archive.empty())
        return finish_front(p, std::move(archive));
    if (!best_infeasible) // every individual was feasible yet none survived: impossible
        throw EmptyFrontError("NSGA-II produced no individuals");
    return empty_front(p, best_infeasible->genes);
}

const ParetoPoint& select_solution(const ParetoSet& front, const std::array<double, 3>& weights) {
    if (front.points.empty())
        throw EmptyFrontError("cannot select from an empty Pareto front");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("weights must be finite and non-negative");
        total += w;
    }
    if (total <= 0.0)
        throw std::invalid_argument("weights must not all be zero");

    std::array<double, 3> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto& pt : front.points) {
        auto v = pt.objectives.values();
        for (std::size_t k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], v[k]);
            hi[k] = std::max(hi[k], v[k]);
        }
    }
    const ParetoPoint* best = nullptr;
    double best_score = 0.0;
    for (const auto& pt : front.points) {
        auto v = pt.objectives.values();
        double score = 0.0;
        for (std::size_t k = 0; k < 3; ++k)
            if (hi[k] > lo[k])
                score += (weights[k] / total) * (v[k] - lo[k]) / (hi[k] - lo[k]);
        // the tolerance keeps ties stable under rescaled weights
        if (!best || score < best_score - 1e-12) {
            best = &pt;
            best_score = score;
        }
    }
    return *best;
}

} // namespace forge::alloc
