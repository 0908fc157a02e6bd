#include <algorithm>
#include <cmath>
#include <limits>

#include "forge/alloc/allocator.hpp"
#include "forge/error.hpp"
#include "internal.hpp"

namespace forge::alloc {

namespace {

// Insert into a non-dominated list. Equal points keep the earlier entry.
void offer(std::vector<ParetoPoint>& front, const Assignment& a, const ObjectiveVector& obj) {
    for (const auto& q : front)
        if (q.objectives == obj || dominates(q.objectives, obj))
            return;
    std::erase_if(front, [&](const ParetoPoint& q) { return dominates(obj, q.objectives); });
    front.push_back(ParetoPoint{a, {}, obj});
}

// Depth-first search over assignments in lexicographic node-index order.
// Penalties from capacity, ASIL, anti-affinity and pins only grow as more
// instances are placed, so a partial sum bounds every completion.
class Search {
public:
    Search(const AllocationProblem& p) : p_(p), assessor_(p) {
        n_ = p.nodes.size();
        cpu_.assign(n_, 0);
        mem_.assign(n_, 0);
        count_.assign(p.functions.size() * n_, 0);
        a_.assign(p.instances.size(), 0);
    }

    std::vector<ParetoPoint> feasible_front() {
        minimize_ = false;
        dfs(0, 0.0);
        return std::move(front_);
    }

    Assignment least_violation() {
        minimize_ = true;
        best_ = std::numeric_limits<double>::infinity();
        dfs(0, 0.0);
        return best_assignment_;
    }

private:
    double place(std::size_t i, std::size_t nd) {
        const auto& inst = p_.instances[i];
        const auto& node = p_.nodes[nd];
        double delta = 0.0;
        auto over = [](std::int64_t load, std::int64_t cap) { return std::max<std::int64_t>(0, load - cap); };
        delta += static_cast<double>(over(cpu_[nd] + inst.cpu_req, node.cpu_cap) - over(cpu_[nd], node.cpu_cap)) /
                 static_cast<double>(node.cpu_cap);
        delta += static_cast<double>(over(mem_[nd] + inst.mem_req, node.mem_cap) - over(mem_[nd], node.mem_cap)) /
                 static_cast<double>(node.mem_cap);
        if (!asil_at_least(node.asil_cap, inst.asil))
            delta += (static_cast<int>(inst.asil) - static_cast<int>(node.asil_cap)) / 4.0;
        if (count_[inst.function * n_ + nd] > 0)
            delta += 1.0;
        if (p_.pins[i] && *p_.pins[i] != nd)
            delta += 1.0;
        cpu_[nd] += inst.cpu_req;
        mem_[nd] += inst.mem_req;
        ++count_[inst.function * n_ + nd];
        a_[i] = nd;
        return delta;
    }

    void unplace(std::size_t i, std::size_t nd) {
        const auto& inst = p_.instances[i];
        cpu_[nd] -= inst.cpu_req;
        mem_[nd] -= inst.mem_req;
        --count_[inst.function * n_ + nd];
    }

    void dfs(std::size_t i, double partial) {
        if (i == a_.size()) {
            auto r = assessor_.run(a_);
            if (!minimize_) {
                if (r.feasible())
                    offer(front_, a_, r.objectives);
            } else if (r.violation < best_) {
                best_ = r.violation;
                best_assignment_ = a_;
            }
            return;
        }
        for (std::size_t nd = 0; nd < n_; ++nd) {
            double delta = place(i, nd);
            bool go = minimize_ ? partial + delta < best_ - 1e-12 : delta == 0.0;
            if (go)
                dfs(i + 1, partial + delta);
            unplace(i, nd);
        }
    }

    const AllocationProblem& p_;
    Assessor assessor_;
    std::size_t n_ = 0;
    std::vector<std::int64_t> cpu_, mem_;
    std::vector<int> count_;
    Assignment a_;
    bool minimize_ = false;
    std::vector<ParetoPoint> front_;
    double best_ = 0.0;
    Assignment best_assignment_;
};

} // namespace

ParetoSet finish_front(const AllocationProblem& p, std::vector<ParetoPoint> points) {
    for (auto& pt : points)
        pt.matrix = to_matrix(p, pt.assignment);
    std::sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        if (a.objectives != b.objectives)
            return a.objectives < b.objectives;
        return a.assignment < b.assignment;
    });
    return ParetoSet{std::move(points)};
}

EmptyFront empty_front(const AllocationProblem& p, const Assignment& witness) {
    EmptyFront e;
    e.witness = to_matrix(p, witness);
    e.violations = check_feasible(p, witness);
    return e;
}

SolveResult solve_exact(const AllocationProblem& p, const ExactOptions& opts) {
    double size = std::pow(static_cast<double>(p.nodes.size()), static_cast<double>(p.instances.size()));
    if (size > opts.cap)
        throw SizeError("search space " + format_decimal(size) + " exceeds the cap of " + format_decimal(opts.cap));
    if (p.nodes.empty() && !p.instances.empty())
        throw SizeError("no hardware nodes to place " + std::to_string(p.instances.size()) + " instances on");

    Search search(p);
    auto points = search.feasible_front();
    if (!points.empty())
        return finish_front(p, std::move(points));
    Search worst(p);
    return empty_front(p, worst.least_violation());
}

} // namespace forge::alloc
