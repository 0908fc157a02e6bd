#include "forge/ocl/rule_pack.hpp"

#include "forge/ocl/parser.hpp"

namespace forge::ocl {

namespace {

constexpr std::string_view source = R"(-- built-in rules
context Function inv MinCpu: self.cpu_req > 0
context Function inv MinMem: self.mem_req > 0
context Function inv RedundancyMechanism:
    self.redundancy > 1 implies self.safety_mechanism <> SafetyMechanism::none
context FlowEdge inv PositiveRate: self.rate_hz > 0
context Model inv UniqueFunctionIds: self.functions->isUnique(f | f.id)
context Model inv UniqueNodeIds: self.hardware->isUnique(n | n.id)
context Model inv AllocationAsil:
    self.allocation->forAll(p | p.node.asil_cap >= p.function.asil)
context Model inv AllocationAntiAffinity:
    self.allocation->forAll(p | self.allocation->forAll(q |
        (p.function.id = q.function.id and p.replica <> q.replica) implies p.node.id <> q.node.id))
context Model inv AllocationCapacity:
    self.hardware->forAll(n |
        self.allocation->select(p | p.node.id = n.id)->collect(p | p.function.cpu_req)->sum() <= n.cpu_cap
        and self.allocation->select(p | p.node.id = n.id)->collect(p | p.function.mem_req)->sum() <= n.mem_cap)
)";

} // namespace

std::string_view builtin_rule_source() noexcept { return source; }

const ConstraintSet& builtin_rules() {
    static const ConstraintSet rules = parse_constraints(source);
    return rules;
}

} // namespace forge::ocl
