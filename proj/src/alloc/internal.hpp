#pragma once

#include "forge/alloc/allocator.hpp"

namespace forge::alloc {

/// Fill matrices and sort by (objectives, assignment).
ParetoSet finish_front(const AllocationProblem& p, std::vector<ParetoPoint> points);
EmptyFront empty_front(const AllocationProblem& p, const Assignment& witness);

} // namespace forge::alloc
