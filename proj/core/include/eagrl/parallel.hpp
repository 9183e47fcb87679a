#pragma once

#include <cstddef>
#include <functional>

namespace eagrl {

// Runs body(i) for i in [0, n) on up to `workers` threads. Every index is
// processed exactly once; callers write results into index-addressed slots so
// the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace eagrl
