#pragma once

// Worker-count control for the OpenMP kernels. Every parallel loop in the
// library writes disjoint per-item slots and reduces in a fixed order, so
// results do not depend on the thread count.

namespace pdball {

int max_jobs();
void set_max_jobs(int jobs);

}  // namespace pdball
