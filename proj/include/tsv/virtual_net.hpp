#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsv/runtime.hpp"

namespace tsv {

/// Session seconds to the scheduler's integer nanoseconds.
std::int64_t to_ns(double seconds);

/// Runs every endpoint as a cooperative task on one discrete-event clock. All
/// endpoints pass the session barrier at time 0. Tasks run one at a time, in
/// a fixed order, so runs are reproducible.
SessionRun run_virtual(std::vector<EndpointProgram> endpoints);

}  // namespace tsv
