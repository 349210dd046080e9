#pragma once

#include <cstddef>
#include <functional>

namespace lowrank {

/// Caps worker threads used by library loops. 0 restores the default
/// (hardware concurrency).
void set_thread_limit(std::size_t threads) noexcept;
std::size_t thread_limit() noexcept;

/// Runs body(i) for i in [0, n) across up to thread_limit() threads.
/// Each index must write only its own output slot; results are then
/// independent of scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lowrank
