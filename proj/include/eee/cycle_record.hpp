#pragma once

#include <cstddef>
#include <optional>

namespace eee {

/// Observations for one coalescing cycle: from the instant the buffer
/// empties to the next such instant. Times are in microseconds.
struct CycleRecord {
    double start = 0.0;       ///< buffer-empty instant that opened the cycle
    double sleep_start = 0.0; ///< equals start unless the cycle was suspended
    double t_e = 0.0;         ///< sleep start to first arrival
    double w_f = 0.0;         ///< queuing delay of the first frame
    double t_off = 0.0;       ///< LPI residency
    std::size_t frames_while_asleep = 0;
    std::size_t frames_total = 0;
    double bytes_total = 0.0;
    double cycle_duration = 0.0;
    bool suspended = false;
    std::optional<double> planned_v;
    std::optional<unsigned> planned_qw;
};

}  // namespace eee
