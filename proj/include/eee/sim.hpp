// Discrete-event simulation of one EEE transmit direction with coalescing.
//
// The interface moves Active -> GoingToSleep -> LPI -> Waking -> Active.
// GoingToSleep always lasts ts and cannot be interrupted; the wake condition
// (timer, queue threshold, or both) is evaluated against the plan chosen when
// the buffer last emptied. Frames are served FIFO, only while Active.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "eee/analytic.hpp"
#include "eee/cycle_record.hpp"
#include "eee/policy.hpp"
#include "eee/traffic.hpp"

namespace eee::sim {

enum class InterfaceState { active, going_to_sleep, lpi, waking };

/// Stop after `frames` arrivals, or drop arrivals later than `time_us`.
/// Either way the queue is drained and the run ends when the buffer empties.
struct Horizon {
    std::optional<std::size_t> frames;
    std::optional<double> time_us;

    static Horizon of_frames(std::size_t n) { return {n, std::nullopt}; }
    static Horizon of_time(double t) { return {std::nullopt, t}; }
};

struct SimOptions {
    std::size_t warmup_cycles = 100;
    bool keep_cycles = false;  ///< fill SimReport::cycles (measured window)
    bool keep_frames = false;  ///< fill SimReport::departures (measured window)
};

/// Time spent in each state over the measured window, us.
struct Residency {
    double active_busy = 0.0;
    double active_idle = 0.0;
    double going_to_sleep = 0.0;
    double lpi = 0.0;
    double waking = 0.0;

    double total() const { return active_busy + active_idle + going_to_sleep + lpi + waking; }
};

struct Departure {
    double arrival = 0.0;
    double service_start = 0.0;
};

struct SimReport {
    double measured_phi = 1.0;
    double mean_delay = 0.0;
    std::vector<double> delay_samples;  ///< queuing delays in service order
    double mean_t_off = 0.0;
    double mean_t_e = 0.0;
    double mean_w_f = 0.0;
    double mean_planned_v = 0.0;   ///< over timer-bearing cycles; 0 if none
    double mean_planned_qw = 0.0;  ///< over threshold-bearing cycles; 0 if none
    double suspend_fraction = 0.0;
    double measured_rho = 0.0;     ///< busy time over window
    double offered_load = 0.0;     ///< work arriving per unit time
    std::size_t cycles = 0;
    std::size_t frames = 0;
    std::size_t frames_arrived_total = 0;
    std::size_t frames_departed_total = 0;
    std::size_t final_queue = 0;
    double window_start = 0.0;
    double window_end = 0.0;
    Residency residency;
    bool overload = false;
    bool warmup_complete = true;
    std::uint64_t seed = 0;
    std::vector<CycleRecord> cycles_log;
    std::vector<Departure> departures;

    double duration() const { return window_end - window_start; }
};

/// Runs a simulation over frames drawn from `source`. `seed` is only echoed
/// in the report. Throws std::invalid_argument for an empty horizon or a
/// policy that does not validate against `params`.
SimReport run(traffic::FrameSource& source, const policy::PolicyConfig& policy,
              const analytic::EeeParams& params, const Horizon& horizon,
              std::uint64_t seed = 0, const SimOptions& options = {});

SimReport run(const traffic::TrafficSpec& traffic, const policy::PolicyConfig& policy,
              const analytic::EeeParams& params, const Horizon& horizon,
              std::uint64_t seed, const SimOptions& options = {});

/// Empirical CDF of queuing delay at bin edges 0, w, 2w, ... up to the
/// first edge covering the largest sample. Value at edge x is the fraction
/// of samples <= x.
std::vector<std::pair<double, double>> delay_cdf(const SimReport& report, double bin_width);

/// Fraction of delay samples strictly greater than `threshold`.
double fraction_above(const SimReport& report, double threshold);

}  // namespace eee::sim
