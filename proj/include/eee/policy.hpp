// Coalescing controllers: static parameters and the open-loop dynamic
// variants that re-derive their parameter from traffic estimates at every
// buffer-empty instant.
#pragma once

#include <string>

#include "eee/analytic.hpp"
#include "eee/cycle_record.hpp"

namespace eee::policy {

enum class Kind { none, static_timer, static_size, static_dual, dynamic_timer, dynamic_size };
enum class Solver { approx, cubic };

struct PolicyConfig {
    Kind kind = Kind::none;
    double timer = 0.0;       // V, us (static_timer, static_dual)
    unsigned threshold = 1;   // Q_w, frames (static_size, static_dual)
    double tau = 0.0;         // target mean delay, us (dynamic variants)
    Solver solver = Solver::approx;
    double ewma_weight = 0.1; // weight of the newest cycle in the estimate

    static PolicyConfig none();
    static PolicyConfig static_timer(double v);
    static PolicyConfig static_size(unsigned qw);
    static PolicyConfig static_dual(double v, unsigned qw);
    static PolicyConfig dynamic_timer(double tau);
    static PolicyConfig dynamic_size(double tau, Solver solver = Solver::approx);

    /// Throws std::invalid_argument if the config is unusable with `params`.
    void validate(const analytic::EeeParams& params) const;

    /// Short stable identifier, e.g. "static_timer_24" or "dynamic_size".
    std::string name() const;
};

/// Parses "none", "static_timer:24", "static_size:12", "static_dual:24:12",
/// "dynamic_timer", "dynamic_size", "dynamic_size_cubic". Dynamic variants
/// take their target from `tau`.
PolicyConfig parse_policy(const std::string& text, double tau = 0.0);

/// Smoothed per-cycle totals and the rates derived from them. Rates are
/// ratios of smoothed totals, so a short cycle that happens to hold a burst
/// does not skew the arrival rate the way averaging per-cycle rates would.
struct TrafficEstimate {
    double lambda_hat = 0.0;  // frames/us
    double mu_hat = 0.0;      // frames/us
    bool valid = false;
    bool low_confidence = false;  // seeded from a single short cycle

    double frames = 0.0;    // smoothed frames per cycle
    double duration = 0.0;  // smoothed cycle length, us
    double service = 0.0;   // smoothed transmission time per cycle, us
};

/// Utilization ceiling applied before computing the baseline delay term.
inline constexpr double kRhoCap = 0.99;

struct WakePlan {
    enum class Mode { timer, threshold, dual, suspend };
    Mode mode = Mode::suspend;
    double timer = 0.0;      // us after the first arrival of the cycle
    unsigned threshold = 1;  // frames queued

    static WakePlan make_timer(double v) { return {Mode::timer, v, 1}; }
    static WakePlan make_threshold(unsigned q) { return {Mode::threshold, 0.0, q}; }
    static WakePlan make_dual(double v, unsigned q) { return {Mode::dual, v, q}; }
    static WakePlan make_suspend() { return {}; }

    bool uses_timer() const { return mode == Mode::timer || mode == Mode::dual; }
    bool uses_threshold() const { return mode == Mode::threshold || mode == Mode::dual; }

    friend bool operator==(const WakePlan&, const WakePlan&) = default;
};

/// Decision for the cycle that starts now. Pure in its arguments.
WakePlan plan_cycle(const PolicyConfig& config, const TrafficEstimate& estimate,
                    const analytic::EeeParams& params);

/// Folds a finished cycle into the running estimate with weight
/// `ewma_weight` on the new cycle. Cycles with fewer than two frames leave a
/// valid estimate untouched; an invalid estimate is seeded from any cycle
/// that carried at least one frame.
TrafficEstimate update_estimate(const TrafficEstimate& previous, const CycleRecord& cycle,
                                const analytic::EeeParams& params, double ewma_weight = 0.1);

/// One controller per simulated interface.
class Controller {
public:
    Controller(PolicyConfig config, analytic::EeeParams params);

    WakePlan plan() const { return plan_cycle(config_, estimate_, params_); }
    void observe(const CycleRecord& cycle);

    const TrafficEstimate& estimate() const { return estimate_; }
    const PolicyConfig& config() const { return config_; }

private:
    PolicyConfig config_;
    analytic::EeeParams params_;
    TrafficEstimate estimate_;
};

}  // namespace eee::policy
