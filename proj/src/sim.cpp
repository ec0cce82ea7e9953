#include "eee/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace eee::sim {

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

struct Totals {
    Residency residency;
    std::size_t cycles = 0;
    std::size_t suspended = 0;
    std::size_t arrivals = 0;
    double work_arrived = 0.0;  // service time of arrived frames, us
    double delay_sum = 0.0;
    std::size_t delay_count = 0;
    double t_off_sum = 0.0;
    double t_e_sum = 0.0;
    double w_f_sum = 0.0;
    double v_sum = 0.0;
    std::size_t v_count = 0;
    double q_sum = 0.0;
    std::size_t q_count = 0;
};

Totals operator-(const Totals& a, const Totals& b) {
    Totals d;
    d.residency.active_busy = a.residency.active_busy - b.residency.active_busy;
    d.residency.active_idle = a.residency.active_idle - b.residency.active_idle;
    d.residency.going_to_sleep = a.residency.going_to_sleep - b.residency.going_to_sleep;
    d.residency.lpi = a.residency.lpi - b.residency.lpi;
    d.residency.waking = a.residency.waking - b.residency.waking;
    d.cycles = a.cycles - b.cycles;
    d.suspended = a.suspended - b.suspended;
    d.arrivals = a.arrivals - b.arrivals;
    d.work_arrived = a.work_arrived - b.work_arrived;
    d.delay_sum = a.delay_sum - b.delay_sum;
    d.delay_count = a.delay_count - b.delay_count;
    d.t_off_sum = a.t_off_sum - b.t_off_sum;
    d.t_e_sum = a.t_e_sum - b.t_e_sum;
    d.w_f_sum = a.w_f_sum - b.w_f_sum;
    d.v_sum = a.v_sum - b.v_sum;
    d.v_count = a.v_count - b.v_count;
    d.q_sum = a.q_sum - b.q_sum;
    d.q_count = a.q_count - b.q_count;
    return d;
}

class Simulator {
public:
    Simulator(traffic::FrameSource& source, const policy::PolicyConfig& policy,
              const analytic::EeeParams& params, const Horizon& horizon,
              const SimOptions& options)
        : source_(source),
          params_(params),
          horizon_(horizon),
          options_(options),
          controller_(policy, params) {}

    SimReport run();

private:
    void pull_arrival();
    void advance(double to);
    void begin_cycle();
    void end_cycle();
    void on_arrival(const traffic::Frame& f);
    void on_sleep_done();
    void start_waking();
    void on_wake_done();
    void start_service();
    void on_service_done();
    double next_internal() const;

    traffic::FrameSource& source_;
    analytic::EeeParams params_;
    Horizon horizon_;
    SimOptions options_;
    policy::Controller controller_;

    std::optional<traffic::Frame> pending_;
    std::size_t pulled_ = 0;

    double now_ = 0.0;
    InterfaceState state_ = InterfaceState::active;
    bool serving_ = false;
    double service_end_ = kNever;
    double transition_end_ = kNever;
    double lpi_start_ = 0.0;
    std::optional<double> timer_deadline_;
    bool wake_pending_ = false;
    bool first_seen_ = false;
    bool first_served_ = false;
    std::deque<traffic::Frame> queue_;

    policy::WakePlan plan_;
    CycleRecord cycle_;
    std::size_t cycles_done_ = 0;
    std::size_t departed_ = 0;
    bool finished_ = false;

    Totals totals_;
    Totals snapshot_;
    bool window_open_ = false;
    double window_start_ = 0.0;
    std::size_t delay_mark_ = 0;
    std::size_t cycle_mark_ = 0;
    std::size_t departure_mark_ = 0;

    std::vector<double> delays_;
    std::vector<CycleRecord> cycles_log_;
    std::vector<Departure> departures_;
};

void Simulator::pull_arrival() {
    pending_.reset();
    if (horizon_.frames && pulled_ >= *horizon_.frames) return;
    auto f = source_.next();
    if (!f) return;
    if (horizon_.time_us && f->arrival_time > *horizon_.time_us) return;
    ++pulled_;
    pending_ = f;
}

void Simulator::advance(double to) {
    const double dt = to - now_;
    auto& r = totals_.residency;
    switch (state_) {
        case InterfaceState::active:
            (serving_ ? r.active_busy : r.active_idle) += dt;
            break;
        case InterfaceState::going_to_sleep: r.going_to_sleep += dt; break;
        case InterfaceState::lpi: r.lpi += dt; break;
        case InterfaceState::waking: r.waking += dt; break;
    }
    now_ = to;
}

double Simulator::next_internal() const {
    switch (state_) {
        case InterfaceState::active: return serving_ ? service_end_ : kNever;
        case InterfaceState::going_to_sleep:
        case InterfaceState::waking: return transition_end_;
        case InterfaceState::lpi: return timer_deadline_ ? *timer_deadline_ : kNever;
    }
    return kNever;
}

void Simulator::begin_cycle() {
    cycle_ = CycleRecord{};
    cycle_.start = now_;
    cycle_.sleep_start = now_;
    first_seen_ = false;
    first_served_ = false;
    timer_deadline_.reset();
    wake_pending_ = false;

    plan_ = controller_.plan();
    if (plan_.mode == policy::WakePlan::Mode::suspend) {
        cycle_.suspended = true;
        state_ = InterfaceState::active;
        return;
    }
    if (plan_.uses_timer()) cycle_.planned_v = plan_.timer;
    if (plan_.uses_threshold()) cycle_.planned_qw = plan_.threshold;
    state_ = InterfaceState::going_to_sleep;
    transition_end_ = now_ + params_.ts;
}

void Simulator::end_cycle() {
    cycle_.cycle_duration = now_ - cycle_.start;
    controller_.observe(cycle_);

    auto& t = totals_;
    ++t.cycles;
    if (cycle_.suspended) ++t.suspended;
    t.t_off_sum += cycle_.t_off;
    t.t_e_sum += cycle_.t_e;
    t.w_f_sum += cycle_.w_f;
    if (cycle_.planned_v) {
        t.v_sum += *cycle_.planned_v;
        ++t.v_count;
    }
    if (cycle_.planned_qw) {
        t.q_sum += *cycle_.planned_qw;
        ++t.q_count;
    }
    if (options_.keep_cycles) cycles_log_.push_back(cycle_);

    ++cycles_done_;
    if (!window_open_ && cycles_done_ == options_.warmup_cycles) {
        window_open_ = true;
        window_start_ = now_;
        snapshot_ = totals_;
        delay_mark_ = delays_.size();
        cycle_mark_ = cycles_log_.size();
        departure_mark_ = departures_.size();
    }

    if (!pending_) {
        finished_ = true;
        return;
    }
    begin_cycle();
}

void Simulator::on_arrival(const traffic::Frame& f) {
    ++totals_.arrivals;
    totals_.work_arrived += analytic::service_time_us(f.size, params_.line_rate);
    ++cycle_.frames_total;
    cycle_.bytes_total += f.size;
    if (state_ != InterfaceState::active) ++cycle_.frames_while_asleep;

    if (!first_seen_) {
        first_seen_ = true;
        cycle_.t_e = f.arrival_time - cycle_.sleep_start;
        // The countdown runs from the first arrival even while the sleep
        // transition is still in progress.
        if (plan_.uses_timer() && (state_ == InterfaceState::going_to_sleep ||
                                   state_ == InterfaceState::lpi))
            timer_deadline_ = f.arrival_time + plan_.timer;
    }
    queue_.push_back(f);

    const bool threshold_hit =
        plan_.uses_threshold() && queue_.size() >= plan_.threshold;
    switch (state_) {
        case InterfaceState::active:
            if (!serving_) start_service();
            break;
        case InterfaceState::going_to_sleep:
            if (threshold_hit) wake_pending_ = true;
            break;
        case InterfaceState::lpi:
            if (threshold_hit) start_waking();
            break;
        case InterfaceState::waking:
            break;
    }
}

void Simulator::on_sleep_done() {
    state_ = InterfaceState::lpi;
    lpi_start_ = now_;
    if (wake_pending_ || (timer_deadline_ && *timer_deadline_ <= now_)) start_waking();
}

void Simulator::start_waking() {
    cycle_.t_off = now_ - lpi_start_;
    timer_deadline_.reset();
    wake_pending_ = false;
    state_ = InterfaceState::waking;
    transition_end_ = now_ + params_.tw;
}

void Simulator::on_wake_done() {
    state_ = InterfaceState::active;
    start_service();
}

void Simulator::start_service() {
    const traffic::Frame f = queue_.front();
    queue_.pop_front();
    const double delay = now_ - f.arrival_time;
    if (!first_served_) {
        first_served_ = true;
        cycle_.w_f = delay;
    }
    delays_.push_back(delay);
    totals_.delay_sum += delay;
    ++totals_.delay_count;
    if (options_.keep_frames) departures_.push_back({f.arrival_time, now_});
    serving_ = true;
    service_end_ = now_ + analytic::service_time_us(f.size, params_.line_rate);
}

void Simulator::on_service_done() {
    serving_ = false;
    service_end_ = kNever;
    ++departed_;
    if (!queue_.empty()) {
        start_service();
    } else {
        end_cycle();
    }
}

SimReport Simulator::run() {
    pull_arrival();
    if (!pending_) throw std::invalid_argument("horizon contains no frames");
    now_ = std::min(0.0, pending_->arrival_time);
    window_start_ = now_;
    const double origin = now_;
    begin_cycle();

    double last_arrival = now_;
    while (!finished_) {
        const double internal = next_internal();
        if (pending_ && pending_->arrival_time <= internal) {
            const traffic::Frame f = *pending_;
            advance(f.arrival_time);
            last_arrival = f.arrival_time;
            pull_arrival();
            on_arrival(f);
            continue;
        }
        if (internal == kNever) {
            // Source exhausted while asleep below the threshold: nothing can
            // trigger the wake any more, so drain now.
            if (state_ == InterfaceState::lpi && !queue_.empty()) {
                start_waking();
                continue;
            }
            break;
        }
        advance(internal);
        switch (state_) {
            case InterfaceState::active: on_service_done(); break;
            case InterfaceState::going_to_sleep: on_sleep_done(); break;
            case InterfaceState::lpi: start_waking(); break;
            case InterfaceState::waking: on_wake_done(); break;
        }
    }

    SimReport report;
    report.warmup_complete = window_open_;
    const Totals w = window_open_ ? totals_ - snapshot_ : totals_;
    report.window_start = window_open_ ? window_start_ : origin;
    report.window_end = now_;
    report.residency = w.residency;
    report.cycles = w.cycles;
    report.frames = w.delay_count;
    report.frames_arrived_total = totals_.arrivals;
    report.frames_departed_total = departed_;
    report.final_queue = queue_.size();

    const double span = report.duration();
    if (span > 0.0) {
        const auto& r = w.residency;
        const double weighted = r.active_busy + r.active_idle + r.going_to_sleep + r.waking +
                                params_.phi_off * r.lpi;
        report.measured_phi = weighted / r.total();
        report.measured_rho = r.active_busy / r.total();
    }
    const double arrival_span = last_arrival - report.window_start;
    if (arrival_span > 0.0) report.offered_load = w.work_arrived / arrival_span;
    report.overload = report.offered_load >= 1.0;

    if (w.delay_count > 0) report.mean_delay = w.delay_sum / static_cast<double>(w.delay_count);
    if (w.cycles > 0) {
        const double n = static_cast<double>(w.cycles);
        report.mean_t_off = w.t_off_sum / n;
        report.mean_t_e = w.t_e_sum / n;
        report.mean_w_f = w.w_f_sum / n;
        report.suspend_fraction = static_cast<double>(w.suspended) / n;
    }
    if (w.v_count > 0) report.mean_planned_v = w.v_sum / static_cast<double>(w.v_count);
    if (w.q_count > 0) report.mean_planned_qw = w.q_sum / static_cast<double>(w.q_count);

    const std::size_t dmark = window_open_ ? delay_mark_ : 0;
    report.delay_samples.assign(delays_.begin() + static_cast<std::ptrdiff_t>(dmark), delays_.end());
    if (options_.keep_cycles) {
        const std::size_t cmark = window_open_ ? cycle_mark_ : 0;
        report.cycles_log.assign(cycles_log_.begin() + static_cast<std::ptrdiff_t>(cmark),
                                 cycles_log_.end());
    }
    if (options_.keep_frames) {
        const std::size_t fmark = window_open_ ? departure_mark_ : 0;
        report.departures.assign(departures_.begin() + static_cast<std::ptrdiff_t>(fmark),
                                 departures_.end());
    }
    return report;
}

void check_inputs(const analytic::EeeParams& params, const Horizon& horizon) {
    if (!horizon.frames && !horizon.time_us)
        throw std::invalid_argument("horizon must give a frame count or a duration");
    if (horizon.frames && *horizon.frames == 0)
        throw std::invalid_argument("horizon must contain at least one frame");
    if (horizon.time_us && !(*horizon.time_us > 0.0))
        throw std::invalid_argument("horizon duration must be positive");
    // Zero-length transitions are accepted here so the simulator can model a
    // plain queue; the analytic layer still requires them to be positive.
    if (!(params.phi_off >= 0.0 && params.phi_off < 1.0) || params.ts < 0.0 ||
        params.tw < 0.0 || !(params.line_rate > 0.0))
        throw std::invalid_argument("invalid interface parameters");
}

}  // namespace

SimReport run(traffic::FrameSource& source, const policy::PolicyConfig& policy,
              const analytic::EeeParams& params, const Horizon& horizon,
              std::uint64_t seed, const SimOptions& options) {
    check_inputs(params, horizon);
    Simulator sim(source, policy, params, horizon, options);
    SimReport report = sim.run();
    report.seed = seed;
    return report;
}

SimReport run(const traffic::TrafficSpec& traffic, const policy::PolicyConfig& policy,
              const analytic::EeeParams& params, const Horizon& horizon,
              std::uint64_t seed, const SimOptions& options) {
    check_inputs(params, horizon);
    auto source = traffic::make_source(traffic, seed);
    return run(*source, policy, params, horizon, seed, options);
}

std::vector<std::pair<double, double>> delay_cdf(const SimReport& report, double bin_width) {
    if (report.delay_samples.empty()) throw std::invalid_argument("report has no delay samples");
    if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
    std::vector<double> sorted = report.delay_samples;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    const auto edges = static_cast<std::size_t>(std::ceil(sorted.back() / bin_width));

    std::vector<std::pair<double, double>> out;
    out.reserve(edges + 1);
    std::size_t below = 0;
    for (std::size_t i = 0; i <= edges; ++i) {
        const double edge = static_cast<double>(i) * bin_width;
        while (below < sorted.size() && sorted[below] <= edge) ++below;
        out.emplace_back(edge, static_cast<double>(below) / n);
    }
    // Rounding in edge * bin_width can leave the last sample a hair above it.
    if (below < sorted.size()) out.emplace_back(static_cast<double>(edges + 1) * bin_width, 1.0);
    return out;
}

double fraction_above(const SimReport& report, double threshold) {
    if (report.delay_samples.empty()) return 0.0;
    const auto above = std::count_if(report.delay_samples.begin(), report.delay_samples.end(),
                                     [&](double d) { return d > threshold; });
    return static_cast<double>(above) / static_cast<double>(report.delay_samples.size());
}

}  // namespace eee::sim
