#include "eee/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace eee::policy {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

std::string compact(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

double to_double(const std::string& s, const std::string& field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw std::invalid_argument("bad number for " + field + ": '" + s + "'");
    return v;
}

unsigned to_frames(const std::string& s, const std::string& field) {
    const double v = to_double(s, field);
    if (v < 1.0 || v != std::floor(v) || v > 1e9)
        throw std::invalid_argument(field + " must be a positive integer: '" + s + "'");
    return static_cast<unsigned>(v);
}

unsigned round_threshold(double q) {
    return static_cast<unsigned>(std::max(1.0, std::round(q)));
}

}  // namespace

PolicyConfig PolicyConfig::none() { return {}; }

PolicyConfig PolicyConfig::static_timer(double v) {
    PolicyConfig c;
    c.kind = Kind::static_timer;
    c.timer = v;
    return c;
}

PolicyConfig PolicyConfig::static_size(unsigned qw) {
    PolicyConfig c;
    c.kind = Kind::static_size;
    c.threshold = qw;
    return c;
}

PolicyConfig PolicyConfig::static_dual(double v, unsigned qw) {
    PolicyConfig c;
    c.kind = Kind::static_dual;
    c.timer = v;
    c.threshold = qw;
    return c;
}

PolicyConfig PolicyConfig::dynamic_timer(double tau) {
    PolicyConfig c;
    c.kind = Kind::dynamic_timer;
    c.tau = tau;
    return c;
}

PolicyConfig PolicyConfig::dynamic_size(double tau, Solver solver) {
    PolicyConfig c;
    c.kind = Kind::dynamic_size;
    c.tau = tau;
    c.solver = solver;
    return c;
}

void PolicyConfig::validate(const analytic::EeeParams& params) const {
    switch (kind) {
        case Kind::none:
            break;
        case Kind::static_timer:
            require(timer > params.ts, "timer must exceed the sleep transition time");
            break;
        case Kind::static_size:
            require(threshold >= 1, "threshold must be at least one frame");
            break;
        case Kind::static_dual:
            require(timer > params.ts, "timer must exceed the sleep transition time");
            require(threshold >= 1, "threshold must be at least one frame");
            break;
        case Kind::dynamic_timer:
        case Kind::dynamic_size:
            require(tau > 0.0, "target delay must be positive");
            break;
    }
    require(ewma_weight > 0.0 && ewma_weight <= 1.0, "estimator weight must lie in (0, 1]");
}

std::string PolicyConfig::name() const {
    switch (kind) {
        case Kind::none: return "none";
        case Kind::static_timer: return "static_timer_" + compact(timer);
        case Kind::static_size: return "static_size_" + std::to_string(threshold);
        case Kind::static_dual:
            return "static_dual_" + compact(timer) + "_" + std::to_string(threshold);
        case Kind::dynamic_timer: return "dynamic_timer";
        case Kind::dynamic_size:
            return solver == Solver::cubic ? "dynamic_size_cubic" : "dynamic_size";
    }
    return "unknown";
}

PolicyConfig parse_policy(const std::string& text, double tau) {
    const auto parts = split(text, ':');
    require(!parts.empty(), "empty policy");
    const std::string& head = parts[0];
    auto arity = [&](std::size_t n) {
        require(parts.size() == n + 1,
                "policy '" + head + "' takes " + std::to_string(n) + " parameter(s)");
    };
    if (head == "none") {
        arity(0);
        return PolicyConfig::none();
    }
    if (head == "static_timer") {
        arity(1);
        return PolicyConfig::static_timer(to_double(parts[1], "static_timer V"));
    }
    if (head == "static_size") {
        arity(1);
        return PolicyConfig::static_size(to_frames(parts[1], "static_size Q_w"));
    }
    if (head == "static_dual") {
        arity(2);
        return PolicyConfig::static_dual(to_double(parts[1], "static_dual V"),
                                         to_frames(parts[2], "static_dual Q_w"));
    }
    if (head == "dynamic_timer") {
        arity(0);
        return PolicyConfig::dynamic_timer(tau);
    }
    if (head == "dynamic_size") {
        arity(0);
        return PolicyConfig::dynamic_size(tau, Solver::approx);
    }
    if (head == "dynamic_size_cubic") {
        arity(0);
        return PolicyConfig::dynamic_size(tau, Solver::cubic);
    }
    throw std::invalid_argument("unknown policy '" + text + "'");
}

WakePlan plan_cycle(const PolicyConfig& config, const TrafficEstimate& estimate,
                    const analytic::EeeParams& params) {
    switch (config.kind) {
        case Kind::none:
            return WakePlan::make_threshold(1);
        case Kind::static_timer:
            return WakePlan::make_timer(config.timer);
        case Kind::static_size:
            return WakePlan::make_threshold(config.threshold);
        case Kind::static_dual:
            return WakePlan::make_dual(config.timer, config.threshold);
        case Kind::dynamic_timer:
        case Kind::dynamic_size:
            break;
    }
    if (!estimate.valid || !(estimate.lambda_hat > 0.0) || !(estimate.mu_hat > 0.0))
        return WakePlan::make_suspend();

    const double lambda = estimate.lambda_hat;
    const double rho = std::min(lambda / estimate.mu_hat, kRhoCap);
    const double w0 = analytic::w0_poisson_deterministic(lambda, rho);

    if (config.kind == Kind::dynamic_timer) {
        const auto v = analytic::optimal_timer(config.tau, lambda, params.tw, w0, params.ts);
        return v ? WakePlan::make_timer(*v) : WakePlan::make_suspend();
    }
    const auto q = config.solver == Solver::cubic
                       ? analytic::optimal_threshold_cubic(config.tau, lambda, params.tw, w0)
                       : analytic::optimal_threshold_approx(config.tau, lambda, params.tw, w0);
    return q ? WakePlan::make_threshold(round_threshold(*q)) : WakePlan::make_suspend();
}

TrafficEstimate update_estimate(const TrafficEstimate& previous, const CycleRecord& cycle,
                                const analytic::EeeParams& params, double ewma_weight) {
    const bool enough = previous.valid ? cycle.frames_total >= 2 : cycle.frames_total >= 1;
    if (!enough || !(cycle.cycle_duration > 0.0) || !(cycle.bytes_total > 0.0)) return previous;

    const double frames = static_cast<double>(cycle.frames_total);
    const double service = analytic::service_time_us(cycle.bytes_total, params.line_rate);

    TrafficEstimate next;
    if (previous.valid) {
        const double keep = 1.0 - ewma_weight;
        next.frames = ewma_weight * frames + keep * previous.frames;
        next.duration = ewma_weight * cycle.cycle_duration + keep * previous.duration;
        next.service = ewma_weight * service + keep * previous.service;
    } else {
        next.frames = frames;
        next.duration = cycle.cycle_duration;
        next.service = service;
        next.low_confidence = cycle.frames_total < 2;
    }
    next.lambda_hat = next.frames / next.duration;
    next.mu_hat = next.frames / next.service;
    next.valid = true;
    return next;
}

Controller::Controller(PolicyConfig config, analytic::EeeParams params)
    : config_(config), params_(params) {
    config_.validate(params_);
}

void Controller::observe(const CycleRecord& cycle) {
    estimate_ = update_estimate(estimate_, cycle, params_, config_.ewma_weight);
}

}  // namespace eee::policy
