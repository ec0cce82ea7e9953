#include "eee/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "eee/policy.hpp"

namespace eee::experiment {

const std::vector<std::string> kColumns = {
    "rate_gbps",        "tau_us",           "phi_analytic",      "phi_measured",
    "delay_analytic_us", "delay_measured_us", "toff_analytic_us", "toff_measured_us",
    "bound_phi",        "mean_V_us",        "mean_Qw",           "suspend_frac",
    "seed"};

namespace {

using Cell = std::optional<double>;

struct Row {
    Cell rate_gbps, tau_us, phi_analytic, phi_measured, delay_analytic, delay_measured,
        toff_analytic, toff_measured, bound_phi, mean_v, mean_qw, suspend_frac;
    std::optional<std::uint64_t> seed;
};

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt_cell(const Cell& c) { return c ? fmt_num(*c) : std::string(); }

std::string render(const std::vector<Row>& rows) {
    std::string out;
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (i) out += ',';
        out += kColumns[i];
    }
    out += '\n';
    for (const auto& r : rows) {
        const Cell cells[] = {r.rate_gbps,      r.tau_us,         r.phi_analytic,
                              r.phi_measured,   r.delay_analytic, r.delay_measured,
                              r.toff_analytic,  r.toff_measured,  r.bound_phi,
                              r.mean_v,         r.mean_qw,        r.suspend_frac};
        for (const auto& c : cells) {
            out += fmt_cell(c);
            out += ',';
        }
        if (r.seed) out += std::to_string(*r.seed);
        out += '\n';
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, const std::string& text) {
    const std::string t = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ConfigError(field, "expected a number, got '" + text + "'");
    }
    if (used != t.size() || !std::isfinite(v))
        throw ConfigError(field, "expected a number, got '" + text + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& field, const std::string& text) {
    const std::string t = trim(text);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(field, "expected a non-negative integer, got '" + text + "'");
    try {
        return std::stoull(t);
    } catch (const std::exception&) {
        throw ConfigError(field, "integer out of range: '" + text + "'");
    }
}

// Comma list whose items may be numbers or start:step:stop ranges.
void append_numbers(const std::string& field, const std::string& value,
                    std::vector<double>& out) {
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError(field, "empty list item");
        const auto c1 = item.find(':');
        if (c1 == std::string::npos) {
            out.push_back(parse_double(field, item));
            continue;
        }
        const auto c2 = item.find(':', c1 + 1);
        if (c2 == std::string::npos) throw ConfigError(field, "range must be start:step:stop");
        const double start = parse_double(field, item.substr(0, c1));
        const double step = parse_double(field, item.substr(c1 + 1, c2 - c1 - 1));
        const double stop = parse_double(field, item.substr(c2 + 1));
        if (!(step > 0.0) || stop < start) throw ConfigError(field, "range needs step > 0 and stop >= start");
        const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    }
}

bool is_dynamic(const policy::PolicyConfig& p) {
    return p.kind == policy::Kind::dynamic_timer || p.kind == policy::Kind::dynamic_size;
}

policy::PolicyConfig make_policy(const ExperimentSpec& spec, const std::string& text,
                                 std::optional<double> tau) {
    auto p = policy::parse_policy(text, tau.value_or(0.0));
    p.ewma_weight = spec.ewma_weight;
    return p;
}

std::string number_tag(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

struct Point {
    std::string policy;
    std::optional<double> tau;
    std::optional<double> rate;  // empty for trace replay
    std::uint64_t seed = 0;
};

// (policy, tau, rate) in configuration order. Static policies get one tau-less
// row per rate.
std::vector<Point> expand_grid(const ExperimentSpec& spec) {
    std::vector<Point> points;
    for (const auto& name : spec.policies) {
        const bool dynamic = is_dynamic(policy::parse_policy(name, 1.0));
        std::vector<std::optional<double>> taus;
        if (dynamic) {
            for (double t : spec.taus_us) taus.emplace_back(t);
        } else {
            taus.emplace_back(std::nullopt);
        }
        for (const auto& tau : taus) {
            if (spec.trace) {
                points.push_back({name, tau, std::nullopt, 0});
            } else {
                for (double r : spec.rates_gbps) points.push_back({name, tau, r, 0});
            }
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i) points[i].seed = point_seed(spec.seed, i);
    return points;
}

std::optional<analytic::TrafficStats> stable_stats(const ExperimentSpec& spec, double rate_gbps) {
    const auto stats = traffic::theoretical_stats(spec.traffic_at(rate_gbps), spec.params.line_rate);
    if (!(stats.rho() < 1.0)) return std::nullopt;
    return stats;
}

struct TracePoint {
    double rate_gbps = 0.0;
    std::optional<analytic::TrafficStats> stats;  // sample moments, if stable
};

TracePoint trace_point(const ExperimentSpec& spec) {
    const auto trace = traffic::load_trace(*spec.trace);
    TracePoint tp;
    tp.rate_gbps = trace.summary().mean_rate_bps / 1e9;
    if (trace.frames.size() >= 2) {
        const auto measured = traffic::measured_stats(trace.frames, spec.params.line_rate);
        if (measured.rho() < 1.0) tp.stats = measured;
    }
    return tp;
}

// Closed-form predictions for one policy at one traffic point.
void fill_analytic(const ExperimentSpec& spec, const policy::PolicyConfig& pol,
                   const analytic::TrafficStats& stats, Row& row) {
    namespace an = analytic;
    const auto& P = spec.params;
    const double lambda = stats.lambda;
    const double rho = stats.rho();
    const double w0 = an::w0_exact(stats);

    auto timer_point = [&](double v) {
        row.toff_analytic = an::toff_time_based(lambda, v, P.ts);
        row.delay_analytic = an::delay_time_based(lambda, v, P.tw, w0);
    };
    auto size_point = [&](unsigned q) {
        row.toff_analytic = an::toff_size_based(lambda, q, P.ts);
        row.delay_analytic = an::delay_size_based(lambda, q, P.tw, w0);
    };
    auto suspended = [&] {
        row.toff_analytic = 0.0;
        row.suspend_frac = 1.0;
    };

    switch (pol.kind) {
        case policy::Kind::none:
            size_point(1);
            break;
        case policy::Kind::static_timer:
            row.mean_v = pol.timer;
            timer_point(pol.timer);
            break;
        case policy::Kind::static_size:
            row.mean_qw = pol.threshold;
            size_point(pol.threshold);
            break;
        case policy::Kind::static_dual:
            // No closed form for the combined wake rule.
            row.mean_v = pol.timer;
            row.mean_qw = pol.threshold;
            break;
        case policy::Kind::dynamic_timer:
            if (auto v = an::optimal_timer(pol.tau, lambda, P.tw, w0, P.ts)) {
                row.mean_v = *v;
                row.suspend_frac = 0.0;
                timer_point(*v);
            } else {
                suspended();
            }
            break;
        case policy::Kind::dynamic_size: {
            const auto q = pol.solver == policy::Solver::cubic
                               ? an::optimal_threshold_cubic(pol.tau, lambda, P.tw, w0)
                               : an::optimal_threshold_approx(pol.tau, lambda, P.tw, w0);
            if (q) {
                row.mean_qw = *q;
                row.suspend_frac = 0.0;
                size_point(static_cast<unsigned>(std::max(1.0, std::round(*q))));
            } else {
                suspended();
            }
            break;
        }
    }
    if (row.toff_analytic) row.phi_analytic = an::energy_ratio(P, rho, *row.toff_analytic);
}

void fill_measured(const sim::SimReport& rep, Row& row) {
    row.phi_measured = rep.measured_phi;
    row.delay_measured = rep.mean_delay;
    row.toff_measured = rep.mean_t_off;
    row.mean_v = rep.mean_planned_v > 0.0 ? Cell(rep.mean_planned_v) : std::nullopt;
    row.mean_qw = rep.mean_planned_qw > 0.0 ? Cell(rep.mean_planned_qw) : std::nullopt;
    row.suspend_frac = rep.suspend_fraction;
}

sim::SimReport simulate(const ExperimentSpec& spec, const Point& pt) {
    const auto pol = make_policy(spec, pt.policy, pt.tau);
    sim::SimOptions opts;
    opts.warmup_cycles = spec.warmup_cycles;
    const auto traffic = spec.traffic_at(pt.rate.value_or(0.0));
    return sim::run(traffic, pol, spec.params, spec.horizon, pt.seed, opts);
}

Row point_row(const ExperimentSpec& spec, const Point& pt, Mode mode) {
    Row row;
    row.tau_us = pt.tau;
    const auto pol = make_policy(spec, pt.policy, pt.tau);

    std::optional<analytic::TrafficStats> stats;
    if (pt.rate) {
        row.rate_gbps = *pt.rate;
        stats = stable_stats(spec, *pt.rate);
        if (!stats)
            std::cerr << "warning: " << *pt.rate
                      << " Gb/s meets or exceeds the line rate; analytic columns left blank\n";
    } else if (spec.trace) {
        const auto tp = trace_point(spec);
        row.rate_gbps = tp.rate_gbps;
        stats = tp.stats;
    }

    if (mode == Mode::analytic) {
        if (stats) {
            fill_analytic(spec, pol, *stats, row);
            const double at = pt.tau ? *pt.tau : row.delay_analytic.value_or(0.0);
            if (at > 0.0) row.bound_phi = analytic::energy_lower_bound(at, spec.params, *stats);
        }
        return row;
    }

    const auto rep = simulate(spec, pt);
    row.seed = pt.seed;
    fill_measured(rep, row);
    if (rep.overload)
        std::cerr << "warning: " << pt.policy << " point is overloaded (offered load "
                  << rep.offered_load << ")\n";
    if (mode == Mode::sweep && stats) {
        Row analytic_part;
        fill_analytic(spec, pol, *stats, analytic_part);
        row.phi_analytic = analytic_part.phi_analytic;
        row.delay_analytic = analytic_part.delay_analytic;
        row.toff_analytic = analytic_part.toff_analytic;
        if (rep.mean_delay > 0.0)
            row.bound_phi = analytic::energy_lower_bound(rep.mean_delay, spec.params, *stats);
    }
    return row;
}

std::string render_cdf(const sim::SimReport& rep, double bin_width) {
    std::string out = "delay_us,cdf\n";
    for (const auto& [x, f] : sim::delay_cdf(rep, bin_width)) {
        out += fmt_num(x);
        out += ',';
        out += fmt_num(f);
        out += '\n';
    }
    return out;
}

// Runs tasks[i] on `jobs` threads; results land at their own index.
template <class T>
std::vector<T> run_parallel(const std::vector<std::function<T()>>& tasks, unsigned jobs) {
    std::vector<T> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                results[i] = tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace

Mode parse_mode(const std::string& text) {
    if (text == "analytic") return Mode::analytic;
    if (text == "bound") return Mode::bound;
    if (text == "sim") return Mode::sim;
    if (text == "sweep") return Mode::sweep;
    if (text == "cdf") return Mode::cdf;
    throw ConfigError("mode", "unknown mode '" + text + "'");
}

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::analytic: return "analytic";
        case Mode::bound: return "bound";
        case Mode::sim: return "sim";
        case Mode::sweep: return "sweep";
        case Mode::cdf: return "cdf";
    }
    return "unknown";
}

std::uint64_t point_seed(std::uint64_t base, std::size_t index) {
    // splitmix64 finalizer over (base, index)
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

traffic::TrafficSpec ExperimentSpec::traffic_at(double rate_gbps) const {
    traffic::TrafficSpec t;
    t.sizes = sizes;
    if (trace) {
        t.trace = trace;
        return t;
    }
    const double lambda = traffic::lambda_for_bitrate(sizes, rate_gbps * 1e9);
    if (arrival == ArrivalKind::poisson) {
        t.arrival = traffic::PoissonArrivals{lambda};
    } else {
        t.arrival = traffic::ParetoArrivals{pareto_alpha, lambda};
    }
    return t;
}

void ExperimentSpec::validate() const {
    try {
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("phi_off/ts_us/tw_us/line_rate_gbps", e.what());
    }
    const bool needs_rates = !trace;
    if (needs_rates && rates_gbps.empty()) throw ConfigError("rate_gbps", "grid is empty");
    for (double r : rates_gbps)
        if (!(r > 0.0)) throw ConfigError("rate_gbps", "rates must be positive");
    for (double t : taus_us)
        if (!(t > 0.0)) throw ConfigError("tau_us", "target delays must be positive");

    if (!(ewma_weight > 0.0 && ewma_weight <= 1.0)) throw ConfigError("ewma_weight", "must lie in (0, 1]");
    if (mode == Mode::bound) {
        if (taus_us.empty()) throw ConfigError("tau_us", "bound mode needs target delays");
    } else {
        if (policies.empty()) throw ConfigError("policy", "no policies given");
        for (const auto& name : policies) {
            policy::PolicyConfig p;
            try {
                p = policy::parse_policy(name, 1.0);
                p.ewma_weight = ewma_weight;
                p.validate(params);
            } catch (const std::invalid_argument& e) {
                throw ConfigError("policy", e.what());
            }
            if (is_dynamic(p) && taus_us.empty())
                throw ConfigError("tau_us", "dynamic policy '" + name + "' needs target delays");
        }
    }
    if (arrival == ArrivalKind::pareto && !(pareto_alpha > 2.0))
        throw ConfigError("pareto_alpha", "shape must exceed 2");
    if (!trace && !rates_gbps.empty()) {
        try {
            traffic_at(rates_gbps.front()).validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("sizes", e.what());
        }
    }
    if (horizon.frames && *horizon.frames == 0) throw ConfigError("frames", "must be positive");
    if (horizon.time_us && !(*horizon.time_us > 0.0)) throw ConfigError("time_us", "must be positive");
    if (!(bin_width_us > 0.0)) throw ConfigError("bin_width_us", "must be positive");
    if (jobs == 0) throw ConfigError("jobs", "must be at least 1");
}

ExperimentSpec parse_config(std::istream& in, ExperimentSpec base) {
    ExperimentSpec s = std::move(base);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) throw ConfigError(key, "missing value");

        if (key == "mode") {
            s.mode = parse_mode(value);
        } else if (key == "rate_gbps") {
            append_numbers(key, value, s.rates_gbps);
        } else if (key == "tau_us") {
            append_numbers(key, value, s.taus_us);
        } else if (key == "policy") {
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) s.policies.push_back(trim(item));
        } else if (key == "arrival") {
            if (value == "poisson") s.arrival = ArrivalKind::poisson;
            else if (value == "pareto") s.arrival = ArrivalKind::pareto;
            else throw ConfigError(key, "expected poisson or pareto");
        } else if (key == "pareto_alpha") {
            s.pareto_alpha = parse_double(key, value);
        } else if (key == "sizes") {
            if (value == "fixed") {
                if (!std::holds_alternative<traffic::FixedSize>(s.sizes)) s.sizes = traffic::FixedSize{};
            } else if (value == "bimodal") {
                if (!std::holds_alternative<traffic::BimodalSize>(s.sizes)) s.sizes = traffic::BimodalSize{};
            } else {
                throw ConfigError(key, "expected fixed or bimodal");
            }
        } else if (key == "frame_bytes") {
            s.sizes = traffic::FixedSize{parse_double(key, value)};
        } else if (key == "p_small" || key == "small_bytes" || key == "large_bytes") {
            if (!std::holds_alternative<traffic::BimodalSize>(s.sizes)) s.sizes = traffic::BimodalSize{};
            auto& b = std::get<traffic::BimodalSize>(s.sizes);
            const double v = parse_double(key, value);
            if (key == "p_small") b.p_small = v;
            else if (key == "small_bytes") b.small_bytes = v;
            else b.large_bytes = v;
        } else if (key == "trace") {
            s.trace = value;
        } else if (key == "frames") {
            s.horizon = sim::Horizon::of_frames(parse_uint(key, value));
        } else if (key == "time_us") {
            s.horizon = sim::Horizon::of_time(parse_double(key, value));
        } else if (key == "warmup_cycles") {
            s.warmup_cycles = parse_uint(key, value);
        } else if (key == "seed") {
            s.seed = parse_uint(key, value);
        } else if (key == "out") {
            s.out = value;
        } else if (key == "jobs") {
            s.jobs = static_cast<unsigned>(parse_uint(key, value));
        } else if (key == "line_rate_gbps") {
            s.params.line_rate = parse_double(key, value) * 1e9;
        } else if (key == "phi_off") {
            s.params.phi_off = parse_double(key, value);
        } else if (key == "ts_us") {
            s.params.ts = parse_double(key, value);
        } else if (key == "tw_us") {
            s.params.tw = parse_double(key, value);
        } else if (key == "ewma_weight") {
            s.ewma_weight = parse_double(key, value);
        } else if (key == "bin_width_us") {
            s.bin_width_us = parse_double(key, value);
        } else {
            throw ConfigError(key, "unknown key");
        }
    }
    return s;
}

ExperimentSpec load_config(const std::filesystem::path& path, ExperimentSpec base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    return parse_config(in, std::move(base));
}

std::vector<OutputFile> build_outputs(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<OutputFile> files;

    if (spec.mode == Mode::bound) {
        std::vector<Row> rows;
        if (spec.trace) {
            const auto tp = trace_point(spec);
            for (double tau : spec.taus_us) {
                Row row;
                row.rate_gbps = tp.rate_gbps;
                row.tau_us = tau;
                if (tp.stats) {
                    const auto b = analytic::bound(tau, spec.params, *tp.stats);
                    row.toff_analytic = b.t_off_upper;
                    row.bound_phi = b.energy_lower;
                }
                rows.push_back(row);
            }
            files.push_back({"bound.csv", render(rows)});
            return files;
        }
        for (double tau : spec.taus_us) {
            for (double rate : spec.rates_gbps) {
                Row row;
                row.rate_gbps = rate;
                row.tau_us = tau;
                if (auto stats = stable_stats(spec, rate)) {
                    const auto b = analytic::bound(tau, spec.params, *stats);
                    row.toff_analytic = b.t_off_upper;
                    row.bound_phi = b.energy_lower;
                } else {
                    std::cerr << "warning: " << rate
                              << " Gb/s meets or exceeds the line rate; bound left blank\n";
                }
                rows.push_back(row);
            }
        }
        files.push_back({"bound.csv", render(rows)});
        return files;
    }

    const auto points = expand_grid(spec);

    if (spec.mode == Mode::cdf) {
        std::vector<std::function<std::string()>> tasks;
        for (const auto& pt : points)
            tasks.emplace_back([&spec, pt] { return render_cdf(simulate(spec, pt), spec.bin_width_us); });
        const auto contents = run_parallel(tasks, spec.jobs);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& pt = points[i];
            std::string name = "cdf_" + policy::parse_policy(pt.policy, 1.0).name();
            if (pt.tau) name += "_tau" + number_tag(*pt.tau);
            name += pt.rate ? "_" + number_tag(*pt.rate) + "g" : std::string("_trace");
            files.push_back({name + ".csv", contents[i]});
        }
        return files;
    }

    std::vector<std::function<Row()>> tasks;
    for (const auto& pt : points)
        tasks.emplace_back([&spec, pt] { return point_row(spec, pt, spec.mode); });
    const auto rows = run_parallel(tasks, spec.jobs);

    // One file per policy, rows in grid order.
    std::map<std::string, std::size_t> slot;
    std::vector<std::vector<Row>> grouped;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto name = policy::parse_policy(points[i].policy, 1.0).name();
        auto [it, fresh] = slot.emplace(name, grouped.size());
        if (fresh) {
            grouped.emplace_back();
            names.push_back(name);
        }
        grouped[it->second].push_back(rows[i]);
    }
    for (std::size_t g = 0; g < grouped.size(); ++g)
        files.push_back({to_string(spec.mode) + "_" + names[g] + ".csv", render(grouped[g])});
    return files;
}

std::vector<std::filesystem::path> run_experiment(const ExperimentSpec& spec) {
    const auto files = build_outputs(spec);
    std::error_code ec;
    std::filesystem::create_directories(spec.out, ec);
    if (ec) throw ConfigError("out", "cannot create directory " + spec.out.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    for (const auto& f : files) {
        const auto path = spec.out / f.name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ConfigError("out", "cannot write " + path.string());
        os << f.content;
        if (!os) throw ConfigError("out", "write failed for " + path.string());
        written.push_back(path);
    }
    return written;
}

}  // namespace eee::experiment
