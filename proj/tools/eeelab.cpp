// eeelab: batch runner for EEE coalescing experiments.
//
//   eeelab sweep --config exp.cfg --out results --jobs 8
//   eeelab bound --rate 1:1:9 --tau 16,32,64
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eee/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> jobs;
    std::vector<std::string> rates;
    std::vector<std::string> taus;
    std::vector<std::string> policies;
    std::optional<std::size_t> frames;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "key = value experiment file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "base seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--rate", f.rates, "rate grid in Gb/s, list or start:step:stop");
    sub->add_option("--tau", f.taus, "target delays in us");
    sub->add_option("--policy", f.policies, "policy, e.g. static_timer:24 or dynamic_size");
    sub->add_option("--frames", f.frames, "frames per simulated point");
}

// Command-line grid options are fed through the config parser so they get
// the same syntax and error messages.
eee::experiment::ExperimentSpec build_spec(eee::experiment::Mode mode, const Flags& f) {
    using namespace eee::experiment;
    ExperimentSpec spec;
    if (!f.config.empty()) spec = load_config(f.config);
    std::ostringstream extra;
    for (const auto& r : f.rates) extra << "rate_gbps = " << r << '\n';
    for (const auto& t : f.taus) extra << "tau_us = " << t << '\n';
    for (const auto& p : f.policies) extra << "policy = " << p << '\n';
    std::istringstream in(extra.str());
    spec = parse_config(in, std::move(spec));

    spec.mode = mode;
    if (f.seed) spec.seed = *f.seed;
    if (f.out) spec.out = *f.out;
    if (f.jobs) spec.jobs = *f.jobs;
    if (f.frames) spec.horizon = eee::sim::Horizon::of_frames(*f.frames);
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace eee::experiment;
    CLI::App app{"Energy Efficient Ethernet frame coalescing experiments"};
    app.require_subcommand(1);

    Flags flags;
    const std::pair<const char*, const char*> subs[] = {
        {"analytic", "closed-form delay, T_off and energy per grid point"},
        {"bound", "energy lower bound and T_off upper bound per (tau, rate)"},
        {"sim", "simulated metrics per grid point"},
        {"sweep", "analytic and simulated metrics side by side"},
        {"cdf", "empirical queuing delay CDF per grid point"},
    };
    for (const auto& [name, help] : subs) add_flags(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto* chosen = app.get_subcommands().front();
        const auto spec = build_spec(parse_mode(chosen->get_name()), flags);
        for (const auto& path : run_experiment(spec)) std::cout << path.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "eeelab: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
