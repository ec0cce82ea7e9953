// Batch experiments: analytic curves, bounds, simulations and delay CDFs
// over a grid of rates and target delays, written as CSV.
#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eee/analytic.hpp"
#include "eee/sim.hpp"
#include "eee/traffic.hpp"

namespace eee::experiment {

enum class Mode { analytic, bound, sim, sweep, cdf };

Mode parse_mode(const std::string& text);
std::string to_string(Mode mode);

enum class ArrivalKind { poisson, pareto };

struct ExperimentSpec {
    Mode mode = Mode::sweep;
    std::vector<double> rates_gbps;
    std::vector<double> taus_us;
    std::vector<std::string> policies;

    ArrivalKind arrival = ArrivalKind::poisson;
    double pareto_alpha = 2.5;
    traffic::SizeSpec sizes = traffic::FixedSize{1500.0};
    std::optional<std::filesystem::path> trace;

    analytic::EeeParams params;
    sim::Horizon horizon = sim::Horizon::of_frames(1'000'000);
    std::size_t warmup_cycles = 100;
    double ewma_weight = 0.1;
    double bin_width_us = 1.0;

    std::uint64_t seed = 1;
    std::filesystem::path out = "out";
    unsigned jobs = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    /// Traffic for one grid rate, or the trace when one is configured.
    traffic::TrafficSpec traffic_at(double rate_gbps) const;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error("config field '" + field + "': " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Reads `key = value` lines. Repeating a list key (rate_gbps, tau_us,
/// policy) appends; a value may also hold a comma list or a
/// `start:step:stop` range. `#` starts a comment.
ExperimentSpec parse_config(std::istream& in, ExperimentSpec base = {});
ExperimentSpec load_config(const std::filesystem::path& path, ExperimentSpec base = {});

/// CSV column order shared by every non-CDF output.
extern const std::vector<std::string> kColumns;

struct OutputFile {
    std::string name;     // file name relative to the output directory
    std::string content;  // complete CSV text
};

/// Computes every output in memory. Rows follow configuration order
/// (policy, then tau, then rate) independent of `jobs`.
std::vector<OutputFile> build_outputs(const ExperimentSpec& spec);

/// build_outputs plus writing into spec.out. Returns the written paths.
std::vector<std::filesystem::path> run_experiment(const ExperimentSpec& spec);

/// Seed used for the grid point at `index`, derived from the base seed.
std::uint64_t point_seed(std::uint64_t base, std::size_t index);

}  // namespace eee::experiment
