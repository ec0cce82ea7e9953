// Frame arrival and size generators, and CSV trace replay.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "eee/analytic.hpp"

namespace eee::traffic {

struct Frame {
    double arrival_time = 0.0;  // us
    double size = 0.0;          // bytes
};

struct PoissonArrivals {
    double lambda = 0.0;  // frames/us
};

/// Pareto-I interarrivals with shape alpha; the scale is chosen so that the
/// mean interarrival is 1/lambda.
struct ParetoArrivals {
    double alpha = 2.5;
    double lambda = 0.0;

    double scale() const { return (alpha - 1.0) / (alpha * lambda); }
};

using ArrivalSpec = std::variant<PoissonArrivals, ParetoArrivals>;

struct FixedSize {
    double bytes = 1500.0;
};

struct BimodalSize {
    double p_small = 0.54;
    double small_bytes = 100.0;
    double large_bytes = 1500.0;
};

using SizeSpec = std::variant<FixedSize, BimodalSize>;

struct TrafficSpec {
    ArrivalSpec arrival = PoissonArrivals{};
    SizeSpec sizes = FixedSize{};
    std::optional<std::filesystem::path> trace;  // replaces arrival/sizes when set

    void validate() const;
};

double mean_frame_bytes(const SizeSpec& sizes);

/// Arrival rate in frames/us that offers `bits_per_second` with these sizes.
double lambda_for_bitrate(const SizeSpec& sizes, double bits_per_second);

/// Exact moments of a generated spec. Throws for trace specs.
analytic::TrafficStats theoretical_stats(const TrafficSpec& spec, double line_rate);

/// Sample moments of a recorded frame sequence (at least two frames).
analytic::TrafficStats measured_stats(const std::vector<Frame>& frames, double line_rate);

class FrameSource {
public:
    virtual ~FrameSource() = default;
    /// Next frame, or nothing at end of stream.
    virtual std::optional<Frame> next() = 0;
};

/// Infinite seeded stream for a generated spec. Arrivals and sizes come from
/// independent engines so changing one never perturbs the other.
class GeneratedSource final : public FrameSource {
public:
    GeneratedSource(const TrafficSpec& spec, std::uint64_t seed);

    std::optional<Frame> next() override;
    Frame next_frame();

private:
    double next_interarrival();
    double next_size();

    ArrivalSpec arrival_;
    SizeSpec sizes_;
    std::mt19937_64 arrival_rng_;
    std::mt19937_64 size_rng_;
    double clock_ = 0.0;
};

struct TraceSummary {
    std::size_t frames = 0;
    double bytes = 0.0;
    double mean_rate_bps = 0.0;
};

class TraceError : public std::runtime_error {
public:
    TraceError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct Trace {
    std::vector<Frame> frames;
    TraceSummary summary() const;
};

/// Parses `arrival_time_us,frame_size_bytes` lines. Blank lines and lines
/// starting with '#' are skipped, and so is a header row naming the two
/// columns. Throws TraceError on malformed rows or decreasing timestamps.
Trace parse_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);

class TraceSource final : public FrameSource {
public:
    explicit TraceSource(std::vector<Frame> frames) : frames_(std::move(frames)) {}
    std::optional<Frame> next() override;

private:
    std::vector<Frame> frames_;
    std::size_t pos_ = 0;
};

/// Source for any spec: replay when a trace is set, generator otherwise.
std::unique_ptr<FrameSource> make_source(const TrafficSpec& spec, std::uint64_t seed);

}  // namespace eee::traffic
