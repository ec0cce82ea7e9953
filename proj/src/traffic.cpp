#include "eee/traffic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace eee::traffic {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kMinFrameBytes = 64.0;
constexpr double kMaxFrameBytes = 1518.0;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

bool ethernet_size(double bytes) {
    return bytes >= kMinFrameBytes && bytes <= kMaxFrameBytes;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool parse_number(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool is_header(std::string_view line) {
    std::string lower;
    for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c)))
            lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return lower == "arrival_time_us,frame_size_bytes";
}

}  // namespace

void TrafficSpec::validate() const {
    if (trace) return;
    std::visit(overloaded{
                   [](const PoissonArrivals& p) {
                       require(p.lambda > 0.0, "poisson rate must be positive");
                   },
                   [](const ParetoArrivals& p) {
                       require(p.alpha > 2.0, "pareto shape must exceed 2");
                       require(p.lambda > 0.0, "pareto rate must be positive");
                   }},
               arrival);
    std::visit(overloaded{
                   [](const FixedSize& f) {
                       require(ethernet_size(f.bytes), "frame size must lie in [64, 1518] bytes");
                   },
                   [](const BimodalSize& b) {
                       require(b.p_small >= 0.0 && b.p_small <= 1.0,
                               "bimodal small-frame probability must lie in [0, 1]");
                       require(ethernet_size(b.small_bytes) && ethernet_size(b.large_bytes),
                               "bimodal frame sizes must lie in [64, 1518] bytes");
                   }},
               sizes);
}

double mean_frame_bytes(const SizeSpec& sizes) {
    return std::visit(overloaded{[](const FixedSize& f) { return f.bytes; },
                                 [](const BimodalSize& b) {
                                     return b.p_small * b.small_bytes +
                                            (1.0 - b.p_small) * b.large_bytes;
                                 }},
                      sizes);
}

double lambda_for_bitrate(const SizeSpec& sizes, double bits_per_second) {
    return analytic::frame_rate_per_us(bits_per_second, mean_frame_bytes(sizes));
}

analytic::TrafficStats theoretical_stats(const TrafficSpec& spec, double line_rate) {
    if (spec.trace) throw std::invalid_argument("trace specs have no theoretical moments");
    spec.validate();
    analytic::TrafficStats stats;
    std::visit(overloaded{[&](const PoissonArrivals& p) {
                              stats.lambda = p.lambda;
                              stats.var_interarrival = 1.0 / (p.lambda * p.lambda);
                          },
                          [&](const ParetoArrivals& p) {
                              const double xm = p.scale();
                              const double a = p.alpha;
                              stats.lambda = p.lambda;
                              stats.var_interarrival =
                                  xm * xm * a / ((a - 1.0) * (a - 1.0) * (a - 2.0));
                          }},
               spec.arrival);
    std::visit(overloaded{[&](const FixedSize& f) {
                              stats.mu = 1.0 / analytic::service_time_us(f.bytes, line_rate);
                              stats.var_service = 0.0;
                          },
                          [&](const BimodalSize& b) {
                              const double s1 = analytic::service_time_us(b.small_bytes, line_rate);
                              const double s2 = analytic::service_time_us(b.large_bytes, line_rate);
                              const double mean = b.p_small * s1 + (1.0 - b.p_small) * s2;
                              stats.mu = 1.0 / mean;
                              stats.var_service =
                                  b.p_small * (1.0 - b.p_small) * (s2 - s1) * (s2 - s1);
                          }},
               spec.sizes);
    return stats;
}

analytic::TrafficStats measured_stats(const std::vector<Frame>& frames, double line_rate) {
    if (frames.size() < 2) throw std::invalid_argument("need at least two frames for moments");
    double gap_sum = 0.0, gap_sq = 0.0, svc_sum = 0.0, svc_sq = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const double s = analytic::service_time_us(frames[i].size, line_rate);
        svc_sum += s;
        svc_sq += s * s;
        if (i > 0) {
            const double g = frames[i].arrival_time - frames[i - 1].arrival_time;
            gap_sum += g;
            gap_sq += g * g;
        }
    }
    const double ng = static_cast<double>(frames.size() - 1);
    const double ns = static_cast<double>(frames.size());
    const double gap_mean = gap_sum / ng;
    const double svc_mean = svc_sum / ns;
    if (!(gap_mean > 0.0)) throw std::invalid_argument("frames span zero time");
    analytic::TrafficStats stats;
    stats.lambda = 1.0 / gap_mean;
    stats.mu = 1.0 / svc_mean;
    stats.var_interarrival = std::max(0.0, gap_sq / ng - gap_mean * gap_mean);
    stats.var_service = std::max(0.0, svc_sq / ns - svc_mean * svc_mean);
    return stats;
}

GeneratedSource::GeneratedSource(const TrafficSpec& spec, std::uint64_t seed)
    : arrival_(spec.arrival),
      sizes_(spec.sizes),
      arrival_rng_(stream_seed(seed, 1)),
      size_rng_(stream_seed(seed, 2)) {
    if (spec.trace) throw std::invalid_argument("GeneratedSource cannot replay a trace");
    spec.validate();
}

double GeneratedSource::next_interarrival() {
    return std::visit(
        overloaded{[this](const PoissonArrivals& p) {
                       return std::exponential_distribution<double>(p.lambda)(arrival_rng_);
                   },
                   [this](const ParetoArrivals& p) {
                       // 1 - U lies in (0, 1], so the power is finite.
                       const double u =
                           1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(arrival_rng_);
                       return p.scale() * std::pow(u, -1.0 / p.alpha);
                   }},
        arrival_);
}

double GeneratedSource::next_size() {
    return std::visit(overloaded{[](const FixedSize& f) { return f.bytes; },
                                 [this](const BimodalSize& b) {
                                     return std::bernoulli_distribution(b.p_small)(size_rng_)
                                                ? b.small_bytes
                                                : b.large_bytes;
                                 }},
                      sizes_);
}

Frame GeneratedSource::next_frame() {
    clock_ += next_interarrival();
    return Frame{clock_, next_size()};
}

std::optional<Frame> GeneratedSource::next() { return next_frame(); }

TraceError::TraceError(std::size_t line, const std::string& what)
    : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}

TraceSummary Trace::summary() const {
    TraceSummary s;
    s.frames = frames.size();
    for (const auto& f : frames) s.bytes += f.size;
    if (frames.size() >= 2) {
        const double span = frames.back().arrival_time - frames.front().arrival_time;
        if (span > 0.0) {
            const double mean_bits = 8.0 * s.bytes / static_cast<double>(frames.size());
            s.mean_rate_bps =
                static_cast<double>(frames.size() - 1) / span * 1e6 * mean_bits;
        }
    }
    return s;
}

Trace parse_trace(std::istream& in) {
    Trace trace;
    std::string raw;
    std::size_t line_no = 0;
    bool seen_row = false;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (!seen_row && trace.frames.empty() && is_header(line)) {
            seen_row = true;
            continue;
        }
        seen_row = true;
        const auto comma = line.find(',');
        if (comma == std::string_view::npos)
            throw TraceError(line_no, "expected 'arrival_time_us,frame_size_bytes'");
        double t = 0.0;
        double size = 0.0;
        if (!parse_number(line.substr(0, comma), t))
            throw TraceError(line_no, "bad arrival time");
        if (!parse_number(line.substr(comma + 1), size))
            throw TraceError(line_no, "bad frame size");
        if (!(size > 0.0)) throw TraceError(line_no, "frame size must be positive");
        if (!trace.frames.empty() && t < trace.frames.back().arrival_time)
            throw TraceError(line_no, "timestamps must be non-decreasing");
        trace.frames.push_back(Frame{t, size});
    }
    return trace;
}

Trace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file " + path.string());
    return parse_trace(in);
}

std::optional<Frame> TraceSource::next() {
    if (pos_ >= frames_.size()) return std::nullopt;
    return frames_[pos_++];
}

std::unique_ptr<FrameSource> make_source(const TrafficSpec& spec, std::uint64_t seed) {
    if (spec.trace) return std::make_unique<TraceSource>(load_trace(*spec.trace).frames);
    return std::make_unique<GeneratedSource>(spec, seed);
}

}  // namespace eee::traffic
