#include "eee/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eee::analytic {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

void require_stable(double lambda, double rho) {
    require(lambda > 0.0, "arrival rate must be positive");
    require(rho >= 0.0 && rho < 1.0, "utilization must lie in [0, 1)");
}

// delay_size_based for a real-valued threshold.
double delay_size_based_real(double lambda, double qw, double tw, double w0) {
    const double a = qw + lambda * tw;
    return w0 - (qw - 1.0) / (lambda * qw) +
           ((a - 1.0) * (a - 1.0) + qw - 3.0) / (2.0 * lambda * a);
}

}  // namespace

void EeeParams::validate() const {
    require(phi_off >= 0.0 && phi_off < 1.0, "phi_off must lie in [0, 1)");
    require(ts > 0.0, "ts must be positive");
    require(tw > 0.0, "tw must be positive");
    require(line_rate > 0.0, "line_rate must be positive");
}

void TrafficStats::validate() const {
    require(lambda > 0.0, "lambda must be positive");
    require(mu > 0.0, "mu must be positive");
    require(lambda < mu, "utilization lambda/mu must be below 1");
    require(var_interarrival >= 0.0 && var_service >= 0.0,
            "variances must be non-negative");
}

double service_time_us(double bytes, double line_rate) {
    return 8.0 * bytes / line_rate * 1e6;
}

double frame_rate_per_us(double bits_per_second, double mean_frame_bytes) {
    return bits_per_second / (8.0 * mean_frame_bytes) * 1e-6;
}

double w0_exact(const TrafficStats& stats) {
    stats.validate();
    const double lambda = stats.lambda;
    const double rho = stats.rho();
    return (lambda * lambda * (stats.var_interarrival + stats.var_service) +
            (1.0 - rho) * (1.0 - rho)) /
           (2.0 * lambda * (1.0 - rho));
}

double w0_poisson_deterministic(double lambda, double rho) {
    require_stable(lambda, rho);
    return (1.0 + (1.0 - rho) * (1.0 - rho)) / (2.0 * lambda * (1.0 - rho));
}

double energy_ratio(const EeeParams& params, double rho, double t_off_mean) {
    require(t_off_mean >= 0.0, "mean sleep length must be non-negative");
    require(rho >= 0.0 && rho < 1.0, "utilization must lie in [0, 1)");
    if (std::isinf(t_off_mean)) return 1.0 - (1.0 - params.phi_off) * (1.0 - rho);
    return 1.0 - (1.0 - params.phi_off) * (1.0 - rho) * t_off_mean /
                     (t_off_mean + params.ts + params.tw);
}

double toff_time_based(double lambda, double v, double ts) {
    require(lambda > 0.0, "arrival rate must be positive");
    require(v > ts, "timer must exceed the sleep transition");
    return 1.0 / lambda + v - ts;
}

double delay_time_based(double lambda, double v, double tw, double w0) {
    require(lambda > 0.0, "arrival rate must be positive");
    require(v >= 0.0, "timer must be non-negative");
    const double u = v + tw;
    return w0 + (lambda * lambda * u * u - 2.0) / (2.0 * lambda * (1.0 + lambda * u));
}

double regularized_upper_gamma(unsigned q, double x) {
    require(q >= 1, "gamma order must be a positive integer");
    require(x >= 0.0, "gamma argument must be non-negative");
    double term = 1.0;
    double sum = 1.0;
    for (unsigned k = 1; k < q; ++k) {
        term *= x / k;
        sum += term;
    }
    return std::exp(-x) * sum;
}

double upper_incomplete_gamma(unsigned q, double x) {
    require(q >= 1, "gamma order must be a positive integer");
    return std::tgamma(static_cast<double>(q)) * regularized_upper_gamma(q, x);
}

double toff_size_based(double lambda, unsigned qw, double ts) {
    require(lambda > 0.0, "arrival rate must be positive");
    require(qw >= 1, "threshold must be at least one frame");
    require(ts >= 0.0, "ts must be non-negative");
    // [Gamma(Q+1,x) - x Gamma(Q,x)] / Gamma(Q) expands to
    // e^-x sum_{k<Q} (Q-k) x^k / k!, which has no cancelling terms.
    const double x = lambda * ts;
    double term = 1.0;
    double sum = static_cast<double>(qw);
    for (unsigned k = 1; k < qw; ++k) {
        term *= x / k;
        sum += static_cast<double>(qw - k) * term;
    }
    return std::exp(-x) * sum / lambda;
}

double delay_size_based(double lambda, unsigned qw, double tw, double w0) {
    require(lambda > 0.0, "arrival rate must be positive");
    require(qw >= 1, "threshold must be at least one frame");
    return delay_size_based_real(lambda, static_cast<double>(qw), tw, w0);
}

double delay_size_based_approx(double lambda, double qw, double tw, double w0) {
    require(lambda > 0.0, "arrival rate must be positive");
    return w0 + (qw + lambda * tw - 3.0) / (2.0 * lambda);
}

std::optional<double> optimal_timer(double tau, double lambda, double tw,
                                    double w0, double ts) {
    require(tau > 0.0, "target delay must be positive");
    require(lambda > 0.0, "arrival rate must be positive");
    const double slack = tau - w0;
    const double grow = 1.0 + lambda * slack;
    const double v = slack - tw + std::sqrt(1.0 + grow * grow) / lambda;
    if (!(v > ts)) return std::nullopt;
    return v;
}

std::optional<double> optimal_threshold_cubic(double tau, double lambda,
                                              double tw, double w0) {
    require(tau > 0.0, "target delay must be positive");
    require(lambda > 0.0, "arrival rate must be positive");
    const double slack = tau - w0;
    const double lt = lambda * tw;
    const double b = 2.0 * lt - 2.0 * lambda * slack - 3.0;
    const double c = lt * lt - 2.0 * lambda * lt * slack - 4.0 * lt;
    const double d = 2.0 * lt;
    auto cubic = [&](double q) { return ((q + b) * q + c) * q + d; };

    const double lo = 1.0;
    const double hi = 2.0 * lambda * tau + 10.0;
    constexpr int kScan = 2048;
    constexpr double kTol = 1e-9;

    std::vector<double> roots;
    double x0 = lo;
    double f0 = cubic(x0);
    if (f0 == 0.0) roots.push_back(x0);
    for (int i = 1; i <= kScan; ++i) {
        const double x1 = lo + (hi - lo) * i / kScan;
        const double f1 = cubic(x1);
        if (f1 == 0.0) {
            roots.push_back(x1);
        } else if (f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
            double a = x0, fa = f0, z = x1;
            while (z - a > kTol) {
                const double m = 0.5 * (a + z);
                const double fm = cubic(m);
                if (fm == 0.0) { a = z = m; break; }
                if ((fm < 0.0) == (fa < 0.0)) { a = m; fa = fm; } else { z = m; }
            }
            roots.push_back(0.5 * (a + z));
        }
        x0 = x1;
        f0 = f1;
    }
    if (roots.empty()) return std::nullopt;

    double best = roots.front();
    double best_err = std::abs(
        delay_size_based_real(lambda, std::max(1.0, std::round(best)), tw, w0) - tau);
    for (double r : roots) {
        const double err = std::abs(
            delay_size_based_real(lambda, std::max(1.0, std::round(r)), tw, w0) - tau);
        if (err < best_err) {
            best = r;
            best_err = err;
        }
    }
    return best;
}

std::optional<double> optimal_threshold_approx(double tau, double lambda,
                                               double tw, double w0) {
    require(tau > 0.0, "target delay must be positive");
    require(lambda > 0.0, "arrival rate must be positive");
    const double q = 2.0 * lambda * (tau - w0 - 0.5 * tw) + 3.0;
    if (!(q >= 1.0)) return std::nullopt;
    return q;
}

std::optional<double> toff_upper_bound(double tau, const EeeParams& params,
                                       const TrafficStats& stats) {
    const double w0 = w0_exact(stats);
    const double lambda = stats.lambda;
    const double rho = stats.rho();
    const double idle = (1.0 - rho) / lambda;
    const double shift = tau - w0 + lambda * stats.var_interarrival + idle;
    const double root = std::sqrt(shift * shift +
                                  2.0 * (stats.var_interarrival + stats.var_service) +
                                  idle * idle);
    const double t_off = shift - params.ts - params.tw + root;
    if (!(t_off > 0.0)) return std::nullopt;
    return t_off;
}

double energy_lower_bound(double tau, const EeeParams& params,
                          const TrafficStats& stats) {
    return bound(tau, params, stats).energy_lower;
}

BoundResult bound(double tau, const EeeParams& params, const TrafficStats& stats) {
    BoundResult out;
    if (auto t = toff_upper_bound(tau, params, stats)) {
        out.t_off_upper = *t;
        out.energy_lower = energy_ratio(params, stats.rho(), *t);
    }
    return out;
}

}  // namespace eee::analytic
