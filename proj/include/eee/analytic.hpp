// Closed-form energy and delay model for EEE frame coalescing.
//
// Units: times in microseconds, rates in frames per microsecond. The only
// quantity carried in bits per second is EeeParams::line_rate, which is
// converted at the edges (see service_time_us).
#pragma once

#include <cstdint>
#include <optional>

namespace eee::analytic {

/// Physical constants of an EEE interface. Defaults are 10GBASE-T values.
struct EeeParams {
    double phi_off = 0.1;     ///< LPI power relative to active power.
    double ts = 2.88;         ///< sleep transition, us
    double tw = 4.48;         ///< wake transition, us
    double line_rate = 10e9;  ///< bits per second

    /// Throws std::invalid_argument when an invariant does not hold.
    void validate() const;
};

/// Transmission time of a frame of `bytes` at `line_rate` bits/s, in us.
double service_time_us(double bytes, double line_rate);

/// Frames per microsecond for a bit rate and a mean frame size.
double frame_rate_per_us(double bits_per_second, double mean_frame_bytes);

/// First and second moments of the arrival and service processes.
struct TrafficStats {
    double lambda = 0.0;            ///< arrivals, frames/us
    double mu = 0.0;                ///< service capacity, frames/us
    double var_interarrival = 0.0;  ///< us^2
    double var_service = 0.0;       ///< us^2

    double rho() const { return lambda / mu; }
    void validate() const;
};

struct CoalescingOutcome {
    double t_off_mean = 0.0;
    double mean_delay = 0.0;
    double energy_ratio = 1.0;
};

struct BoundResult {
    double t_off_upper = 0.0;
    double energy_lower = 1.0;
};

// Baseline GI/G/1 waiting term, independent of the coalescing algorithm.
double w0_exact(const TrafficStats& stats);

// W0 under Poisson arrivals and deterministic frame sizes.
double w0_poisson_deterministic(double lambda, double rho);

/// Energy consumed relative to an interface that never sleeps.
double energy_ratio(const EeeParams& params, double rho, double t_off_mean);

/// Mean LPI residency for a timer of `v` us started on the first arrival.
/// Requires v > ts.
double toff_time_based(double lambda, double v, double ts);

/// Mean queuing delay for time-based coalescing with Poisson arrivals.
double delay_time_based(double lambda, double v, double tw, double w0);

/// Upper incomplete gamma function for a positive integer order, evaluated
/// with the exact finite series (q-1)! e^-x sum_{k<q} x^k/k!.
double upper_incomplete_gamma(unsigned q, double x);

/// Gamma(q, x) / (q-1)!, i.e. P[Poisson(x) < q]. Stays in [0, 1] for any q
/// where the unregularized value would overflow.
double regularized_upper_gamma(unsigned q, double x);

/// Mean LPI residency when waking on the qw-th queued frame.
double toff_size_based(double lambda, unsigned qw, double ts);

/// Mean queuing delay for size-based coalescing with Poisson arrivals.
double delay_size_based(double lambda, unsigned qw, double tw, double w0);

/// Large-threshold approximation of delay_size_based; accepts real qw.
double delay_size_based_approx(double lambda, double qw, double tw, double w0);

/// Timer that yields mean delay `tau`. Empty when the result is <= ts, in
/// which case coalescing cannot meet the target.
std::optional<double> optimal_timer(double tau, double lambda, double tw,
                                    double w0, double ts);

/// Real-valued threshold solving delay_size_based(Q) == tau, found by
/// bisection on the equivalent cubic over [1, 2*lambda*tau + 10]. Empty when
/// no root >= 1 exists.
std::optional<double> optimal_threshold_cubic(double tau, double lambda,
                                              double tw, double w0);

/// Closed-form threshold from the large-Q approximation. Empty when < 1.
std::optional<double> optimal_threshold_approx(double tau, double lambda,
                                               double tw, double w0);

/// Upper bound on mean LPI residency for any coalescer whose mean delay is
/// `tau`. Empty when the bound is not positive.
std::optional<double> toff_upper_bound(double tau, const EeeParams& params,
                                       const TrafficStats& stats);

/// Lower bound on the energy ratio at mean delay `tau`; 1 when no sleep is
/// possible.
double energy_lower_bound(double tau, const EeeParams& params,
                          const TrafficStats& stats);

BoundResult bound(double tau, const EeeParams& params,
                  const TrafficStats& stats);

}  // namespace eee::analytic
