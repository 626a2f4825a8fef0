#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace condstable {

/// Monte Carlo result with provenance of the base stream it was drawn from.
struct MCEstimate {
  double value = 0.0;
  double stderr = 0.0;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
};

/// Streaming mean / variance with an order-deterministic merge (Chan et al.).
struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }
  void merge(const Moments& o);
  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double stderr() const;
};

/// Joint moments of (numerator, denominator) pairs for ratio estimators.
struct CoMoments {
  double count = 0.0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  double m2x = 0.0;
  double m2y = 0.0;
  double cxy = 0.0;

  void add(double x, double y);
  void merge(const CoMoments& o);
  /// mean_x / mean_y with a delta-method standard error.
  std::pair<double, double> ratio() const;
};

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b);
/// Asymptotic KS critical value at `level` for sample sizes n (and m; m = 0
/// means one-sample).
double ks_critical(double level, std::size_t n, std::size_t m = 0);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
};

/// Weighted least squares y = intercept + slope * x with weights w.
LineFit weighted_line_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w);

}  // namespace condstable
