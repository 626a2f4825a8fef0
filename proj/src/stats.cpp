#include "condstable/stats.hpp"

#include <algorithm>
#include <cmath>

#include "condstable/errors.hpp"

namespace condstable {

void Moments::merge(const Moments& o) {
  if (o.count == 0.0) return;
  if (count == 0.0) {
    *this = o;
    return;
  }
  const double total = count + o.count;
  const double delta = o.mean - mean;
  mean += delta * o.count / total;
  m2 += o.m2 + delta * delta * count * o.count / total;
  count = total;
}

double Moments::stderr() const { return count > 1.0 ? std::sqrt(variance() / count) : 0.0; }

void CoMoments::add(double x, double y) {
  count += 1.0;
  const double dx = x - mean_x;
  const double dy = y - mean_y;
  mean_x += dx / count;
  mean_y += dy / count;
  m2x += dx * (x - mean_x);
  m2y += dy * (y - mean_y);
  cxy += dx * (y - mean_y);
}

void CoMoments::merge(const CoMoments& o) {
  if (o.count == 0.0) return;
  if (count == 0.0) {
    *this = o;
    return;
  }
  const double total = count + o.count;
  const double dx = o.mean_x - mean_x;
  const double dy = o.mean_y - mean_y;
  const double f = count * o.count / total;
  mean_x += dx * o.count / total;
  mean_y += dy * o.count / total;
  m2x += o.m2x + dx * dx * f;
  m2y += o.m2y + dy * dy * f;
  cxy += o.cxy + dx * dy * f;
  count = total;
}

std::pair<double, double> CoMoments::ratio() const {
  if (mean_y == 0.0 || count < 2.0) return {0.0, 0.0};
  const double r = mean_x / mean_y;
  const double n1 = count - 1.0;
  const double var = (m2x - 2.0 * r * cxy + r * r * m2y) / n1;
  return {r, std::sqrt(std::max(var, 0.0) / count) / std::abs(mean_y)};
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DomainError("KS statistic of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS statistic of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical(double level, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(level / 2.0));
  const double nn = static_cast<double>(n);
  if (m == 0) return c / std::sqrt(nn);
  const double mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

LineFit weighted_line_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w) {
  if (x.size() < 2 || x.size() != y.size() || x.size() != w.size())
    throw FitDegenerate("weighted line fit needs >= 2 matching points");
  Eigen::MatrixXd design(x.size(), 2);
  design.col(0).setOnes();
  design.col(1) = x;
  const Eigen::MatrixXd normal = design.transpose() * w.asDiagonal() * design;
  const Eigen::Vector2d rhs = design.transpose() * w.asDiagonal() * y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || std::abs(normal.determinant()) < 1e-300)
    throw FitDegenerate("weighted line fit normal equations are singular");
  const Eigen::Vector2d beta = ldlt.solve(rhs);
  const Eigen::Matrix2d cov = ldlt.solve(Eigen::MatrixXd::Identity(2, 2));

  LineFit fit;
  fit.intercept = beta(0);
  fit.slope = beta(1);
  fit.slope_stderr = std::sqrt(std::max(cov(1, 1), 0.0));
  const double ybar = w.dot(y) / w.sum();
  const Eigen::VectorXd resid = y - design * beta;
  const double ss_res = (w.array() * resid.array().square()).sum();
  const double ss_tot = (w.array() * (y.array() - ybar).square()).sum();
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace condstable
