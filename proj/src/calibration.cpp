#include "sphereplane/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <fmt/format.h>

#include "sphereplane/errors.hpp"
#include "sphereplane/pfa.hpp"

namespace sphereplane {

ParabolaFitResult fit_parabola(std::span<const CalibrationPoint> group) {
  const std::size_t n = group.size();
  if (n < 3) throw DomainError(fmt::format("parabola fit needs >= 3 points, got {}", n));
  const double distance = group.front().commanded_distance;
  std::set<double> voltages;
  for (const auto& p : group) {
    if (p.commanded_distance != distance) {
      throw DomainError("parabola fit group mixes distances");
    }
    voltages.insert(p.applied_voltage);
  }
  if (voltages.size() < 3) {
    throw DomainError(fmt::format("parabola fit at d = {} m needs >= 3 distinct voltages, got {}",
                                  distance, voltages.size()));
  }

  double mean = 0.0;
  for (const auto& p : group) mean += p.applied_voltage;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& p : group) spread = std::max(spread, std::abs(p.applied_voltage - mean));

  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd design(rows, 3);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& p = group[static_cast<std::size_t>(i)];
    const double t = (p.applied_voltage - mean) / spread;
    design.row(i) << t * t, t, 1.0;
    y(i) = p.measured_frequency * p.measured_frequency;
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) throw DomainError(fmt::format("parabola fit at d = {} m is rank deficient", distance));
  const Eigen::Vector3d coef = qr.solve(y);
  const double alpha = coef(0);
  const double beta = coef(1);
  const double gamma = coef(2);
  if (!(alpha < 0.0)) {
    throw DomainError(fmt::format(
        "fit rejected at d = {} m: nu^2 is not concave in V (quadratic coefficient {})", distance,
        alpha / (spread * spread)));
  }

  const double rss = (design * coef - y).squaredNorm();
  const std::size_t dof = n - 3;
  const double variance = dof > 0 ? rss / static_cast<double>(dof) : 0.0;
  const Eigen::Matrix3d normal = design.transpose() * design;
  const Eigen::Matrix3d covariance = variance * normal.inverse();
  auto propagate = [&](const Eigen::Vector3d& g) {
    return std::sqrt(std::max(0.0, g.dot(covariance * g)));
  };

  const double nu0_sq = gamma - beta * beta / (4.0 * alpha);
  if (!(nu0_sq > 0.0)) throw DomainError(fmt::format("fit at d = {} m gives nu0^2 <= 0", distance));
  const double nu0 = std::sqrt(nu0_sq);

  ParabolaFitResult result;
  result.distance = distance;
  result.n_points = n;
  result.residual_rms = std::sqrt(rss / static_cast<double>(n));
  result.vc.value = mean - spread * beta / (2.0 * alpha);
  result.vc.error =
      propagate({spread * beta / (2.0 * alpha * alpha), -spread / (2.0 * alpha), 0.0});
  result.k.value = -alpha / (spread * spread);
  result.k.error = propagate({1.0 / (spread * spread), 0.0, 0.0});
  result.nu0.value = nu0;
  result.nu0.error =
      propagate({beta * beta / (4.0 * alpha * alpha), -beta / (2.0 * alpha), 1.0}) / (2.0 * nu0);
  return result;
}

std::vector<ParabolaFitResult> fit_sequence(std::span<const CalibrationPoint> points) {
  std::vector<double> order;
  std::map<double, std::vector<CalibrationPoint>> groups;
  for (const auto& p : points) {
    auto [it, inserted] = groups.try_emplace(p.commanded_distance);
    if (inserted) order.push_back(p.commanded_distance);
    it->second.push_back(p);
  }
  std::vector<ParabolaFitResult> fits;
  fits.reserve(order.size());
  for (const double d : order) fits.push_back(fit_parabola(groups.at(d)));
  return fits;
}

namespace {

struct WindowSamples {
  std::vector<double> log_d;
  std::vector<double> log_k;
  std::vector<double> d;
  std::vector<double> k;
};

WindowSamples select_window(std::span<const double> distance, std::span<const double> value,
                            const FitWindow& window) {
  if (distance.size() != value.size()) throw DomainError("distance and value lengths differ");
  if (!(window.d_min > 0.0) || !(window.d_min < window.d_max)) {
    throw DomainError(fmt::format("invalid fit window [{}, {}] m", window.d_min, window.d_max));
  }
  WindowSamples s;
  for (std::size_t i = 0; i < distance.size(); ++i) {
    if (!(distance[i] > 0.0) || !(value[i] > 0.0)) {
      throw DomainError(fmt::format("exponent fit needs positive samples (row {})", i));
    }
    if (distance[i] < window.d_min || distance[i] > window.d_max) continue;
    s.d.push_back(distance[i]);
    s.k.push_back(value[i]);
    s.log_d.push_back(std::log(distance[i]));
    s.log_k.push_back(std::log(value[i]));
  }
  if (s.d.size() < 5) {
    throw DomainError(
        fmt::format("exponent fit needs >= 5 points inside the window, got {}", s.d.size()));
  }
  return s;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_error = 0.0;
  double r_squared = 1.0;
};

// Weighted least-squares line; unit weights give OLS with the residual-based
// slope error, explicit weights treat them as known inverse variances.
LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> w = {}) {
  const std::size_t n = x.size();
  const bool weighted = !w.empty();
  auto weight = [&](std::size_t i) { return weighted ? w[i] : 1.0; };
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += weight(i);
    sx += weight(i) * x[i];
    sy += weight(i) * y[i];
  }
  const double xm = sx / sw;
  const double ym = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - xm;
    const double dy = y[i] - ym;
    sxx += weight(i) * dx * dx;
    sxy += weight(i) * dx * dy;
    syy += weight(i) * dy * dy;
  }
  if (!(sxx > 0.0)) throw DomainError("line fit needs at least two distinct abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    rss += weight(i) * r * r;
  }
  if (weighted) {
    fit.slope_error = std::sqrt(1.0 / sxx);
  } else {
    fit.slope_error = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  return fit;
}

}  // namespace

ExponentFitResult fit_exponent(std::span<const double> distance, std::span<const double> value,
                               const FitWindow& window) {
  const WindowSamples s = select_window(distance, value, window);
  const LineFit line = fit_line(s.log_d, s.log_k);
  ExponentFitResult result;
  result.alpha = {line.slope, line.slope_error};
  result.log_amplitude = line.intercept;
  result.window = window;
  result.n_points = s.d.size();
  result.r_squared = line.r_squared;
  return result;
}

namespace {

// Residuals (A d^alpha - k) / k_scale with parameters (ln A at d_ref, alpha).
struct PowerLawFunctor : Eigen::DenseFunctor<double> {
  const WindowSamples& s;
  double log_d_ref;
  double k_scale;

  PowerLawFunctor(const WindowSamples& samples, double ref, double scale)
      : Eigen::DenseFunctor<double>(2, static_cast<int>(samples.d.size())),
        s(samples), log_d_ref(ref), k_scale(scale) {}

  int operator()(const InputType& p, ValueType& r) const {
    for (std::size_t i = 0; i < s.d.size(); ++i) {
      r(static_cast<Eigen::Index>(i)) =
          (std::exp(p(0) + p(1) * (s.log_d[i] - log_d_ref)) - s.k[i]) / k_scale;
    }
    return 0;
  }

  int df(const InputType& p, JacobianType& j) const {
    for (std::size_t i = 0; i < s.d.size(); ++i) {
      const double x = s.log_d[i] - log_d_ref;
      const double model = std::exp(p(0) + p(1) * x) / k_scale;
      j(static_cast<Eigen::Index>(i), 0) = model;
      j(static_cast<Eigen::Index>(i), 1) = model * x;
    }
    return 0;
  }
};

}  // namespace

ExponentFitResult fit_exponent_nonlinear(std::span<const double> distance,
                                         std::span<const double> value, const FitWindow& window) {
  const WindowSamples s = select_window(distance, value, window);
  const LineFit seed = fit_line(s.log_d, s.log_k);

  double log_d_ref = 0.0;
  for (const double x : s.log_d) log_d_ref += x;
  log_d_ref /= static_cast<double>(s.log_d.size());
  const double k_scale = *std::max_element(s.k.begin(), s.k.end());

  PowerLawFunctor functor(s, log_d_ref, k_scale);
  Eigen::VectorXd p(2);
  p << seed.intercept + seed.slope * log_d_ref, seed.slope;
  Eigen::LevenbergMarquardt<PowerLawFunctor> lm(functor);
  lm.setXtol(1e-14);
  lm.setFtol(1e-14);
  lm.setMaxfev(2000);
  const auto status = lm.minimize(p);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
    throw NumericError("nonlinear exponent fit rejected its input");
  }

  const auto n = static_cast<Eigen::Index>(s.d.size());
  Eigen::VectorXd residual(n);
  Eigen::MatrixXd jacobian(n, 2);
  functor(p, residual);
  functor.df(p, jacobian);
  const double variance = n > 2 ? residual.squaredNorm() / static_cast<double>(n - 2) : 0.0;
  const Eigen::Matrix2d covariance = variance * (jacobian.transpose() * jacobian).inverse();

  double mean_k = 0.0;
  for (const double k : s.k) mean_k += k;
  mean_k /= static_cast<double>(n);
  double sst = 0.0;
  for (const double k : s.k) sst += (k - mean_k) * (k - mean_k);
  const double rss = residual.squaredNorm() * k_scale * k_scale;

  ExponentFitResult result;
  result.alpha = {p(1), std::sqrt(std::max(0.0, covariance(1, 1)))};
  result.log_amplitude = p(0) - p(1) * log_d_ref;
  result.window = window;
  result.n_points = s.d.size();
  result.r_squared = sst > 0.0 ? 1.0 - rss / sst : 1.0;
  return result;
}

VcSummary vc_independence(std::span<const ParabolaFitResult> fits, bool weighted) {
  const std::size_t n = fits.size();
  if (n < kMinIndependenceFits) {
    throw DomainError(fmt::format("independence test needs >= {} distances, got {}",
                                  kMinIndependenceFits, n));
  }
  VcSummary summary;
  summary.weighted = weighted;
  std::vector<double> log_d(n), shifted(n), weights;
  // Work relative to the first value so identical inputs give an exactly zero trend.
  const double origin = fits.front().vc.value;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(fits[i].distance > 0.0)) throw DomainError("fit distance must be positive");
    summary.distance.push_back(fits[i].distance);
    summary.vc.push_back(fits[i].vc.value);
    log_d[i] = std::log10(fits[i].distance);
    shifted[i] = fits[i].vc.value - origin;
  }
  if (weighted) {
    for (const auto& f : fits) {
      if (!(f.vc.error > 0.0)) throw DomainError("weighted summary needs positive V_c errors");
      weights.push_back(1.0 / (f.vc.error * f.vc.error));
    }
  }

  double sw = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? weights[i] : 1.0;
    sw += w;
    sum += w * shifted[i];
  }
  const double mean_shift = sum / sw;
  summary.mean = origin + mean_shift;
  if (weighted) {
    summary.sem = std::sqrt(1.0 / sw);
  } else {
    double ss = 0.0;
    for (const double v : shifted) ss += (v - mean_shift) * (v - mean_shift);
    summary.sem = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }

  const LineFit trend = fit_line(log_d, shifted, weights);
  summary.trend = {trend.slope, trend.slope_error};
  summary.independent = std::abs(trend.slope) <= 2.0 * trend.slope_error;
  return summary;
}

std::string format_vc_summary(const VcSummary& summary) {
  return fmt::format("V_c = {:.2f} ± {:.2f} mV", summary.mean * 1e3, summary.sem * 1e3);
}

ExponentFitResult profile_exponent(const SurfaceProfile& profile, const FitWindow& window,
                                   std::size_t samples) {
  const auto d = log_spaced(window.d_min, window.d_max, samples);
  std::vector<double> k(d.size());
  const OscillatorParams params{};
  for (std::size_t i = 0; i < d.size(); ++i) k[i] = k_el(d[i], profile, params);
  return fit_exponent(d, k, window);
}

ScanResult scan_profiles(const ScanAxes& axes, const FitWindow& window, std::size_t samples) {
  if (axes.bubble_radius.empty() || axes.bubble_height.empty() ||
      axes.flat_radius_multiplier.empty() || axes.flat_height.empty()) {
    throw DomainError("every scan axis needs at least one value");
  }
  if (!(axes.global_radius > 0.0)) throw DomainError("global radius must be positive");
  ScanResult result;
  for (const double rb : axes.bubble_radius) {
    for (const double hb : axes.bubble_height) {
      for (const double mult : axes.flat_radius_multiplier) {
        for (const double hf : axes.flat_height) {
          const LensModelParameters params{axes.global_radius, mult, rb, hb, hf};
          try {
            const auto profile = make_lens_model_profile(params);
            const auto fit = profile_exponent(profile, window, samples);
            result.rows.push_back({params, fit.alpha.value, fit.alpha.error});
          } catch (const std::exception& e) {
            result.skipped.push_back(fmt::format(
                "skipped R_CD = {} m, h = {} m, R_AB/R = {}, H = {} m: {}", rb, hb, mult, hf,
                e.what()));
          }
        }
      }
    }
  }
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const ScanRow& a, const ScanRow& b) { return a.alpha < b.alpha; });
  return result;
}

}  // namespace sphereplane
