#include "gazefuse/offset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gazefuse/error.hpp"

namespace gazefuse {
namespace {

constexpr double kRadPerDeg = std::numbers::pi / 180.0;
constexpr double kDegPerRad = 180.0 / std::numbers::pi;

Direction unnormalized_ray(double x_deg, double y_deg) {
  if (!std::isfinite(x_deg) || !std::isfinite(y_deg) || std::abs(x_deg) >= 90.0 ||
      std::abs(y_deg) >= 90.0)
    fail(ErrorCode::OutOfRange, "gaze angle outside (-90, 90) dva");
  return {std::tan(x_deg * kRadPerDeg), std::tan(y_deg * kRadPerDeg), 1.0};
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

Direction gaze_to_direction(double x_deg, double y_deg) {
  Direction d = unnormalized_ray(x_deg, y_deg);
  const double norm = std::hypot(d[0], d[1], d[2]);
  for (double& c : d) c /= norm;
  return d;
}

double angular_offset(double gaze_x, double gaze_y, double target_x, double target_y) {
  // The angle does not depend on ray length, so the tan-plane vectors are used directly.
  const Direction g = unnormalized_ray(gaze_x, gaze_y);
  const Direction t = unnormalized_ray(target_x, target_y);
  const double cx = g[1] * t[2] - g[2] * t[1];
  const double cy = g[2] * t[0] - g[0] * t[2];
  const double cz = g[0] * t[1] - g[1] * t[0];
  const double dot = g[0] * t[0] + g[1] * t[1] + g[2] * t[2];
  return std::atan2(std::hypot(cx, cy, cz), dot) * kDegPerRad;
}

OffsetSeries offset_series(const GazeRecording& recording) {
  OffsetSeries out{recording.key, std::vector<double>(recording.samples.size(), kMissing)};
  for (std::size_t i = 0; i < recording.samples.size(); ++i) {
    const auto& s = recording.samples[i];
    if (s.has_gaze() && s.has_target()) out.theta[i] = angular_offset(s.gx, s.gy, s.tx, s.ty);
  }
  return out;
}

double dispersion(std::span<const GazeSample> samples) {
  if (samples.empty()) return 0.0;
  double min_x = samples[0].gx, max_x = min_x, min_y = samples[0].gy, max_y = min_y;
  for (const auto& s : samples) {
    min_x = std::min(min_x, s.gx);
    max_x = std::max(max_x, s.gx);
    min_y = std::min(min_y, s.gy);
    max_y = std::max(max_y, s.gy);
  }
  return (max_x - min_x) + (max_y - min_y);
}

std::vector<Fixation> idt_fixations(std::span<const GazeSample> samples, const IdtParams& params) {
  std::vector<Fixation> fixations;
  const std::size_t n = samples.size();
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive end of the initial candidate, monotone in start

  while (start < n) {
    if (end < start) end = start;
    while (end < n && samples[end].t_ms - samples[start].t_ms < params.min_duration_ms) ++end;
    if (end >= n) break;

    // A missing sample inside the candidate rules out every start up to and including it.
    std::size_t last_missing = n;
    for (std::size_t i = start; i <= end; ++i)
      if (!samples[i].has_gaze()) last_missing = i;
    if (last_missing != n) {
      start = last_missing + 1;
      continue;
    }

    double min_x = samples[start].gx, max_x = min_x;
    double min_y = samples[start].gy, max_y = min_y;
    for (std::size_t i = start + 1; i <= end; ++i) {
      min_x = std::min(min_x, samples[i].gx);
      max_x = std::max(max_x, samples[i].gx);
      min_y = std::min(min_y, samples[i].gy);
      max_y = std::max(max_y, samples[i].gy);
    }
    if ((max_x - min_x) + (max_y - min_y) > params.dispersion_threshold) {
      ++start;
      continue;
    }

    while (end + 1 < n && samples[end + 1].has_gaze()) {
      const auto& s = samples[end + 1];
      const double nx0 = std::min(min_x, s.gx), nx1 = std::max(max_x, s.gx);
      const double ny0 = std::min(min_y, s.gy), ny1 = std::max(max_y, s.gy);
      if ((nx1 - nx0) + (ny1 - ny0) > params.dispersion_threshold) break;
      min_x = nx0, max_x = nx1, min_y = ny0, max_y = ny1;
      ++end;
    }

    Fixation f{start, end, 0.0, 0.0};
    for (std::size_t i = start; i <= end; ++i) {
      f.centroid_x += samples[i].gx;
      f.centroid_y += samples[i].gy;
    }
    const double count = static_cast<double>(end - start + 1);
    f.centroid_x /= count;
    f.centroid_y /= count;
    fixations.push_back(f);
    start = end + 1;
  }
  return fixations;
}

OffsetFeatureVector summarize_offsets(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::NoFixationData, "no fixation-covered offset samples");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);

  OffsetFeatureVector f;
  f.mean = mean;
  f.median = quantile_sorted(values, 0.5);
  f.std = std::sqrt(ss / n);
  f.min = values.front();
  f.max = values.back();
  f.iqr = quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
  return f;
}

OffsetFeatureVector offset_features(const OffsetSeries& theta, std::span<const Fixation> fixations) {
  std::vector<double> covered;
  for (const auto& fx : fixations) {
    if (fx.end_index >= theta.theta.size())
      fail(ErrorCode::OutOfRange, "fixation extends past the offset series");
    for (std::size_t i = fx.start_index; i <= fx.end_index; ++i)
      if (!is_missing(theta.theta[i])) covered.push_back(theta.theta[i]);
  }
  if (covered.empty())
    fail(ErrorCode::NoFixationData, "no fixation-covered offset samples in " + describe(theta.recording));
  return summarize_offsets(std::move(covered));
}

OffsetFeatureVector compute_offset_features(const GazeRecording& recording,
                                            const OffsetOptions& options) {
  if (recording.key.task != Task::RAN)
    fail(ErrorCode::InvalidValue, "offset features need a RAN recording, got " + describe(recording.key));

  std::span<const GazeSample> samples(recording.samples);
  if (options.first_windows) {
    const std::size_t available = window_count(recording);
    if (*options.first_windows > available)
      fail(ErrorCode::MissingWindow, describe(recording.key) + " has " + std::to_string(available) +
                                         " windows, " + std::to_string(*options.first_windows) +
                                         " requested");
    samples = samples.first(*options.first_windows * samples_per_window(recording.rate_hz));
  }
  GazeRecording view{recording.key, recording.rate_hz, {samples.begin(), samples.end()}};
  const OffsetSeries theta = offset_series(view);
  const auto fixations = idt_fixations(view.samples, options.idt);
  return offset_features(theta, fixations);
}

double offset_similarity(const OffsetFeatureVector& a, const OffsetFeatureVector& b) {
  const auto va = a.values();
  const auto vb = b.values();
  double ss = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) ss += (va[i] - vb[i]) * (va[i] - vb[i]);
  return 1.0 / (1.0 + std::sqrt(ss));
}

}  // namespace gazefuse
