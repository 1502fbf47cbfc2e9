#pragma once

// Continuous gaze offset: per-sample angular distance between gaze and target, fixation
// filtering with I-DT, per-recording statistics and the distance-based similarity.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gazefuse/types.hpp"

namespace gazefuse {

using Direction = std::array<double, 3>;

// Unit viewing ray for a screen position given in degrees of visual angle:
// (tan x, tan y, 1) normalized. Throws OutOfRange for |x| or |y| >= 90 or non-finite input.
Direction gaze_to_direction(double x_deg, double y_deg);

// Angle in dva between the rays through gaze and target. Evaluated as
// atan2(|g x t|, g . t), which equals arccos of the normalized dot product and stays
// accurate near zero. Exactly symmetric; exactly zero when gaze == target.
double angular_offset(double gaze_x, double gaze_y, double target_x, double target_y);

// theta per sample of a recording; missing where gaze or target is missing.
struct OffsetSeries {
  RecordingKey recording;
  std::vector<double> theta;
};

OffsetSeries offset_series(const GazeRecording& recording);

struct IdtParams {
  double dispersion_threshold = 1.0;  // dva, (max x - min x) + (max y - min y)
  double min_duration_ms = 100.0;     // t[end] - t[start]
};

struct Fixation {
  std::size_t start_index = 0;  // inclusive
  std::size_t end_index = 0;    // inclusive
  double centroid_x = 0.0;
  double centroid_y = 0.0;
};

// Dispersion-threshold identification. A candidate starts with the shortest span whose
// duration reaches min_duration; if its dispersion is within the threshold it grows one
// sample at a time until the next sample would exceed it. Missing gaze samples end
// growth and invalidate any candidate that contains them.
std::vector<Fixation> idt_fixations(std::span<const GazeSample> samples, const IdtParams& params);

double dispersion(std::span<const GazeSample> samples);

inline constexpr std::array<std::string_view, 6> kOffsetFeatureNames{"mean", "median", "std",
                                                                     "min",  "max",    "iqr"};

struct OffsetFeatureVector {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  double iqr = 0.0;  // q75 - q25, linear interpolation between order statistics

  std::array<double, 6> values() const { return {mean, median, std, min, max, iqr}; }
};

// Statistics of theta over samples covered by fixations; missing theta is skipped.
// Throws NoFixationData when nothing is covered.
OffsetFeatureVector offset_features(const OffsetSeries& theta, std::span<const Fixation> fixations);

// Same statistics over an explicit collection of values. Throws NoFixationData when empty.
OffsetFeatureVector summarize_offsets(std::vector<double> values);

struct OffsetOptions {
  IdtParams idt;
  // When set, only the first n 5-second windows of the recording contribute.
  std::optional<std::size_t> first_windows;
};

// Full per-recording computation: theta series, I-DT, fixation-filtered statistics.
// The recording must be a RAN recording with targets (InvalidValue otherwise).
OffsetFeatureVector compute_offset_features(const GazeRecording& recording,
                                            const OffsetOptions& options = {});

// s = 1 / (1 + d), d the Euclidean distance between the two feature vectors.
double offset_similarity(const OffsetFeatureVector& a, const OffsetFeatureVector& b);

}  // namespace gazefuse
