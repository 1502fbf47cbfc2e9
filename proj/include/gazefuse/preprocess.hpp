#pragma once

// Velocity preprocessing for the embedding boundary: Savitzky-Golay differentiation,
// fixed 5 s windows and z-score normalization fitted on training windows only.

#include <span>
#include <vector>

#include "gazefuse/ingest.hpp"
#include "gazefuse/types.hpp"

namespace gazefuse {

inline constexpr int kSgWindowLength = 7;
inline constexpr int kSgPolyOrder = 2;

// First derivative (units per second) from a 7-point quadratic least-squares fit.
// Interior samples use the centred fit; the first and last three samples evaluate the
// one-sided fit over the first/last seven samples. An output is missing whenever any
// input of the fit that produced it is missing. Throws TooShort below seven samples.
std::vector<double> sg_differentiate(std::span<const double> positions, double rate_hz);

struct VelocityWindow {
  WindowKey window;
  std::vector<double> vx;  // deg/s
  std::vector<double> vy;
  double missing_fraction = 0.0;  // share of samples without gaze in this window
  bool valid = true;
  DataSplit split = DataSplit::Unassigned;
};

struct WindowOptions {
  double max_missing_fraction = 0.5;
  double velocity_clamp = 1000.0;  // deg/s, applied symmetrically
};

// Differentiates the whole recording, then slices window_count() windows. Windows over
// the missing-fraction limit are kept but flagged invalid.
std::vector<VelocityWindow> make_windows(const GazeRecording& recording,
                                         const WindowOptions& options = {},
                                         DataSplit split = DataSplit::Unassigned);

struct NormStats {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double std_x = 1.0;
  double std_y = 1.0;
};

// Population mean/std over all non-missing values. Every window must carry the Train
// provenance tag (NormLeakage otherwise); DegenerateStats on zero variance or fewer than
// two values in a channel.
NormStats fit_norm(std::span<const VelocityWindow> training_windows);

VelocityWindow apply_norm(VelocityWindow window, const NormStats& stats);

// Normalized window with missing entries replaced by zero, as handed to an embedding model.
VelocityWindow zero_fill(VelocityWindow window);

}  // namespace gazefuse
