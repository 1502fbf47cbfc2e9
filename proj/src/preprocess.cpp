#include "gazefuse/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "gazefuse/error.hpp"

namespace gazefuse {
namespace {

constexpr int kHalf = kSgWindowLength / 2;

// Weights of the derivative of a quadratic least-squares fit over offsets z = -3..3,
// evaluated at offset z0. For this window sum(z^2) = 28 and sum(z^4) = 196, which gives
// d/dz at z0 = sum_z y_z * (3 z + 2 z0 (z^2 - 4)) / 84.
constexpr std::array<double, kSgWindowLength> derivative_weights(int z0) {
  std::array<double, kSgWindowLength> w{};
  for (int z = -kHalf; z <= kHalf; ++z)
    w[static_cast<std::size_t>(z + kHalf)] = static_cast<double>(3 * z + 2 * z0 * (z * z - 4)) / 84.0;
  return w;
}

constexpr std::array<std::array<double, kSgWindowLength>, kSgWindowLength> kEdgeWeights = [] {
  std::array<std::array<double, kSgWindowLength>, kSgWindowLength> all{};
  for (int z0 = -kHalf; z0 <= kHalf; ++z0) all[static_cast<std::size_t>(z0 + kHalf)] = derivative_weights(z0);
  return all;
}();

double fit_derivative(std::span<const double> window, int z0) {
  for (double v : window)
    if (is_missing(v)) return kMissing;
  if (z0 == 0) {
    // Centred case written antisymmetrically: sum z (y_z - y_-z) / 28.
    double acc = 0.0;
    for (int z = 1; z <= kHalf; ++z)
      acc += z * (window[static_cast<std::size_t>(kHalf + z)] - window[static_cast<std::size_t>(kHalf - z)]);
    return acc / 28.0;
  }
  const auto& w = kEdgeWeights[static_cast<std::size_t>(z0 + kHalf)];
  double acc = 0.0;
  for (std::size_t i = 0; i < window.size(); ++i) acc += w[i] * window[i];
  return acc;
}

}  // namespace

std::vector<double> sg_differentiate(std::span<const double> positions, double rate_hz) {
  const std::size_t n = positions.size();
  if (n < static_cast<std::size_t>(kSgWindowLength))
    fail(ErrorCode::TooShort, "Savitzky-Golay differentiation needs at least 7 samples, got " +
                                  std::to_string(n));
  std::vector<double> out(n);
  const std::size_t len = kSgWindowLength;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t start;
    int z0;
    if (i < static_cast<std::size_t>(kHalf)) {
      start = 0;
      z0 = static_cast<int>(i) - kHalf;
    } else if (i + kHalf >= n) {
      start = n - len;
      z0 = static_cast<int>(i - start) - kHalf;
    } else {
      start = i - kHalf;
      z0 = 0;
    }
    out[i] = fit_derivative(positions.subspan(start, len), z0) * rate_hz;
  }
  return out;
}

std::vector<VelocityWindow> make_windows(const GazeRecording& recording,
                                         const WindowOptions& options, DataSplit split) {
  const std::size_t count = window_count(recording);
  const std::size_t per_window = samples_per_window(recording.rate_hz);
  std::vector<VelocityWindow> windows;
  if (count == 0) return windows;

  const std::size_t n = recording.samples.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = recording.samples[i];
    x[i] = s.has_gaze() ? s.gx : kMissing;
    y[i] = s.has_gaze() ? s.gy : kMissing;
  }
  auto vx = sg_differentiate(x, recording.rate_hz);
  auto vy = sg_differentiate(y, recording.rate_hz);
  const double clamp = options.velocity_clamp;
  for (auto* v : {&vx, &vy})
    for (double& value : *v)
      if (!is_missing(value)) value = std::clamp(value, -clamp, clamp);

  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t begin = w * per_window;
    const std::size_t end = begin + per_window;
    VelocityWindow win;
    win.window = WindowKey{recording.key, static_cast<int>(w)};
    win.vx.assign(vx.begin() + static_cast<std::ptrdiff_t>(begin), vx.begin() + static_cast<std::ptrdiff_t>(end));
    win.vy.assign(vy.begin() + static_cast<std::ptrdiff_t>(begin), vy.begin() + static_cast<std::ptrdiff_t>(end));
    std::size_t missing = 0;
    for (std::size_t i = begin; i < end; ++i) missing += recording.samples[i].has_gaze() ? 0 : 1;
    win.missing_fraction = static_cast<double>(missing) / static_cast<double>(per_window);
    win.valid = win.missing_fraction <= options.max_missing_fraction;
    win.split = split;
    windows.push_back(std::move(win));
  }
  return windows;
}

NormStats fit_norm(std::span<const VelocityWindow> training_windows) {
  if (training_windows.empty()) fail(ErrorCode::DegenerateStats, "no training windows");
  for (const auto& w : training_windows)
    if (w.split != DataSplit::Train)
      fail(ErrorCode::NormLeakage, "window " + describe(w.window.recording) + "#" +
                                       std::to_string(w.window.window_index) + " is tagged '" +
                                       std::string(to_string(w.split)) + "', not train");

  struct Acc {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
  };
  // Two passes per channel: mean first, then centred squares.
  auto channel = [&](auto member) {
    Acc a;
    for (const auto& w : training_windows)
      for (double v : w.*member)
        if (!is_missing(v)) {
          a.sum += v;
          ++a.n;
        }
    if (a.n < 2) fail(ErrorCode::DegenerateStats, "fewer than two velocity values in a channel");
    const double mean = a.sum / static_cast<double>(a.n);
    for (const auto& w : training_windows)
      for (double v : w.*member)
        if (!is_missing(v)) a.sum_sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(a.sum_sq / static_cast<double>(a.n));
    if (!(sd > 0.0)) fail(ErrorCode::DegenerateStats, "zero variance in a velocity channel");
    return std::pair{mean, sd};
  };
  const auto [mx, sx] = channel(&VelocityWindow::vx);
  const auto [my, sy] = channel(&VelocityWindow::vy);
  return NormStats{mx, my, sx, sy};
}

VelocityWindow apply_norm(VelocityWindow window, const NormStats& stats) {
  for (double& v : window.vx)
    if (!is_missing(v)) v = (v - stats.mean_x) / stats.std_x;
  for (double& v : window.vy)
    if (!is_missing(v)) v = (v - stats.mean_y) / stats.std_y;
  return window;
}

VelocityWindow zero_fill(VelocityWindow window) {
  for (auto* channel : {&window.vx, &window.vy})
    for (double& v : *channel)
      if (is_missing(v)) v = 0.0;
  return window;
}

}  // namespace gazefuse
