#pragma once

// Shared vocabulary: recording identity, gaze samples, windows and pair labels.

#include <compare>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace gazefuse {

enum class Task { RAN, TEX };

std::string_view to_string(Task task);
// Throws UnknownTask.
Task parse_task(std::string_view text);

struct RecordingKey {
  std::string subject_id;
  int round = 1;
  int session = 1;
  Task task = Task::RAN;

  auto operator<=>(const RecordingKey&) const = default;
};

// Throws InvalidValue when the key breaks its invariants (session in {1,2}, round >= 1,
// subject id non-empty and free of CSV delimiters).
void validate(const RecordingKey& key);

// "subject/r<round>/s<session>/<task>", used in messages and file names.
std::string describe(const RecordingKey& key);

// The same subject/round/session recorded under another task.
RecordingKey with_task(RecordingKey key, Task task);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return v != v; }

struct GazeSample {
  double t_ms = 0.0;
  double gx = kMissing;
  double gy = kMissing;
  double tx = kMissing;
  double ty = kMissing;

  bool has_gaze() const { return !is_missing(gx) && !is_missing(gy); }
  bool has_target() const { return !is_missing(tx) && !is_missing(ty); }
};

struct GazeRecording {
  RecordingKey key;
  double rate_hz = 1000.0;
  std::vector<GazeSample> samples;

  double sample_period_ms() const { return 1000.0 / rate_hz; }
  double duration_seconds() const { return static_cast<double>(samples.size()) / rate_hz; }
};

// Checks timestamp monotonicity, uniform spacing (10% tolerance) and that at least one
// gaze sample is present. Throws EmptyRecording, NonMonotonicTime or InvalidValue.
void validate(const GazeRecording& recording);

inline constexpr double kWindowSeconds = 5.0;

std::size_t samples_per_window(double rate_hz);

// floor(duration / 5 s); a trailing partial window is dropped.
std::size_t window_count(const GazeRecording& recording);

struct WindowKey {
  RecordingKey recording;
  int window_index = 0;

  auto operator<=>(const WindowKey&) const = default;
};

enum class PairLabel { Genuine, Impostor };

std::string_view to_string(PairLabel label);
PairLabel label_for(const RecordingKey& enroll, const RecordingKey& auth);

inline bool is_genuine(PairLabel label) { return label == PairLabel::Genuine; }

}  // namespace gazefuse
