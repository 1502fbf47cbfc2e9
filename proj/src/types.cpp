#include "gazefuse/types.hpp"

#include <cmath>

#include "gazefuse/error.hpp"

namespace gazefuse {

std::string_view to_string(Task task) { return task == Task::RAN ? "RAN" : "TEX"; }

Task parse_task(std::string_view text) {
  if (text == "RAN") return Task::RAN;
  if (text == "TEX") return Task::TEX;
  fail(ErrorCode::UnknownTask, "unsupported task '" + std::string(text) + "'");
}

void validate(const RecordingKey& key) {
  if (key.subject_id.empty()) fail(ErrorCode::InvalidValue, "empty subject id");
  if (key.subject_id.find_first_of(",\n\r\"") != std::string::npos)
    fail(ErrorCode::InvalidValue, "subject id contains a delimiter: " + key.subject_id);
  if (key.round < 1) fail(ErrorCode::InvalidValue, "round must be >= 1 in " + describe(key));
  if (key.session != 1 && key.session != 2)
    fail(ErrorCode::InvalidValue, "session must be 1 or 2 in " + describe(key));
}

std::string describe(const RecordingKey& key) {
  return key.subject_id + "/r" + std::to_string(key.round) + "/s" + std::to_string(key.session) +
         "/" + std::string(to_string(key.task));
}

RecordingKey with_task(RecordingKey key, Task task) {
  key.task = task;
  return key;
}

void validate(const GazeRecording& recording) {
  validate(recording.key);
  const auto& s = recording.samples;
  const std::string where = describe(recording.key);
  if (!(recording.rate_hz > 0.0) || !std::isfinite(recording.rate_hz))
    fail(ErrorCode::InvalidValue, "sampling rate must be positive in " + where);
  if (s.empty()) fail(ErrorCode::EmptyRecording, "no samples in " + where);

  const double period = recording.sample_period_ms();
  bool any_gaze = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i].t_ms) || s[i].t_ms < 0.0)
      fail(ErrorCode::InvalidValue, "invalid timestamp at row " + std::to_string(i) + " in " + where);
    if (i > 0) {
      const double dt = s[i].t_ms - s[i - 1].t_ms;
      if (dt <= 0.0)
        fail(ErrorCode::NonMonotonicTime, "time does not increase at row " + std::to_string(i) +
                                              " in " + where);
      if (std::abs(dt - period) > 0.1 * period)
        fail(ErrorCode::InvalidValue, "non-uniform sample spacing at row " + std::to_string(i) +
                                          " in " + where);
    }
    any_gaze = any_gaze || s[i].has_gaze();
  }
  if (!any_gaze) fail(ErrorCode::EmptyRecording, "no gaze samples present in " + where);
}

std::size_t samples_per_window(double rate_hz) {
  return static_cast<std::size_t>(std::llround(kWindowSeconds * rate_hz));
}

std::size_t window_count(const GazeRecording& recording) {
  const std::size_t per_window = samples_per_window(recording.rate_hz);
  return per_window == 0 ? 0 : recording.samples.size() / per_window;
}

std::string_view to_string(PairLabel label) {
  return label == PairLabel::Genuine ? "genuine" : "impostor";
}

PairLabel label_for(const RecordingKey& enroll, const RecordingKey& auth) {
  return enroll.subject_id == auth.subject_id ? PairLabel::Genuine : PairLabel::Impostor;
}

}  // namespace gazefuse
