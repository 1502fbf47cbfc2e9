#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gazefuse/fusion.hpp"
#include "gazefuse/types.hpp"

namespace fixtures {

inline gazefuse::GazeRecording recording(const std::vector<double>& x, const std::vector<double>& y,
                                         double rate_hz = 1000.0, gazefuse::Task task = gazefuse::Task::RAN,
                                         const std::vector<double>& tx = {}, const std::vector<double>& ty = {}) {
  gazefuse::GazeRecording r;
  r.key = {"S1", 1, 1, task};
  r.rate_hz = rate_hz;
  for (std::size_t i = 0; i < x.size(); ++i)
    r.samples.push_back({i * 1000.0 / rate_hz, x[i], y[i], tx.empty() ? gazefuse::kMissing : tx[i],
                         ty.empty() ? gazefuse::kMissing : ty[i]});
  return r;
}

// Scored pairs over n subjects: every enrollment against every authentication. Scores
// come from the given generators, called with (genuine?, rng).
template <class Ekyt, class Spatial>
std::vector<gazefuse::ScoreVector> scored_pairs(int n_subjects, gazefuse::Task task, std::mt19937_64& rng,
                                                Ekyt&& ekyt, Spatial&& spatial) {
  std::vector<gazefuse::ScoreVector> out;
  for (int e = 0; e < n_subjects; ++e)
    for (int a = 0; a < n_subjects; ++a) {
      gazefuse::ScoreVector v;
      v.enroll = {"P" + std::to_string(e), 1, 2, task};
      v.auth = {"P" + std::to_string(a), 1, 1, task};
      v.label = gazefuse::label_for(v.enroll, v.auth);
      const bool g = e == a;
      (task == gazefuse::Task::RAN ? v.s_ekyt_ran : v.s_ekyt_tex) = ekyt(g, rng);
      v.s_spatial = spatial(g, rng);
      out.push_back(v);
    }
  return out;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("gazefuse-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace fixtures
