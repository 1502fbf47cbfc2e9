#include "gazefuse/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "gazefuse/error.hpp"
#include "gazefuse/trees.hpp"

namespace gazefuse {

void validate(const SynthConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidConfig, "synth: " + what); };
  if (c.n_subjects < 2) bad("need at least 2 subjects");
  if (c.rounds < 1) bad("rounds must be >= 1");
  if (!(c.rate_hz > 0.0)) bad("rate must be positive");
  if (!(c.duration_s >= 5.0)) bad("duration must cover at least one 5 s window");
  if (!(c.offset_signature_spread >= 0.0) || !(c.offset_noise >= 0.0)) bad("spreads must be >= 0");
  if (!(c.embedding_class_separation >= 0.0 && c.embedding_class_separation <= 1.0))
    bad("class separation must lie in [0, 1]");
  if (!(c.embedding_noise >= 0.0)) bad("embedding noise must be >= 0");
  if (!(c.target_extent > 0.0 && c.target_extent < 60.0)) bad("target extent must lie in (0, 60)");
  if (!(c.target_interval_ms > 0.0) || !(c.saccade_ms >= 0.0) || c.saccade_ms >= c.target_interval_ms)
    bad("saccade must be shorter than the target interval");
}

std::string synth_subject_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%04d", index + 1);
  return buf;
}

namespace {

// Stream ids keep the random sequences of different purposes apart.
enum Stream : std::uint64_t { kBias = 1, kGaze = 2, kTargets = 3, kMean = 4, kAnchor = 5, kWindow = 6 };

std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = seed;
  for (auto p : parts) s = derive_seed(s, p);
  return s;
}

std::uint64_t subject_number(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : id) h = (h ^ ch) * 1099511628211ULL;
  return h;
}

using Vec = std::array<double, kEmbeddingDim>;

Vec gaussian_vec(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec v;
  for (auto& x : v) x = n(rng);
  return v;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(Vec& v) {
  const double n = std::sqrt(dot(v, v));
  for (auto& x : v) x /= n;
}

}  // namespace

SubjectSignature make_signature(int index, const SynthConfig& config) {
  SubjectSignature s;
  s.subject_id = synth_subject_id(index);
  std::mt19937_64 rng(stream_seed(config.seed, {kBias, static_cast<std::uint64_t>(index)}));
  std::normal_distribution<double> n(0.0, 1.0);
  s.bias_x = config.offset_signature_spread * n(rng);
  s.bias_y = config.offset_signature_spread * n(rng);
  return s;
}

GazeRecording generate_recording(const SubjectSignature& subject, const RecordingKey& key,
                                 const SynthConfig& config) {
  validate(config);
  GazeRecording rec;
  rec.key = key;
  rec.rate_hz = config.rate_hz;
  const double period = 1000.0 / config.rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(config.duration_s * config.rate_hz));
  const std::uint64_t rkey = stream_seed(subject_number(subject.subject_id),
                                         {static_cast<std::uint64_t>(key.round),
                                          static_cast<std::uint64_t>(key.session),
                                          static_cast<std::uint64_t>(key.task)});
  std::mt19937_64 noise_rng(stream_seed(config.seed, {kGaze, rkey}));
  std::normal_distribution<double> noise(0.0, config.offset_noise);
  rec.samples.reserve(n);

  if (key.task == Task::RAN) {
    // The target sequence depends on round and session only, like a shared stimulus.
    std::mt19937_64 target_rng(stream_seed(config.seed, {kTargets, static_cast<std::uint64_t>(key.round),
                                                         static_cast<std::uint64_t>(key.session)}));
    std::uniform_real_distribution<double> pos(-config.target_extent, config.target_extent);
    const auto n_targets = static_cast<std::size_t>(std::ceil(n * period / config.target_interval_ms)) + 1;
    std::vector<std::array<double, 2>> targets(n_targets);
    for (auto& t : targets) t = {pos(target_rng), pos(target_rng)};

    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * period;
      const auto k = static_cast<std::size_t>(t / config.target_interval_ms);
      const double since = t - static_cast<double>(k) * config.target_interval_ms;
      // the stimulus glides to its next position; gaze tracks it with the planted bias
      double ex = targets[k][0], ey = targets[k][1];
      if (k > 0 && since < config.saccade_ms) {
        const double f = since / config.saccade_ms;
        ex = targets[k - 1][0] + f * (targets[k][0] - targets[k - 1][0]);
        ey = targets[k - 1][1] + f * (targets[k][1] - targets[k - 1][1]);
      }
      rec.samples.push_back({t, ex + subject.bias_x + noise(noise_rng), ey + subject.bias_y + noise(noise_rng),
                             ex, ey});
    }
  } else {
    const double step_ms = 250.0, word_deg = 2.0;
    const double left = -config.target_extent, right = config.target_extent;
    const auto per_line = static_cast<std::size_t>((right - left) / word_deg) + 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * period;
      const auto word = static_cast<std::size_t>(t / step_ms);
      const auto line = (word / per_line) % 10;
      const double x = left + static_cast<double>(word % per_line) * word_deg;
      const double y = config.target_extent / 2.0 - static_cast<double>(line) * 1.5;
      rec.samples.push_back({t, x + subject.bias_x + noise(noise_rng), y + subject.bias_y + noise(noise_rng),
                             kMissing, kMissing});
    }
  }
  validate(rec);
  return rec;
}

std::vector<EmbeddingRecord> generate_embeddings(std::span<const SubjectSignature> subjects,
                                                 const SynthConfig& config) {
  validate(config);
  const double c = config.embedding_class_separation;
  const double sigma = config.embedding_noise / std::sqrt(static_cast<double>(kEmbeddingDim));
  const auto windows = static_cast<int>(std::llround(config.duration_s * config.rate_hz)) /
                       samples_per_window(config.rate_hz);

  // Population mean direction per (task, fold): shared by everyone, which is what
  // makes impostor similarities positive.
  std::array<std::array<Vec, kFoldCount>, 2> mean{};
  for (int task = 0; task < 2; ++task)
    for (int f = 0; f < kFoldCount; ++f) {
      std::mt19937_64 rng(stream_seed(config.seed, {kMean, static_cast<std::uint64_t>(task),
                                                    static_cast<std::uint64_t>(f)}));
      mean[task][f] = gaussian_vec(rng);
      normalize(mean[task][f]);
    }

  std::vector<EmbeddingRecord> out;
  for (const auto& subject : subjects) {
    const std::uint64_t sid = subject_number(subject.subject_id);
    for (int task = 0; task < 2; ++task) {
      std::array<Vec, kFoldCount> anchor;
      for (int f = 0; f < kFoldCount; ++f) {
        std::mt19937_64 rng(stream_seed(config.seed, {kAnchor, sid, static_cast<std::uint64_t>(task),
                                                      static_cast<std::uint64_t>(f)}));
        Vec z = gaussian_vec(rng);
        const double proj = dot(z, mean[task][f]);
        for (std::size_t d = 0; d < z.size(); ++d) z[d] -= proj * mean[task][f][d];
        normalize(z);
        const double m = std::sqrt(1.0 - c * c);
        for (std::size_t d = 0; d < z.size(); ++d) anchor[f][d] = c * z[d] + m * mean[task][f][d];
      }
      for (int round = 1; round <= config.rounds; ++round)
        for (int session = 1; session <= 2; ++session) {
          const RecordingKey key{subject.subject_id, round, session, static_cast<Task>(task)};
          for (int w = 0; w < windows; ++w)
            for (int f = 0; f < kFoldCount; ++f) {
              std::mt19937_64 rng(stream_seed(
                  config.seed, {kWindow, sid, static_cast<std::uint64_t>(task), static_cast<std::uint64_t>(round),
                                static_cast<std::uint64_t>(session), static_cast<std::uint64_t>(w),
                                static_cast<std::uint64_t>(f)}));
              Vec v = gaussian_vec(rng);
              for (std::size_t d = 0; d < v.size(); ++d) v[d] = anchor[f][d] + sigma * v[d];
              normalize(v);
              out.push_back({{key, w}, f, v});
            }
        }
    }
  }
  return out;
}

Corpus generate_corpus(const SynthConfig& config) {
  validate(config);
  Corpus corpus;
  for (int i = 0; i < config.n_subjects; ++i) corpus.subjects.push_back(make_signature(i, config));
  for (const auto& s : corpus.subjects)
    for (int round = 1; round <= config.rounds; ++round)
      for (int session = 1; session <= 2; ++session)
        for (Task task : {Task::RAN, Task::TEX})
          corpus.recordings.push_back(generate_recording(s, {s.subject_id, round, session, task}, config));
  corpus.embeddings = generate_embeddings(corpus.subjects, config);
  return corpus;
}

Manifest write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "recordings", ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + (dir / "recordings").string() + ": " + ec.message());

  Manifest manifest;
  manifest.base_dir = dir;
  for (const auto& rec : corpus.recordings) {
    const auto& k = rec.key;
    const fs::path rel = fs::path("recordings") / (k.subject_id + "_r" + std::to_string(k.round) + "_s" +
                                                   std::to_string(k.session) + "_" +
                                                   std::string(to_string(k.task)) + ".csv");
    write_recording(dir / rel, rec);
    manifest.recordings.push_back({k, rel, rec.rate_hz, DataSplit::Unassigned});
  }
  write_embeddings(dir / "embeddings.csv", corpus.embeddings);
  manifest.embeddings = fs::path("embeddings.csv");
  save_manifest(dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace gazefuse
