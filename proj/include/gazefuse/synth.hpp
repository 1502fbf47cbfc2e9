#pragma once

// Synthetic corpus generator: gaze recordings with a per-subject calibration bias and
// window embeddings with a tunable subject signal, for end-to-end testing.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gazefuse/ingest.hpp"
#include "gazefuse/types.hpp"

namespace gazefuse {

struct SynthConfig {
  int n_subjects = 40;
  int rounds = 1;
  double rate_hz = 250.0;
  double duration_s = 40.0;
  double offset_signature_spread = 1.0;   // std of the per-subject bias, degrees
  double offset_noise = 0.05;             // per-sample gaze noise, degrees
  double embedding_class_separation = 0.5;  // share of the subject direction in [0, 1]
  double embedding_noise = 1.0;           // per-window noise relative to the unit anchor
  double target_extent = 15.0;            // targets drawn from [-extent, extent]
  double target_interval_ms = 1000.0;
  double saccade_ms = 30.0;
  std::uint64_t seed = 7;
};

// Throws InvalidConfig on out-of-range settings.
void validate(const SynthConfig& config);

struct SubjectSignature {
  std::string subject_id;
  double bias_x = 0.0;
  double bias_y = 0.0;
};

std::string synth_subject_id(int index);
SubjectSignature make_signature(int index, const SynthConfig& config);

// RAN: target jumps with a linear saccade and the subject's bias plus noise on top.
// TEX: left-to-right reading steps down a page, no target columns.
GazeRecording generate_recording(const SubjectSignature& subject, const RecordingKey& key,
                                 const SynthConfig& config);

// Every window and fold of every recording of the subjects.
std::vector<EmbeddingRecord> generate_embeddings(std::span<const SubjectSignature> subjects,
                                                 const SynthConfig& config);

struct Corpus {
  std::vector<SubjectSignature> subjects;
  std::vector<GazeRecording> recordings;
  std::vector<EmbeddingRecord> embeddings;
};

// Subjects x rounds x sessions {1, 2} x tasks {RAN, TEX}.
Corpus generate_corpus(const SynthConfig& config);

// Writes recordings/<key>.csv, embeddings.csv and manifest.json under `dir`.
Manifest write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace gazefuse
