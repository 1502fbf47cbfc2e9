#pragma once

// Per-recording embedding aggregation (fold centroids concatenated) and cosine scoring.

#include <array>
#include <map>
#include <span>
#include <vector>

#include "gazefuse/ingest.hpp"
#include "gazefuse/types.hpp"

namespace gazefuse {

inline constexpr std::size_t kAggregatedDim = kEmbeddingDim * kFoldCount;
inline constexpr std::array<int, 6> kNSeqGrid{1, 2, 3, 4, 6, 8};

struct AggregatedEmbedding {
  RecordingKey recording;
  int n_seq = 1;
  std::array<double, kAggregatedDim> vector{};
};

// For each fold 0..3, the arithmetic mean of windows 0..n_seq-1, concatenated in fold
// order. All records must belong to one recording. Throws MissingWindow / MissingFold.
AggregatedEmbedding aggregate(std::span<const EmbeddingRecord> records, int n_seq);

// Cosine similarity of two aggregated vectors. Throws ZeroVector, or InvalidValue when
// the n_seq values differ.
double embed_similarity(const AggregatedEmbedding& enroll, const AggregatedEmbedding& auth);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Records grouped by recording, for repeated aggregation.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::span<const EmbeddingRecord> records);

  bool contains(const RecordingKey& key) const { return by_recording_.count(key) != 0; }
  std::vector<RecordingKey> recordings() const;
  // Number of leading windows for which all four folds are present.
  int complete_windows(const RecordingKey& key) const;
  AggregatedEmbedding aggregate(const RecordingKey& key, int n_seq) const;

 private:
  std::map<RecordingKey, std::vector<EmbeddingRecord>> by_recording_;
};

}  // namespace gazefuse
