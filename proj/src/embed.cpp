#include "gazefuse/embed.hpp"

#include <algorithm>
#include <cmath>

#include "gazefuse/error.hpp"

namespace gazefuse {

AggregatedEmbedding aggregate(std::span<const EmbeddingRecord> records, int n_seq) {
  if (n_seq < 1) fail(ErrorCode::InvalidValue, "n_seq must be >= 1");
  if (records.empty()) fail(ErrorCode::MissingWindow, "no embedding records");

  const RecordingKey& key = records.front().window.recording;
  // slot[fold][window] -> record, so the summation order never depends on input order
  std::array<std::vector<const EmbeddingRecord*>, kFoldCount> slot;
  for (auto& s : slot) s.assign(static_cast<std::size_t>(n_seq), nullptr);
  std::array<bool, kFoldCount> fold_seen{};
  for (const auto& r : records) {
    if (r.window.recording != key)
      fail(ErrorCode::InvalidValue, "records from " + describe(key) + " and " +
                                        describe(r.window.recording) + " mixed in one aggregate");
    fold_seen[static_cast<std::size_t>(r.fold_id)] = true;
    if (r.window.window_index < n_seq)
      slot[static_cast<std::size_t>(r.fold_id)][static_cast<std::size_t>(r.window.window_index)] = &r;
  }

  AggregatedEmbedding out;
  out.recording = key;
  out.n_seq = n_seq;
  for (std::size_t f = 0; f < kFoldCount; ++f) {
    if (!fold_seen[f])
      fail(ErrorCode::MissingFold, describe(key) + " has no embeddings for fold " + std::to_string(f));
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) out.vector[f * kEmbeddingDim + d] = 0.0;
    for (std::size_t w = 0; w < static_cast<std::size_t>(n_seq); ++w) {
      const EmbeddingRecord* r = slot[f][w];
      if (!r)
        fail(ErrorCode::MissingWindow, describe(key) + " lacks window " + std::to_string(w) +
                                           " for fold " + std::to_string(f));
      for (std::size_t d = 0; d < kEmbeddingDim; ++d) out.vector[f * kEmbeddingDim + d] += r->vector[d];
    }
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) out.vector[f * kEmbeddingDim + d] /= n_seq;
  }
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "cosine of vectors with different length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double embed_similarity(const AggregatedEmbedding& enroll, const AggregatedEmbedding& auth) {
  if (enroll.n_seq != auth.n_seq)
    fail(ErrorCode::InvalidValue, "comparing aggregates built from different n_seq");
  return cosine_similarity(enroll.vector, auth.vector);
}

EmbeddingStore::EmbeddingStore(std::span<const EmbeddingRecord> records) {
  for (const auto& r : records) by_recording_[r.window.recording].push_back(r);
}

std::vector<RecordingKey> EmbeddingStore::recordings() const {
  std::vector<RecordingKey> keys;
  keys.reserve(by_recording_.size());
  for (const auto& [k, _] : by_recording_) keys.push_back(k);
  return keys;
}

int EmbeddingStore::complete_windows(const RecordingKey& key) const {
  const auto it = by_recording_.find(key);
  if (it == by_recording_.end()) return 0;
  std::map<int, int> folds_per_window;
  for (const auto& r : it->second) ++folds_per_window[r.window.window_index];
  int n = 0;
  while (true) {
    const auto w = folds_per_window.find(n);
    if (w == folds_per_window.end() || w->second != kFoldCount) break;
    ++n;
  }
  return n;
}

AggregatedEmbedding EmbeddingStore::aggregate(const RecordingKey& key, int n_seq) const {
  const auto it = by_recording_.find(key);
  if (it == by_recording_.end())
    fail(ErrorCode::MissingWindow, "no embeddings for " + describe(key));
  return gazefuse::aggregate(it->second, n_seq);
}

}  // namespace gazefuse
