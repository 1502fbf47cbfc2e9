#pragma once

// Batch pipeline: stage functions over files, the all-in-one run, and the formats that
// connect stages (offsets.csv, scores.csv, fused.csv + .meta.json, report.json, table.csv).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/embed.hpp"
#include "gazefuse/fusion.hpp"
#include "gazefuse/ingest.hpp"
#include "gazefuse/offset.hpp"
#include "gazefuse/preprocess.hpp"
#include "gazefuse/protocol.hpp"
#include "gazefuse/synth.hpp"

namespace gazefuse {

std::string_view tool_version();

struct RunConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> embeddings;  // defaults to the manifest's entry
  std::filesystem::path out_dir = "gazefuse-out";
  std::vector<Task> tasks{Task::RAN, Task::TEX};
  std::vector<int> n_seq{kNSeqGrid.begin(), kNSeqGrid.end()};
  std::vector<Method> methods{Method::Baseline, Method::Weighted, Method::Tree, Method::CrossTask,
                              Method::Triple};
  // Kinds for the two-score tree method; cross-task and triple always use a random forest.
  std::vector<ModelKind> tree_kinds{ModelKind::RandomForest, ModelKind::ExtraTrees,
                                    ModelKind::GradientBoosting};
  int round = 1;
  IdtParams idt{};
  bool offset_per_window = false;  // offsets from the first n_seq windows instead of the whole recording
  AlphaGrid alpha{};
  double far_target = 1e-4;
  int k = 4;
  std::uint64_t seed = 7;
  int search_candidates = 4;
  int inner_folds = 3;
  int threads = 1;     // does not affect results
  bool force = false;  // ignore cached stage outputs
};

// Canonical JSON of every field.
std::string config_to_json(const RunConfig& config);
// Fields present in `text` override `base`; unknown keys throw InvalidConfig.
RunConfig config_from_json(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void validate(const RunConfig& config);
// FNV-1a over the canonical JSON of the result-affecting fields, 16 hex digits.
std::string config_hash(const RunConfig& config);
std::string content_hash(std::string_view bytes);

// ---- offsets.csv ----
struct OffsetRow {
  RecordingKey key;
  int windows = 0;  // 0: whole recording
  OffsetFeatureVector features;
};
using OffsetTable = std::map<std::pair<RecordingKey, int>, OffsetFeatureVector>;

// Offset features of every RAN recording in the manifest (whole recording, plus one row
// per entry of `window_counts`).
std::vector<OffsetRow> compute_offsets(const Manifest& manifest, const IdtParams& idt,
                                       std::span<const int> window_counts = {}, int threads = 1);
void write_offsets(const std::filesystem::path& path, std::span<const OffsetRow> rows);
std::vector<OffsetRow> read_offsets(const std::filesystem::path& path);
OffsetTable index_offsets(std::span<const OffsetRow> rows);

// ---- scores.csv ----
struct ScoreRow {
  ScoreVector v;
  int n_seq = 1;
};

// All session-2 x session-1 pairs of each task present in the store. The spatial score
// compares the RAN offset features of the two subjects (same round and sessions);
// `offset_windows` selects the offset row (0: whole recording).
std::vector<ScoreRow> score_pairs(const EmbeddingStore& store, const OffsetTable* offsets, int n_seq,
                                  int round, std::span<const Task> tasks, int offset_windows = 0,
                                  int threads = 1);
// Scores an explicit pair list.
std::vector<ScoreRow> score_pair_list(const EmbeddingStore& store, const OffsetTable* offsets,
                                      std::span<const PairEntry> pairs, int n_seq, int offset_windows = 0,
                                      int threads = 1);
// pairs.csv: task,enroll_subject,enroll_round,enroll_session,auth_subject,auth_round,auth_session
void write_pairs(const std::filesystem::path& path, std::span<const PairEntry> pairs);
std::vector<PairEntry> read_pairs(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, std::span<const ScoreRow> rows);
std::vector<ScoreRow> read_scores(const std::filesystem::path& path);

// ---- fused.csv + fused.csv.meta.json ----
// One fusion run per task; cross-task and triple run on the joined TEX pairs only.
std::vector<FusionRun> fuse_scores(std::span<const ScoreVector> scores, Method method,
                                   const CvOptions& options, std::optional<Task> task = std::nullopt);
void write_fused(const std::filesystem::path& path, std::span<const FusionRun> runs, int n_seq);
struct FusedFile {
  int n_seq = 0;
  std::vector<FusionRun> runs;
};
FusedFile read_fused(const std::filesystem::path& path);

// ---- report.json / table.csv ----
std::vector<EvalReport> evaluate_fused(const FusedFile& fused, double far_target);

struct ReportHeader {
  std::optional<std::string> config_json;
  std::optional<std::string> config_hash;
  std::map<std::string, std::string> inputs;  // name -> content hash
};
std::string reports_to_json(const ReportHeader& header, std::span<const EvalReport> reports);
// Table-1 layout: one row per (task, n_seq), EER and FRR columns per method, 1 decimal.
std::string render_table(std::string_view report_json);

// ---- stages ----
Manifest synth_stage(const SynthConfig& config, const std::filesystem::path& out_dir);
// Velocity windows of every recording: one summary row per window (validity, missing
// share, channel mean/std, peak speed), or with `samples` one row per sample as handed to
// an embedding model (normalized and zero-filled when `normalize` is set). Normalization
// statistics come from the Train-tagged recordings only. Returns the number of windows.
std::size_t preprocess_stage(const std::filesystem::path& manifest, const WindowOptions& options,
                             bool normalize, const std::filesystem::path& out_csv, bool samples = false,
                             int threads = 1);

struct RunSummary {
  std::filesystem::path report;
  std::filesystem::path table;
  std::size_t stages_computed = 0;
  std::size_t stages_cached = 0;
};

// offset -> embed-score -> fuse -> eval -> report under config.out_dir, reusing stage
// outputs whose input hash is unchanged.
RunSummary run_pipeline(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace gazefuse
