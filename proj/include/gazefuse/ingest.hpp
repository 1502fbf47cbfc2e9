#pragma once

// CSV/JSON readers and writers for recordings, embeddings and manifests.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gazefuse/types.hpp"

namespace gazefuse {

inline constexpr std::size_t kEmbeddingDim = 128;
inline constexpr int kFoldCount = 4;

using Embedding = std::array<double, kEmbeddingDim>;

struct EmbeddingRecord {
  WindowKey window;
  int fold_id = 0;
  Embedding vector{};
};

// Row accounting for a parse; nothing is dropped without being counted here.
struct ParseSummary {
  std::size_t rows = 0;
  std::size_t missing_gaze_rows = 0;
  std::size_t blank_lines = 0;
  std::vector<std::string> ignored_columns;
};

// Numbers are written with 9 significant digits; missing values as "NaN".
std::string format_number(double value);

// Accepts decimal and scientific notation. Empty cells and "NaN" (any case) are missing.
// Throws InvalidValue on anything else.
double parse_number(std::string_view cell);

// Recording CSV with header `n,x,y,xT,yT` (n in ms, positions in dva). Columns are
// resolved by name; unknown columns are ignored. xT/yT may be absent (TEX).
GazeRecording parse_recording(std::istream& in, const RecordingKey& key, double rate_hz,
                              ParseSummary* summary = nullptr);
GazeRecording parse_recording(const std::filesystem::path& path, const RecordingKey& key,
                              double rate_hz, ParseSummary* summary = nullptr);
void write_recording(std::ostream& out, const GazeRecording& recording);
void write_recording(const std::filesystem::path& path, const GazeRecording& recording);

// Embedding CSV with header `subject,round,session,task,window,fold,e0..e127`.
std::vector<EmbeddingRecord> parse_embeddings(std::istream& in, ParseSummary* summary = nullptr);
std::vector<EmbeddingRecord> parse_embeddings(const std::filesystem::path& path,
                                              ParseSummary* summary = nullptr);
void write_embeddings(std::ostream& out, std::span<const EmbeddingRecord> records);
void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records);

enum class DataSplit { Unassigned, Train, Validation, Test };

std::string_view to_string(DataSplit split);
DataSplit parse_split(std::string_view text);

struct ManifestEntry {
  RecordingKey key;
  std::filesystem::path path;  // relative entries resolve against the manifest directory
  double rate_hz = 1000.0;
  DataSplit split = DataSplit::Unassigned;
};

struct Manifest {
  std::vector<ManifestEntry> recordings;
  std::optional<std::filesystem::path> embeddings;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  const ManifestEntry* find(const RecordingKey& key) const;
};

// Throws Io when the file is unreadable, InvalidConfig on schema errors.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Splits one CSV line on commas, trimming surrounding whitespace and a trailing CR.
std::vector<std::string_view> split_csv_line(std::string_view line);

// Reads an entire file; throws Io.
std::string read_file(const std::filesystem::path& path);

}  // namespace gazefuse
