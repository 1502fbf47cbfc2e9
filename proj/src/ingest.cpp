#include "gazefuse/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gazefuse/error.hpp"
#include "json.hpp"

namespace gazefuse {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

int parse_int(std::string_view cell, const char* what, std::size_t line_no) {
  cell = trim(cell);
  int value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    fail(ErrorCode::InvalidValue, std::string("bad ") + what + " '" + std::string(cell) +
                                      "' on line " + std::to_string(line_no));
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_number(double value) {
  if (is_missing(value)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

double parse_number(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty() || iequals(cell, "nan")) return kMissing;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    fail(ErrorCode::InvalidValue, "not a number: '" + std::string(cell) + "'");
  return value;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Recordings

GazeRecording parse_recording(std::istream& in, const RecordingKey& key, double rate_hz,
                              ParseSummary* summary) {
  ParseSummary local;
  ParseSummary& sum = summary ? *summary : local;
  sum = ParseSummary{};

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::EmptyRecording, "missing header row");
  const auto header = split_csv_line(line);

  constexpr std::array<std::string_view, 5> kNames{"n", "x", "y", "xT", "yT"};
  std::array<int, 5> column{-1, -1, -1, -1, -1};
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto it = std::find(kNames.begin(), kNames.end(), header[c]);
    if (it != kNames.end())
      column[static_cast<std::size_t>(it - kNames.begin())] = static_cast<int>(c);
    else
      sum.ignored_columns.emplace_back(header[c]);
  }
  for (std::size_t i = 0; i < 3; ++i)
    if (column[i] < 0)
      fail(ErrorCode::MalformedRow, "header lacks required column '" + std::string(kNames[i]) + "'");

  GazeRecording rec;
  rec.key = key;
  rec.rate_hz = rate_hz;

  auto cell = [&](const std::vector<std::string_view>& cells, int idx, std::size_t line_no) {
    if (idx < 0) return kMissing;
    try {
      return parse_number(cells[static_cast<std::size_t>(idx)]);
    } catch (const Error& e) {
      fail(ErrorCode::MalformedRow, std::string(e.what()) + " on line " + std::to_string(line_no));
    }
  };

  std::size_t line_no = 1;
  std::size_t pending_blank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      ++pending_blank;
      continue;
    }
    if (pending_blank > 0)
      fail(ErrorCode::MalformedRow, "blank line inside data before line " + std::to_string(line_no));
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " columns, expected " +
                                        std::to_string(header.size()));
    GazeSample s;
    s.t_ms = cell(cells, column[0], line_no);
    s.gx = cell(cells, column[1], line_no);
    s.gy = cell(cells, column[2], line_no);
    s.tx = cell(cells, column[3], line_no);
    s.ty = cell(cells, column[4], line_no);
    if (is_missing(s.t_ms))
      fail(ErrorCode::MalformedRow, "missing timestamp on line " + std::to_string(line_no));
    if (!rec.samples.empty() && s.t_ms <= rec.samples.back().t_ms)
      fail(ErrorCode::NonMonotonicTime, "time does not increase on line " + std::to_string(line_no));
    if (!s.has_gaze()) ++sum.missing_gaze_rows;
    rec.samples.push_back(s);
  }
  sum.rows = rec.samples.size();
  sum.blank_lines = pending_blank;

  if (rec.samples.empty()) fail(ErrorCode::EmptyRecording, "no data rows for " + describe(key));
  validate(rec);
  return rec;
}

GazeRecording parse_recording(const std::filesystem::path& path, const RecordingKey& key,
                              double rate_hz, ParseSummary* summary) {
  auto in = open_input(path);
  try {
    return parse_recording(in, key, rate_hz, summary);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_recording(std::ostream& out, const GazeRecording& recording) {
  out << "n,x,y,xT,yT\n";
  for (const auto& s : recording.samples) {
    out << format_number(s.t_ms) << ',' << format_number(s.gx) << ',' << format_number(s.gy) << ','
        << format_number(s.tx) << ',' << format_number(s.ty) << '\n';
  }
}

void write_recording(const std::filesystem::path& path, const GazeRecording& recording) {
  auto out = open_output(path);
  write_recording(out, recording);
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Embeddings

std::vector<EmbeddingRecord> parse_embeddings(std::istream& in, ParseSummary* summary) {
  ParseSummary local;
  ParseSummary& sum = summary ? *summary : local;
  sum = ParseSummary{};

  constexpr std::size_t kKeyColumns = 6;
  constexpr std::size_t kColumns = kKeyColumns + kEmbeddingDim;

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedRow, "missing embedding header");
  const auto header = split_csv_line(line);
  constexpr std::array<std::string_view, kKeyColumns> kKeys{"subject", "round", "session",
                                                            "task",    "window", "fold"};
  for (std::size_t c = 0; c < kKeyColumns; ++c)
    if (c >= header.size() || header[c] != kKeys[c])
      fail(ErrorCode::MalformedRow, "embedding header must start with subject,round,session,task,window,fold");
  if (header.size() != kColumns)
    fail(ErrorCode::DimensionMismatch, "embedding header declares " +
                                           std::to_string(header.size() - kKeyColumns) +
                                           " dimensions, expected 128");

  std::vector<EmbeddingRecord> records;
  std::set<std::pair<WindowKey, int>> seen;
  std::size_t line_no = 1;
  std::size_t pending_blank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      ++pending_blank;
      continue;
    }
    if (pending_blank > 0)
      fail(ErrorCode::MalformedRow, "blank line inside data before line " + std::to_string(line_no));
    const auto cells = split_csv_line(line);
    if (cells.size() != kColumns)
      fail(ErrorCode::DimensionMismatch, "line " + std::to_string(line_no) + " carries " +
                                             std::to_string(cells.size() < kKeyColumns
                                                                ? 0
                                                                : cells.size() - kKeyColumns) +
                                             " values, expected 128");
    EmbeddingRecord rec;
    rec.window.recording.subject_id = std::string(cells[0]);
    rec.window.recording.round = parse_int(cells[1], "round", line_no);
    rec.window.recording.session = parse_int(cells[2], "session", line_no);
    rec.window.recording.task = parse_task(cells[3]);
    rec.window.window_index = parse_int(cells[4], "window", line_no);
    rec.fold_id = parse_int(cells[5], "fold", line_no);
    validate(rec.window.recording);
    if (rec.window.window_index < 0)
      fail(ErrorCode::InvalidValue, "negative window index on line " + std::to_string(line_no));
    if (rec.fold_id < 0 || rec.fold_id >= kFoldCount)
      fail(ErrorCode::InvalidValue, "fold must lie in [0,3] on line " + std::to_string(line_no));
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
      const double v = parse_number(cells[kKeyColumns + d]);
      if (!std::isfinite(v))
        fail(ErrorCode::InvalidValue, "non-finite embedding value on line " + std::to_string(line_no));
      rec.vector[d] = v;
    }
    if (!seen.emplace(rec.window, rec.fold_id).second)
      fail(ErrorCode::DuplicateKey, "duplicate window/fold " + describe(rec.window.recording) +
                                        " window " + std::to_string(rec.window.window_index) +
                                        " fold " + std::to_string(rec.fold_id) + " on line " +
                                        std::to_string(line_no));
    records.push_back(rec);
  }
  sum.rows = records.size();
  sum.blank_lines = pending_blank;
  return records;
}

std::vector<EmbeddingRecord> parse_embeddings(const std::filesystem::path& path,
                                              ParseSummary* summary) {
  auto in = open_input(path);
  try {
    return parse_embeddings(in, summary);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_embeddings(std::ostream& out, std::span<const EmbeddingRecord> records) {
  out << "subject,round,session,task,window,fold";
  for (std::size_t d = 0; d < kEmbeddingDim; ++d) out << ",e" << d;
  out << '\n';
  for (const auto& r : records) {
    const auto& k = r.window.recording;
    out << k.subject_id << ',' << k.round << ',' << k.session << ',' << to_string(k.task) << ','
        << r.window.window_index << ',' << r.fold_id;
    for (double v : r.vector) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records) {
  auto out = open_output(path);
  write_embeddings(out, records);
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Manifest

std::string_view to_string(DataSplit split) {
  switch (split) {
    case DataSplit::Unassigned: return "unassigned";
    case DataSplit::Train: return "train";
    case DataSplit::Validation: return "validation";
    case DataSplit::Test: return "test";
  }
  return "unassigned";
}

DataSplit parse_split(std::string_view text) {
  if (text == "unassigned") return DataSplit::Unassigned;
  if (text == "train") return DataSplit::Train;
  if (text == "validation") return DataSplit::Validation;
  if (text == "test") return DataSplit::Test;
  fail(ErrorCode::InvalidConfig, "unknown split '" + std::string(text) + "'");
}

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

const ManifestEntry* Manifest::find(const RecordingKey& key) const {
  for (const auto& e : recordings)
    if (e.key == key) return &e;
  return nullptr;
}

Manifest load_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Manifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& r : doc.at("recordings")) {
      ManifestEntry e;
      e.key.subject_id = r.at("subject").get<std::string>();
      e.key.round = r.value("round", 1);
      e.key.session = r.at("session").get<int>();
      e.key.task = parse_task(r.at("task").get<std::string>());
      e.path = r.at("path").get<std::string>();
      e.rate_hz = r.at("rate_hz").get<double>();
      e.split = parse_split(r.value("split", std::string("unassigned")));
      validate(e.key);
      if (m.find(e.key)) fail(ErrorCode::DuplicateKey, "manifest lists " + describe(e.key) + " twice");
      m.recordings.push_back(std::move(e));
    }
    if (doc.contains("embeddings") && !doc["embeddings"].is_null())
      m.embeddings = doc["embeddings"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  nlohmann::json doc;
  doc["schema"] = "gazefuse.manifest/1";
  auto& recs = doc["recordings"] = nlohmann::json::array();
  for (const auto& e : manifest.recordings) {
    recs.push_back({{"subject", e.key.subject_id},
                    {"round", e.key.round},
                    {"session", e.key.session},
                    {"task", std::string(to_string(e.key.task))},
                    {"path", e.path.generic_string()},
                    {"rate_hz", e.rate_hz},
                    {"split", std::string(to_string(e.split))}});
  }
  if (manifest.embeddings) doc["embeddings"] = manifest.embeddings->generic_string();
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace gazefuse
