#include "gazefuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "gazefuse/error.hpp"
#include "gazefuse/parallel.hpp"

namespace gazefuse {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view tool_version() { return GAZEFUSE_VERSION; }

// ---------------------------------------------------------------- config

namespace {

ordered_json hashed_config(const RunConfig& c) {
  ordered_json j;
  j["manifest"] = c.manifest.generic_string();
  j["embeddings"] = c.embeddings ? json(c.embeddings->generic_string()) : json(nullptr);
  j["tasks"] = json::array();
  for (auto t : c.tasks) j["tasks"].push_back(std::string(to_string(t)));
  j["n_seq"] = c.n_seq;
  j["methods"] = json::array();
  for (auto m : c.methods) j["methods"].push_back(std::string(to_string(m)));
  j["tree_kinds"] = json::array();
  for (auto k : c.tree_kinds) j["tree_kinds"].push_back(std::string(to_string(k)));
  j["round"] = c.round;
  j["idt"] = {{"dispersion_threshold", c.idt.dispersion_threshold}, {"min_duration_ms", c.idt.min_duration_ms}};
  j["offset_per_window"] = c.offset_per_window;
  j["alpha"] = {{"lo_percent", c.alpha.lo_percent}, {"hi_percent", c.alpha.hi_percent},
                {"step_percent", c.alpha.step_percent}};
  j["far_target"] = c.far_target;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["search_candidates"] = c.search_candidates;
  j["inner_folds"] = c.inner_folds;
  return j;
}

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string config_to_json(const RunConfig& config) {
  ordered_json j = hashed_config(config);
  j["out_dir"] = config.out_dir.generic_string();
  j["threads"] = config.threads;
  return j.dump(2);
}

RunConfig config_from_json(std::string_view text, RunConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    const char* k = key.c_str();
    if (key == "manifest") c.manifest = get_as<std::string>(v, k);
    else if (key == "embeddings") c.embeddings = v.is_null() ? std::nullopt : std::optional<fs::path>(get_as<std::string>(v, k));
    else if (key == "out_dir") c.out_dir = get_as<std::string>(v, k);
    else if (key == "tasks") {
      c.tasks.clear();
      for (const auto& t : get_as<std::vector<std::string>>(v, k)) {
        try {
          c.tasks.push_back(parse_task(t));
        } catch (const Error& e) {
          fail(ErrorCode::InvalidConfig, e.what());
        }
      }
    } else if (key == "n_seq") c.n_seq = get_as<std::vector<int>>(v, k);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& m : get_as<std::vector<std::string>>(v, k)) c.methods.push_back(parse_method(m));
    } else if (key == "tree_kinds") {
      c.tree_kinds.clear();
      for (const auto& m : get_as<std::vector<std::string>>(v, k)) c.tree_kinds.push_back(parse_model_kind(m));
    } else if (key == "round") c.round = get_as<int>(v, k);
    else if (key == "idt") {
      for (const auto& [ik, iv] : v.items()) {
        if (ik == "dispersion_threshold") c.idt.dispersion_threshold = get_as<double>(iv, k);
        else if (ik == "min_duration_ms") c.idt.min_duration_ms = get_as<double>(iv, k);
        else fail(ErrorCode::InvalidConfig, "unknown idt field '" + ik + "'");
      }
    } else if (key == "offset_per_window") c.offset_per_window = get_as<bool>(v, k);
    else if (key == "alpha") {
      for (const auto& [ak, av] : v.items()) {
        if (ak == "lo_percent") c.alpha.lo_percent = get_as<int>(av, k);
        else if (ak == "hi_percent") c.alpha.hi_percent = get_as<int>(av, k);
        else if (ak == "step_percent") c.alpha.step_percent = get_as<int>(av, k);
        else fail(ErrorCode::InvalidConfig, "unknown alpha field '" + ak + "'");
      }
    } else if (key == "far_target") c.far_target = get_as<double>(v, k);
    else if (key == "k") c.k = get_as<int>(v, k);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, k);
    else if (key == "search_candidates") c.search_candidates = get_as<int>(v, k);
    else if (key == "inner_folds") c.inner_folds = get_as<int>(v, k);
    else if (key == "threads") c.threads = get_as<int>(v, k);
    else fail(ErrorCode::InvalidConfig, "unknown config field '" + key + "'");
  }
  return c;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
  return config_from_json(read_file(path), std::move(base));
}

void validate(const RunConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidConfig, what); };
  if (c.manifest.empty()) bad("no manifest given");
  if (c.tasks.empty()) bad("no tasks selected");
  if (c.n_seq.empty()) bad("empty n_seq grid");
  for (int n : c.n_seq)
    if (n < 1) bad("n_seq values must be >= 1");
  if (c.methods.empty()) bad("no fusion methods selected");
  if (c.tree_kinds.empty()) bad("no tree kinds selected");
  if (c.round < 1) bad("round must be >= 1");
  if (!(c.idt.dispersion_threshold > 0.0) || !(c.idt.min_duration_ms >= 0.0)) bad("invalid IDT parameters");
  c.alpha.values();
  if (!(c.far_target > 0.0 && c.far_target <= 1.0)) bad("far_target must lie in (0, 1]");
  if (c.k < 2) bad("k must be >= 2");
  if (c.search_candidates < 0) bad("search_candidates must be >= 0");
  if (c.inner_folds < 2) bad("inner_folds must be >= 2");
  if (c.threads < 1) bad("threads must be >= 1");
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& config) { return content_hash(hashed_config(config).dump()); }

// ---------------------------------------------------------------- csv helpers

namespace {

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out << text;
    if (!out) fail(ErrorCode::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path, std::span<const std::string_view> expected_header) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    for (auto c : split_csv_line(line)) cells.emplace_back(c);
    if (!have_header) {
      t.header = cells;
      have_header = true;
      if (!std::equal(t.header.begin(), t.header.end(), expected_header.begin(), expected_header.end()))
        fail(ErrorCode::MalformedRow, path.string() + ": unexpected header");
      continue;
    }
    if (cells.size() != t.header.size())
      fail(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(t.header.size()) + " cells, got " +
                                        std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) fail(ErrorCode::MalformedRow, path.string() + ": missing header");
  return t;
}

int parse_int(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidValue, path.string() + ": not an integer: '" + s + "'");
  }
}

double parse_real(const std::string& s, const fs::path& path) {
  const double v = parse_number(s);
  if (!std::isfinite(v)) fail(ErrorCode::InvalidValue, path.string() + ": not a finite number: '" + s + "'");
  return v;
}

std::optional<double> parse_optional(const std::string& s, const fs::path& path) {
  if (s.empty()) return std::nullopt;
  return parse_real(s, path);
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

void append_key(std::string& out, const RecordingKey& k) {
  out += k.subject_id;
  out += ',' + std::to_string(k.round) + ',' + std::to_string(k.session);
}

RecordingKey read_key(const std::vector<std::string>& row, std::size_t at, Task task, const fs::path& path) {
  RecordingKey k{row[at], parse_int(row[at + 1], path), parse_int(row[at + 2], path), task};
  validate(k);
  return k;
}

}  // namespace

// ---------------------------------------------------------------- offsets

std::vector<OffsetRow> compute_offsets(const Manifest& manifest, const IdtParams& idt,
                                       std::span<const int> window_counts, int threads) {
  std::vector<const ManifestEntry*> ran;
  for (const auto& e : manifest.recordings)
    if (e.key.task == Task::RAN) ran.push_back(&e);
  std::vector<int> scopes{0};
  for (int w : window_counts)
    if (w > 0 && std::find(scopes.begin(), scopes.end(), w) == scopes.end()) scopes.push_back(w);

  std::vector<std::vector<OffsetRow>> slots(ran.size());
  parallel_for(ran.size(), threads, [&](std::size_t i) {
    const auto& e = *ran[i];
    const auto rec = parse_recording(manifest.resolve(e.path), e.key, e.rate_hz);
    for (int w : scopes) {
      OffsetOptions opts{idt, std::nullopt};
      if (w > 0) opts.first_windows = static_cast<std::size_t>(w);
      slots[i].push_back({e.key, w, compute_offset_features(rec, opts)});
    }
  });
  std::vector<OffsetRow> out;
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  std::sort(out.begin(), out.end(),
            [](const OffsetRow& a, const OffsetRow& b) { return std::tie(a.key, a.windows) < std::tie(b.key, b.windows); });
  return out;
}

namespace {
constexpr std::string_view kOffsetHeader[] = {"subject", "round", "session", "task", "windows", "mean",
                                               "median",  "std",   "min",     "max",  "iqr"};
}

void write_offsets(const fs::path& path, std::span<const OffsetRow> rows) {
  std::string out;
  for (std::size_t i = 0; i < std::size(kOffsetHeader); ++i) out += (i ? "," : "") + std::string(kOffsetHeader[i]);
  out += '\n';
  for (const auto& r : rows) {
    out += r.key.subject_id + ',' + std::to_string(r.key.round) + ',' + std::to_string(r.key.session) + ',' +
           std::string(to_string(r.key.task)) + ',' + std::to_string(r.windows);
    for (double v : r.features.values()) out += ',' + format_number(v);
    out += '\n';
  }
  write_atomic(path, out);
}

std::vector<OffsetRow> read_offsets(const fs::path& path) {
  const auto t = read_csv(path, kOffsetHeader);
  std::vector<OffsetRow> rows;
  for (const auto& c : t.rows) {
    OffsetRow r;
    r.key = {c[0], parse_int(c[1], path), parse_int(c[2], path), parse_task(c[3])};
    validate(r.key);
    r.windows = parse_int(c[4], path);
    r.features = {parse_real(c[5], path), parse_real(c[6], path), parse_real(c[7], path),
                  parse_real(c[8], path), parse_real(c[9], path), parse_real(c[10], path)};
    rows.push_back(r);
  }
  return rows;
}

OffsetTable index_offsets(std::span<const OffsetRow> rows) {
  OffsetTable t;
  for (const auto& r : rows)
    if (!t.emplace(std::make_pair(r.key, r.windows), r.features).second)
      fail(ErrorCode::DuplicateKey, "offset row listed twice: " + describe(r.key));
  return t;
}

// ---------------------------------------------------------------- scores

std::vector<ScoreRow> score_pairs(const EmbeddingStore& store, const OffsetTable* offsets, int n_seq, int round,
                                  std::span<const Task> tasks, int offset_windows, int threads) {
  std::vector<RecordingKey> keys;
  for (const auto& k : store.recordings())
    if (k.round == round && std::find(tasks.begin(), tasks.end(), k.task) != tasks.end()) keys.push_back(k);
  return score_pair_list(store, offsets, form_pairs(keys, round), n_seq, offset_windows, threads);
}

std::vector<ScoreRow> score_pair_list(const EmbeddingStore& store, const OffsetTable* offsets,
                                      std::span<const PairEntry> pairs, int n_seq, int offset_windows,
                                      int threads) {
  std::set<RecordingKey> needed;
  for (const auto& p : pairs) {
    needed.insert(p.enroll);
    needed.insert(p.auth);
  }
  const std::vector<RecordingKey> keys(needed.begin(), needed.end());
  std::vector<AggregatedEmbedding> agg(keys.size());
  parallel_for(keys.size(), threads, [&](std::size_t i) { agg[i] = store.aggregate(keys[i], n_seq); });
  std::map<RecordingKey, const AggregatedEmbedding*> by_key;
  for (std::size_t i = 0; i < keys.size(); ++i) by_key[keys[i]] = &agg[i];

  auto spatial_features = [&](const RecordingKey& k) -> const OffsetFeatureVector* {
    if (!offsets) return nullptr;
    const auto it = offsets->find({with_task(k, Task::RAN), offset_windows});
    return it == offsets->end() ? nullptr : &it->second;
  };

  std::vector<ScoreRow> rows(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const auto& p = pairs[i];
    ScoreRow& r = rows[i];
    r.n_seq = n_seq;
    r.v.enroll = p.enroll;
    r.v.auth = p.auth;
    r.v.label = p.label;
    const double s = embed_similarity(*by_key.at(p.enroll), *by_key.at(p.auth));
    (p.enroll.task == Task::RAN ? r.v.s_ekyt_ran : r.v.s_ekyt_tex) = s;
    const auto* fa = spatial_features(p.enroll);
    const auto* fb = spatial_features(p.auth);
    if (fa && fb) r.v.s_spatial = offset_similarity(*fa, *fb);
  });
  return rows;
}

namespace {
constexpr std::string_view kScoreHeader[] = {"task",         "enroll_subject", "enroll_round", "enroll_session",
                                              "auth_subject", "auth_round",     "auth_session", "label",
                                              "n_seq",        "s_ekyt_ran",     "s_ekyt_tex",   "s_spatial"};
constexpr std::string_view kFusedHeader[] = {"task",         "enroll_subject", "enroll_round", "enroll_session",
                                              "auth_subject", "auth_round",     "auth_session", "label",
                                              "fold",         "score"};

std::string header_line(std::span<const std::string_view> cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + std::string(cols[i]);
  return out + '\n';
}

void append_pair(std::string& out, const RecordingKey& e, const RecordingKey& a, PairLabel label) {
  out += std::string(to_string(e.task)) + ',';
  append_key(out, e);
  out += ',';
  append_key(out, a);
  out += ',' + std::string(to_string(label));
}

PairLabel parse_label(const std::string& s, const fs::path& path) {
  if (s == to_string(PairLabel::Genuine)) return PairLabel::Genuine;
  if (s == to_string(PairLabel::Impostor)) return PairLabel::Impostor;
  fail(ErrorCode::InvalidValue, path.string() + ": unknown label '" + s + "'");
}

constexpr std::string_view kPairHeader[] = {"task",         "enroll_subject", "enroll_round", "enroll_session",
                                             "auth_subject", "auth_round",     "auth_session"};

}  // namespace

void write_pairs(const fs::path& path, std::span<const PairEntry> pairs) {
  std::string out = header_line(kPairHeader);
  for (const auto& p : pairs) {
    out += std::string(to_string(p.enroll.task)) + ',';
    append_key(out, p.enroll);
    out += ',';
    append_key(out, p.auth);
    out += '\n';
  }
  write_atomic(path, out);
}

std::vector<PairEntry> read_pairs(const fs::path& path) {
  const auto t = read_csv(path, kPairHeader);
  std::vector<PairEntry> pairs;
  for (const auto& c : t.rows) {
    const Task task = parse_task(c[0]);
    PairEntry p{read_key(c, 1, task, path), read_key(c, 4, task, path), PairLabel::Impostor};
    p.label = label_for(p.enroll, p.auth);
    pairs.push_back(p);
  }
  return pairs;
}

void write_scores(const fs::path& path, std::span<const ScoreRow> rows) {
  std::string out = header_line(kScoreHeader);
  for (const auto& r : rows) {
    append_pair(out, r.v.enroll, r.v.auth, r.v.label);
    out += ',' + std::to_string(r.n_seq) + ',' + optional_cell(r.v.s_ekyt_ran) + ',' + optional_cell(r.v.s_ekyt_tex) +
           ',' + optional_cell(r.v.s_spatial) + '\n';
  }
  write_atomic(path, out);
}

std::vector<ScoreRow> read_scores(const fs::path& path) {
  const auto t = read_csv(path, kScoreHeader);
  std::vector<ScoreRow> rows;
  for (const auto& c : t.rows) {
    ScoreRow r;
    const Task task = parse_task(c[0]);
    r.v.enroll = read_key(c, 1, task, path);
    r.v.auth = read_key(c, 4, task, path);
    r.v.label = parse_label(c[7], path);
    r.n_seq = parse_int(c[8], path);
    r.v.s_ekyt_ran = parse_optional(c[9], path);
    r.v.s_ekyt_tex = parse_optional(c[10], path);
    r.v.s_spatial = parse_optional(c[11], path);
    validate(r.v);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------- fused

std::vector<FusionRun> fuse_scores(std::span<const ScoreVector> scores, Method method, const CvOptions& options,
                                   std::optional<Task> task) {
  auto of_task = [&](Task t) {
    std::vector<ScoreVector> out;
    for (const auto& v : scores)
      if (v.task() == t) out.push_back(v);
    return out;
  };
  std::vector<FusionRun> runs;
  if (method == Method::CrossTask || method == Method::Triple) {
    if (task && *task != Task::TEX)
      fail(ErrorCode::InvalidConfig, "cross-task and triple fusion score TEX pairs only");
    const auto tex = of_task(Task::TEX);
    const auto ran = of_task(Task::RAN);
    const auto joined = cross_task_scores(tex, ran, method == Method::Triple);
    if (joined.empty()) fail(ErrorCode::MissingTask, "no TEX pairs with RAN counterparts");
    runs.push_back(fuse_pairs(joined, method, options));
    return runs;
  }
  for (Task t : {Task::RAN, Task::TEX}) {
    if (task && *task != t) continue;
    const auto subset = of_task(t);
    if (subset.empty()) {
      if (task) fail(ErrorCode::MissingTask, "no " + std::string(to_string(t)) + " pairs");
      continue;
    }
    runs.push_back(fuse_pairs(subset, method, options));
  }
  if (runs.empty()) fail(ErrorCode::MissingTask, "no pairs to fuse");
  return runs;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double null_or_number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json candidate_json(const Candidate& c) {
  return {{"n_trees", c.n_trees}, {"max_depth", c.max_depth}, {"min_leaf", c.min_leaf},
          {"learning_rate", c.learning_rate}};
}
Candidate candidate_from(const json& j) {
  return {j.at("n_trees").get<int>(), j.at("max_depth").get<int>(), j.at("min_leaf").get<int>(),
          j.at("learning_rate").get<double>()};
}

json curve_json(const std::vector<AlphaPoint>& curve) {
  json a = json::array();
  for (const auto& p : curve) a.push_back({p.alpha, p.eer_percent});
  return a;
}

}  // namespace

void write_fused(const fs::path& path, std::span<const FusionRun> runs, int n_seq) {
  std::string out = header_line(kFusedHeader);
  ordered_json meta;
  meta["schema"] = "gazefuse.fused/1";
  meta["n_seq"] = n_seq;
  meta["runs"] = json::array();
  std::set<Task> seen;
  for (const auto& run : runs) {
    if (!run.task) fail(ErrorCode::InvalidValue, "fusion run without pairs");
    if (!seen.insert(*run.task).second) fail(ErrorCode::DuplicateKey, "two fusion runs for one task");
    for (const auto& s : run.scores) {
      append_pair(out, s.enroll, s.auth, s.label);
      out += ',' + std::to_string(s.fold) + ',' + format_number(s.score) + '\n';
    }
    ordered_json r;
    r["task"] = std::string(to_string(*run.task));
    r["method"] = std::string(to_string(run.method));
    r["kind"] = run.kind ? json(std::string(to_string(*run.kind))) : json(nullptr);
    r["recipe"] = run.recipe;
    r["k"] = run.k;
    r["seed"] = run.seed;
    r["alpha"] = run.alpha ? json(*run.alpha) : json(nullptr);
    r["alpha_curve"] = curve_json(run.alpha_curve);
    r["folds"] = json::array();
    for (const auto& f : run.folds)
      r["folds"].push_back(ordered_json{{"fold", f.fold},
                                        {"n_train", f.n_train},
                                        {"leaked_subjects", f.leaked_subjects},
                                        {"params", f.params ? candidate_json(*f.params) : json(nullptr)},
                                        {"inner_cv_eer", number_or_null(f.inner_cv_eer)}});
    r["warnings"] = run.warnings;
    meta["runs"].push_back(r);
  }
  write_atomic(path, out);
  write_atomic(path.string() + ".meta.json", meta.dump(2) + "\n");
}

FusedFile read_fused(const fs::path& path) {
  const fs::path meta_path = path.string() + ".meta.json";
  FusedFile file;
  std::map<Task, std::size_t> run_of_task;
  try {
    const json meta = json::parse(read_file(meta_path));
    if (meta.at("schema") != "gazefuse.fused/1") fail(ErrorCode::InvalidConfig, meta_path.string() + ": unknown schema");
    file.n_seq = meta.at("n_seq").get<int>();
    for (const auto& r : meta.at("runs")) {
      FusionRun run;
      run.task = parse_task(r.at("task").get<std::string>());
      run.method = parse_method(r.at("method").get<std::string>());
      if (!r.at("kind").is_null()) run.kind = parse_model_kind(r.at("kind").get<std::string>());
      run.recipe = r.at("recipe").get<std::string>();
      run.k = r.at("k").get<int>();
      run.seed = r.at("seed").get<std::uint64_t>();
      if (!r.at("alpha").is_null()) run.alpha = r.at("alpha").get<double>();
      for (const auto& p : r.at("alpha_curve")) run.alpha_curve.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      for (const auto& f : r.at("folds")) {
        FoldInfo info;
        info.fold = f.at("fold").get<int>();
        info.n_train = f.at("n_train").get<std::size_t>();
        info.leaked_subjects = f.at("leaked_subjects").get<std::size_t>();
        if (!f.at("params").is_null()) info.params = candidate_from(f.at("params"));
        info.inner_cv_eer = null_or_number(f.at("inner_cv_eer"));
        run.folds.push_back(info);
      }
      run.warnings = r.at("warnings").get<std::vector<std::string>>();
      run_of_task[*run.task] = file.runs.size();
      file.runs.push_back(std::move(run));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, meta_path.string() + ": " + e.what());
  }

  const auto t = read_csv(path, kFusedHeader);
  for (const auto& c : t.rows) {
    const Task task = parse_task(c[0]);
    const auto it = run_of_task.find(task);
    if (it == run_of_task.end())
      fail(ErrorCode::InvalidValue, path.string() + ": rows for a task absent from the metadata");
    FusedScore s;
    s.enroll = read_key(c, 1, task, path);
    s.auth = read_key(c, 4, task, path);
    s.label = parse_label(c[7], path);
    if (s.label != label_for(s.enroll, s.auth)) fail(ErrorCode::InvalidValue, path.string() + ": label mismatch");
    s.fold = parse_int(c[8], path);
    s.score = parse_real(c[9], path);
    file.runs[it->second].scores.push_back(s);
  }
  return file;
}

// ---------------------------------------------------------------- reports

std::vector<EvalReport> evaluate_fused(const FusedFile& fused, double far_target) {
  std::vector<EvalReport> out;
  for (const auto& run : fused.runs) {
    auto r = evaluate(run, far_target);
    r.n_seq = fused.n_seq;
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  j["task"] = r.task;
  j["n_seq"] = r.n_seq;
  j["method"] = r.method;
  j["kind"] = r.kind.empty() ? json(nullptr) : json(r.kind);
  j["recipe"] = r.recipe;
  j["scope"] = r.scope;
  j["seed"] = r.seed;
  j["k"] = r.k;
  j["far_target"] = r.far_target;
  j["n_pairs"] = r.n_pairs;
  j["n_genuine"] = r.n_genuine;
  j["n_impostor"] = r.n_impostor;
  j["eer_percent"] = r.eer_percent;
  j["frr_percent"] = r.frr_percent;
  j["frr_reliable"] = r.frr_reliable;
  j["cv_mean_eer_percent"] = r.cv_mean_eer_percent ? json(*r.cv_mean_eer_percent) : json(nullptr);
  j["alpha"] = r.alpha ? json(*r.alpha) : json(nullptr);
  j["alpha_curve"] = curve_json(r.alpha_curve);
  j["folds"] = json::array();
  for (const auto& f : r.folds)
    j["folds"].push_back(ordered_json{{"fold", f.fold},
                                      {"n_train", f.n_train},
                                      {"n_genuine", f.n_genuine},
                                      {"n_impostor", f.n_impostor},
                                      {"eer_percent", f.eer_percent},
                                      {"frr_percent", f.frr_percent},
                                      {"frr_reliable", f.frr_reliable},
                                      {"leaked_subjects", f.leaked_subjects},
                                      {"params", f.params ? candidate_json(*f.params) : json(nullptr)},
                                      {"inner_cv_eer", number_or_null(f.inner_cv_eer)}});
  j["roc"] = json::array();
  for (const auto& p : r.roc) j["roc"].push_back({p.threshold, p.far, p.frr});
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace

std::string reports_to_json(const ReportHeader& header, std::span<const EvalReport> reports) {
  ordered_json j;
  j["schema"] = kReportSchema;
  j["tool_version"] = tool_version();
  if (header.config_hash) j["config_hash"] = *header.config_hash;
  if (header.config_json) j["config"] = ordered_json::parse(*header.config_json);
  j["inputs"] = header.inputs;
  j["feature_recipes"] = {{std::string(kTwoScoreRecipe), feature_names(FeatureMode::EkytSpatial)},
                          {std::string(kThreeScoreRecipe), feature_names(FeatureMode::Triple)}};
  j["offset_features"] = std::vector<std::string>(kOffsetFeatureNames.begin(), kOffsetFeatureNames.end());
  j["offset_similarity"] = "1/(1+euclidean)";
  j["embedding_similarity"] = "cosine";
  std::set<std::uint64_t> seeds;
  for (const auto& r : reports) seeds.insert(r.seed);
  j["seeds"] = seeds;
  j["reports"] = json::array();
  for (const auto& r : reports) j["reports"].push_back(report_json(r));
  return j.dump(2) + "\n";
}

std::string render_table(std::string_view report_text) {
  json j;
  try {
    j = json::parse(report_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("report is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != kReportSchema)
    fail(ErrorCode::InvalidConfig, "not a " + std::string(kReportSchema) + " document");

  std::vector<std::string> columns, tasks;
  std::map<std::pair<std::string, int>, std::map<std::string, std::pair<double, double>>> cells;
  try {
    for (const auto& r : j.at("reports")) {
      std::string label = r.at("method").get<std::string>();
      if (!r.at("kind").is_null()) label += ":" + r.at("kind").get<std::string>();
      if (std::find(columns.begin(), columns.end(), label) == columns.end()) columns.push_back(label);
      const auto task = r.at("task").get<std::string>();
      if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) tasks.push_back(task);
      cells[{task, r.at("n_seq").get<int>()}][label] = {r.at("eer_percent").get<double>(),
                                                          r.at("frr_percent").get<double>()};
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed report: ") + e.what());
  }

  std::string out = "task,n_seq";
  for (const auto& c : columns) out += ",eer:" + c;
  for (const auto& c : columns) out += ",frr:" + c;
  out += '\n';
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return std::string(buf);
  };
  for (const auto& task : tasks)
    for (const auto& [key, row] : cells) {
      if (key.first != task) continue;
      out += task + ',' + std::to_string(key.second);
      for (int which = 0; which < 2; ++which)
        for (const auto& c : columns) {
          const auto it = row.find(c);
          out += ',';
          if (it != row.end()) out += fmt(which == 0 ? it->second.first : it->second.second);
        }
      out += '\n';
    }
  return out;
}

// ---------------------------------------------------------------- stages

Manifest synth_stage(const SynthConfig& config, const fs::path& out_dir) {
  return write_corpus(generate_corpus(config), out_dir);
}

std::size_t preprocess_stage(const fs::path& manifest_path, const WindowOptions& options, bool normalize,
                             const fs::path& out_csv, bool samples, int threads) {
  const auto manifest = load_manifest(manifest_path);
  std::vector<std::vector<VelocityWindow>> windows(manifest.recordings.size());
  parallel_for(manifest.recordings.size(), threads, [&](std::size_t i) {
    const auto& e = manifest.recordings[i];
    windows[i] = make_windows(parse_recording(manifest.resolve(e.path), e.key, e.rate_hz), options, e.split);
  });

  std::optional<NormStats> stats;
  if (normalize) {
    std::vector<VelocityWindow> train;
    for (const auto& ws : windows)
      for (const auto& w : ws)
        if (w.split == DataSplit::Train && w.valid) train.push_back(w);
    if (train.empty()) fail(ErrorCode::InvalidConfig, "normalization needs recordings tagged \"train\" in the manifest");
    stats = fit_norm(train);
  }

  std::string out = "subject,round,session,task,split,window,valid,missing_fraction,";
  out += samples ? "sample,vx,vy\n" : "mean_vx,mean_vy,std_vx,std_vy,peak_speed\n";
  std::size_t count = 0;
  for (auto& ws : windows)
    for (auto w : ws) {
      if (stats) w = apply_norm(std::move(w), *stats);
      const auto& k = w.window.recording;
      const std::string prefix = k.subject_id + ',' + std::to_string(k.round) + ',' + std::to_string(k.session) +
                                 ',' + std::string(to_string(k.task)) + ',' + std::string(to_string(w.split)) +
                                 ',' + std::to_string(w.window.window_index) + ',' + (w.valid ? "1" : "0") + ',' +
                                 format_number(w.missing_fraction) + ',';
      ++count;
      if (samples) {
        if (stats) w = zero_fill(std::move(w));
        for (std::size_t s = 0; s < w.vx.size(); ++s)
          out += prefix + std::to_string(s) + ',' + format_number(w.vx[s]) + ',' + format_number(w.vy[s]) + '\n';
        continue;
      }
      double sum[2] = {0, 0}, sq[2] = {0, 0}, peak = 0.0;
      std::size_t n = 0;
      for (std::size_t s = 0; s < w.vx.size(); ++s) {
        if (is_missing(w.vx[s]) || is_missing(w.vy[s])) continue;
        sum[0] += w.vx[s];
        sum[1] += w.vy[s];
        peak = std::max(peak, std::hypot(w.vx[s], w.vy[s]));
        ++n;
      }
      const double mx = n ? sum[0] / n : kMissing, my = n ? sum[1] / n : kMissing;
      for (std::size_t s = 0; s < w.vx.size() && n; ++s) {
        if (is_missing(w.vx[s]) || is_missing(w.vy[s])) continue;
        sq[0] += (w.vx[s] - mx) * (w.vx[s] - mx);
        sq[1] += (w.vy[s] - my) * (w.vy[s] - my);
      }
      out += prefix + format_number(mx) + ',' + format_number(my) + ',' +
             format_number(n ? std::sqrt(sq[0] / n) : kMissing) + ',' +
             format_number(n ? std::sqrt(sq[1] / n) : kMissing) + ',' + format_number(n ? peak : kMissing) + '\n';
    }
  write_atomic(out_csv, out);
  return count;
}

namespace {

struct Cache {
  bool force;
  RunSummary* summary;
  std::ostream* log;

  // Runs `produce` unless `output` was built from the same key before.
  template <class Fn>
  void ensure(const fs::path& output, const std::string& key, Fn&& produce) {
    const fs::path key_file = output.string() + ".key";
    std::error_code ec;
    if (!force && fs::exists(output, ec) && fs::exists(key_file, ec) && read_file(key_file) == key) {
      ++summary->stages_cached;
      if (log) *log << "cached   " << output.filename().string() << "\n";
      return;
    }
    produce();
    write_atomic(key_file, key);
    ++summary->stages_computed;
    if (log) *log << "computed " << output.filename().string() << "\n";
  }
};

bool needs_spatial(const RunConfig& c) {
  return std::any_of(c.methods.begin(), c.methods.end(), [](Method m) {
    return m == Method::Weighted || m == Method::Tree || m == Method::Triple;
  });
}

std::string slug(Method m) {
  std::string s(to_string(m));
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

}  // namespace

RunSummary run_pipeline(const RunConfig& config, std::ostream* log) {
  validate(config);
  const Manifest manifest = load_manifest(config.manifest);
  fs::path embeddings_path;
  if (config.embeddings)
    embeddings_path = *config.embeddings;
  else if (manifest.embeddings)
    embeddings_path = manifest.resolve(*manifest.embeddings);
  else
    fail(ErrorCode::InvalidConfig, "no embeddings file: set it in the config or the manifest");

  RunSummary summary;
  Cache cache{config.force, &summary, log};
  const fs::path out = config.out_dir;
  const std::string cfg_hash = config_hash(config);

  ReportHeader header;
  header.config_json = hashed_config(config).dump();
  header.config_hash = cfg_hash;
  header.inputs["manifest"] = content_hash(read_file(config.manifest));
  const std::string emb_text = read_file(embeddings_path);
  header.inputs["embeddings"] = content_hash(emb_text);

  // offsets
  std::optional<OffsetTable> offsets;
  std::string offset_key = "none";
  if (needs_spatial(config)) {
    std::string recordings;
    for (const auto& e : manifest.recordings)
      if (e.key.task == Task::RAN) recordings += describe(e.key) + ':' + content_hash(read_file(manifest.resolve(e.path))) + ';';
    header.inputs["ran_recordings"] = content_hash(recordings);
    ordered_json k{{"stage", "offset"},
                   {"recordings", content_hash(recordings)},
                   {"manifest", header.inputs["manifest"]},
                   {"idt", hashed_config(config)["idt"]},
                   {"windows", config.offset_per_window ? json(config.n_seq) : json::array()},
                   {"version", tool_version()}};
    offset_key = content_hash(k.dump());
    const fs::path file = out / "offsets.csv";
    cache.ensure(file, offset_key, [&] {
      std::vector<int> counts;
      if (config.offset_per_window) counts = config.n_seq;
      write_offsets(file, compute_offsets(manifest, config.idt, counts, config.threads));
    });
    offsets = index_offsets(read_offsets(file));
  }

  std::optional<EmbeddingStore> store;
  std::vector<EvalReport> reports;
  std::vector<int> grid = config.n_seq;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const bool have_both_tasks = std::find(config.tasks.begin(), config.tasks.end(), Task::RAN) != config.tasks.end() &&
                               std::find(config.tasks.begin(), config.tasks.end(), Task::TEX) != config.tasks.end();

  for (int n_seq : grid) {
    ordered_json sk{{"stage", "embed-score"},    {"embeddings", header.inputs["embeddings"]},
                    {"offsets", offset_key},     {"n_seq", n_seq},
                    {"round", config.round},     {"tasks", hashed_config(config)["tasks"]},
                    {"per_window", config.offset_per_window}, {"version", tool_version()}};
    const std::string score_key = content_hash(sk.dump());
    const fs::path score_file = out / ("scores_n" + std::to_string(n_seq) + ".csv");
    cache.ensure(score_file, score_key, [&] {
      if (!store) {
        std::istringstream in(emb_text);
        store.emplace(parse_embeddings(in));
      }
      write_scores(score_file, score_pairs(*store, offsets ? &*offsets : nullptr, n_seq, config.round, config.tasks,
                                           config.offset_per_window ? n_seq : 0, config.threads));
    });
    std::vector<ScoreVector> scores;
    for (auto& r : read_scores(score_file)) scores.push_back(r.v);

    for (Method method : config.methods) {
      if ((method == Method::CrossTask || method == Method::Triple) && !have_both_tasks) {
        if (log) *log << "skipping " << to_string(method) << ": needs both RAN and TEX\n";
        continue;
      }
      std::vector<std::optional<ModelKind>> kinds;
      if (method == Method::Tree)
        kinds.assign(config.tree_kinds.begin(), config.tree_kinds.end());
      else if (is_cross_validated(method))
        kinds.push_back(ModelKind::RandomForest);
      else
        kinds.push_back(std::nullopt);

      for (const auto& kind : kinds) {
        CvOptions cv;
        cv.k = config.k;
        cv.seed = config.seed;
        cv.far_target = config.far_target;
        cv.alpha = config.alpha;
        cv.tree.kind = kind.value_or(ModelKind::RandomForest);
        cv.tree.search_candidates = config.search_candidates;
        cv.tree.inner_folds = config.inner_folds;
        cv.tree.seed = config.seed;
        cv.tree.threads = config.threads;

        std::string name = "n" + std::to_string(n_seq) + "_" + slug(method);
        if (kind) name += "_" + std::string(to_string(*kind));
        const fs::path fused_file = out / "fused" / (name + ".csv");
        ordered_json fk{{"stage", "fuse"},
                        {"scores", score_key},
                        {"method", std::string(to_string(method))},
                        {"kind", kind ? json(std::string(to_string(*kind))) : json(nullptr)},
                        {"k", config.k},
                        {"seed", config.seed},
                        {"alpha", hashed_config(config)["alpha"]},
                        {"search_candidates", config.search_candidates},
                        {"inner_folds", config.inner_folds},
                        {"version", tool_version()}};
        cache.ensure(fused_file, content_hash(fk.dump()), [&] {
          write_fused(fused_file, fuse_scores(scores, method, cv), n_seq);
        });
        for (auto& r : evaluate_fused(read_fused(fused_file), config.far_target)) reports.push_back(std::move(r));
      }
    }
  }

  // Group by task then n_seq for readability.
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    return std::tie(a.task, a.n_seq) < std::tie(b.task, b.n_seq);
  });
  const std::string report = reports_to_json(header, reports);
  summary.report = out / "report.json";
  summary.table = out / "table.csv";
  write_atomic(summary.report, report);
  write_atomic(summary.table, render_table(report));
  return summary;
}

}  // namespace gazefuse
