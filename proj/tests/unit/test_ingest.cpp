#include "doctest.h"

#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "gazefuse/error.hpp"
#include "gazefuse/ingest.hpp"

using namespace gazefuse;

namespace {

const RecordingKey kKey{"S1", 1, 1, Task::RAN};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

GazeRecording parse(const std::string& text, ParseSummary* summary = nullptr) {
  std::istringstream in(text);
  return parse_recording(in, kKey, 1000.0, summary);
}

std::string embedding_header() {
  std::string h = "subject,round,session,task,window,fold";
  for (int i = 0; i < 128; ++i) h += ",e" + std::to_string(i);
  return h + "\n";
}

std::string embedding_line(const std::string& prefix, int values, double v = 0.0) {
  std::string line = prefix;
  for (int i = 0; i < values; ++i) line += "," + format_number(v);
  return line + "\n";
}

}  // namespace

TEST_CASE("parse_recording basics") {
  const auto rec = parse("n,x,y,xT,yT\n0,1.0,1.0,0,0\n1,1.0,1.0,0,0\n2,1.0,1.0,0,0\n");
  REQUIRE(rec.samples.size() == 3);
  for (const auto& s : rec.samples) {
    CHECK(s.has_gaze());
    CHECK(s.has_target());
    CHECK(s.gx == 1.0);
  }
}

TEST_CASE("empty or NaN cells become missing") {
  ParseSummary summary;
  const auto rec = parse("n,x,y,xT,yT\n0,,1.0,0,0\n1,NaN,nan,0,0\n2,1e-1,+2.5,,\n", &summary);
  CHECK_FALSE(rec.samples[0].has_gaze());
  CHECK_FALSE(rec.samples[1].has_gaze());
  CHECK(rec.samples[2].gx == doctest::Approx(0.1));
  CHECK(rec.samples[2].gy == 2.5);
  CHECK_FALSE(rec.samples[2].has_target());
  CHECK(summary.rows == 3);
  CHECK(summary.missing_gaze_rows == 2);
}

TEST_CASE("parse_recording errors") {
  CHECK(code_of([] { parse("n,x,y,xT,yT\n0,1,1,0,0\n2,1,1,0,0\n1,1,1,0,0\n"); }) == ErrorCode::NonMonotonicTime);
  CHECK(code_of([] { parse("n,x,y,xT,yT\n0,1,1,0\n"); }) == ErrorCode::MalformedRow);
  CHECK(code_of([] { parse("n,x,y,xT,yT\n"); }) == ErrorCode::EmptyRecording);
  CHECK(code_of([] { parse(""); }) == ErrorCode::EmptyRecording);
}

TEST_CASE("unknown columns are ignored by name and reported") {
  ParseSummary summary;
  const auto rec = parse("n,val,x,y,lab,xT,yT\n0,0,1,2,7,3,4\n1,0,1,2,7,3,4\n", &summary);
  CHECK(rec.samples[0].gx == 1.0);
  CHECK(rec.samples[0].gy == 2.0);
  CHECK(rec.samples[0].tx == 3.0);
  CHECK(summary.ignored_columns == std::vector<std::string>{"val", "lab"});
}

TEST_CASE("recording round trip") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 10.0);
  std::vector<double> x(500), y(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = i % 37 == 0 ? kMissing : n(rng);
    y[i] = n(rng);
  }
  const auto original = fixtures::recording(x, y, 1000.0);
  std::ostringstream once;
  write_recording(once, original);
  std::istringstream in(once.str());
  const auto parsed = parse_recording(in, original.key, 1000.0);
  std::ostringstream twice;
  write_recording(twice, parsed);
  CHECK(once.str() == twice.str());  // stable after the first 9-digit quantization
  REQUIRE(parsed.samples.size() == original.samples.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(parsed.samples[i].has_gaze() == original.samples[i].has_gaze());
    if (original.samples[i].has_gaze())
      CHECK(std::abs(parsed.samples[i].gx - x[i]) <= 1e-8 * std::max(1.0, std::abs(x[i])));
  }
}

TEST_CASE("parse_embeddings") {
  SUBCASE("zero vector") {
    std::istringstream in(embedding_header() + embedding_line("S1,1,1,RAN,0,0", 128));
    const auto recs = parse_embeddings(in);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].fold_id == 0);
    CHECK(recs[0].window.window_index == 0);
    for (double v : recs[0].vector) CHECK(v == 0.0);
  }
  SUBCASE("127 values") {
    std::istringstream in(embedding_header() + embedding_line("S1,1,1,RAN,0,0", 127));
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::DimensionMismatch);
  }
  SUBCASE("duplicate key") {
    std::istringstream in(embedding_header() + embedding_line("S1,1,1,RAN,0,0", 128) +
                          embedding_line("S1,1,1,RAN,0,0", 128, 1.0));
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::DuplicateKey);
  }
  SUBCASE("unknown task") {
    std::istringstream in(embedding_header() + embedding_line("S1,1,1,HSS,0,0", 128));
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::UnknownTask);
  }
  SUBCASE("bad fold") {
    std::istringstream in(embedding_header() + embedding_line("S1,1,1,RAN,0,4", 128));
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::InvalidValue);
  }
}

TEST_CASE("embedding round trip") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<EmbeddingRecord> recs;
  for (int w = 0; w < 2; ++w)
    for (int f = 0; f < 4; ++f) {
      EmbeddingRecord r{{{"S9", 1, 2, Task::TEX}, w}, f, {}};
      for (auto& v : r.vector) v = n(rng);
      recs.push_back(r);
    }
  std::ostringstream once;
  write_embeddings(once, recs);
  std::istringstream in(once.str());
  const auto parsed = parse_embeddings(in);
  std::ostringstream twice;
  write_embeddings(twice, parsed);
  CHECK(once.str() == twice.str());
  REQUIRE(parsed.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK((parsed[i].window == recs[i].window));
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) CHECK(parsed[i].vector[d] == doctest::Approx(recs[i].vector[d]).epsilon(1e-8));
  }
}

TEST_CASE("manifest round trip and errors") {
  fixtures::TempDir dir("manifest");
  Manifest m;
  m.recordings.push_back({{"S1", 1, 1, Task::RAN}, "rec/a.csv", 250.0, DataSplit::Train});
  m.recordings.push_back({{"S1", 1, 2, Task::TEX}, "rec/b.csv", 1000.0, DataSplit::Test});
  m.embeddings = "emb.csv";
  save_manifest(dir.path / "m.json", m);
  const auto loaded = load_manifest(dir.path / "m.json");
  REQUIRE(loaded.recordings.size() == 2);
  CHECK(loaded.recordings[0].rate_hz == 250.0);
  CHECK(loaded.recordings[1].split == DataSplit::Test);
  CHECK(loaded.resolve("rec/a.csv") == dir.path / "rec/a.csv");
  CHECK(loaded.find({"S1", 1, 2, Task::TEX}) != nullptr);

  CHECK(code_of([&] { load_manifest(dir.path / "absent.json"); }) == ErrorCode::Io);
  {
    std::ofstream(dir.path / "bad.json") << "{\"recordings\": [{\"subject\": 3}]}";
  }
  CHECK(code_of([&] { load_manifest(dir.path / "bad.json"); }) == ErrorCode::InvalidConfig);
}
