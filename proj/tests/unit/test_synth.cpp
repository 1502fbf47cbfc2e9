#include "doctest.h"

#include <cmath>
#include <random>

#include "gazefuse/error.hpp"

#include "fixtures.hpp"
#include "gazefuse/embed.hpp"
#include "gazefuse/metrics.hpp"
#include "gazefuse/offset.hpp"
#include "gazefuse/protocol.hpp"
#include "gazefuse/synth.hpp"
#include "oracles.hpp"

using namespace gazefuse;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.n_subjects = 4;
  c.duration_s = 10;
  return c;
}

struct Scores {
  std::vector<double> genuine, impostor;
};

Scores embedding_scores(const SynthConfig& c, int n_seq = 1) {
  std::vector<SubjectSignature> subjects;
  for (int i = 0; i < c.n_subjects; ++i) subjects.push_back(make_signature(i, c));
  const auto recs = generate_embeddings(subjects, c);
  const EmbeddingStore store(recs);
  Scores out;
  for (const auto& e : subjects)
    for (const auto& a : subjects) {
      const RecordingKey ke{e.subject_id, 1, 2, Task::RAN}, ka{a.subject_id, 1, 1, Task::RAN};
      const double s = embed_similarity(store.aggregate(ke, n_seq), store.aggregate(ka, n_seq));
      (e.subject_id == a.subject_id ? out.genuine : out.impostor).push_back(s);
    }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Two-sample KS statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

// Asymptotic two-sample KS p-value with the usual small-sample correction.
double ks_pvalue(double d, double n_eff) {
  const double root = std::sqrt(n_eff);
  const double lambda = (root + 0.12 + 0.11 / root) * d;
  double q = 0;
  for (int k = 1; k <= 100; ++k) q += 2.0 * (k % 2 ? 1 : -1) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const auto a = generate_corpus(small());
  const auto b = generate_corpus(small());
  REQUIRE(a.recordings.size() == b.recordings.size());
  CHECK(a.recordings.size() == 4 * 2 * 2);
  for (std::size_t i = 0; i < a.recordings.size(); ++i)
    for (std::size_t k = 0; k < a.recordings[i].samples.size(); k += 97) {
      CHECK(a.recordings[i].samples[k].gx == b.recordings[i].samples[k].gx);
    }
  CHECK(a.embeddings.front().vector == b.embeddings.front().vector);
  auto other = small();
  other.seed = 8;
  CHECK(generate_corpus(other).recordings.front().samples[10].gx != a.recordings.front().samples[10].gx);
}

TEST_CASE("planted offsets") {
  SUBCASE("no noise and no spread: offset is zero at fixations") {
    auto c = small();
    c.offset_noise = 0;
    c.offset_signature_spread = 0;
    const auto rec = generate_recording(make_signature(0, c), {synth_subject_id(0), 1, 1, Task::RAN}, c);
    const auto f = compute_offset_features(rec);
    CHECK(f.max < 1e-9);
  }
  SUBCASE("bias (1,0) recovers the spherical angle of that bias") {
    auto c = small();
    c.offset_noise = 0;
    SubjectSignature s{"S0001", 1.0, 0.0};
    const auto rec = generate_recording(s, {"S0001", 1, 1, Task::RAN}, c);
    const auto theta = offset_series(rec);
    const auto fix = idt_fixations(rec.samples, {});
    REQUIRE_FALSE(fix.empty());
    // per-sample oracle at each covered sample, then the mean
    double sum = 0;
    std::size_t n = 0;
    for (const auto& f : fix)
      for (std::size_t i = f.start_index; i <= f.end_index; ++i) {
        const auto& smp = rec.samples[i];
        sum += oracle::spherical_angle_deg(smp.gx, smp.gy, smp.tx, smp.ty);
        ++n;
      }
    const auto feats = offset_features(theta, fix);
    CHECK(std::abs(feats.mean - sum / n) < 1e-9);
    // a horizontal 1 dva shift is exactly 1 dva on the horizontal meridian and less above or below it
    CHECK(feats.max <= 1.0 + 1e-12);
    CHECK(feats.max > 0.99);
    CHECK(feats.mean > 0.9);
  }
  SUBCASE("sessions share the bias but not the noise") {
    const auto c = small();
    const auto sig = make_signature(1, c);
    const auto s1 = generate_recording(sig, {sig.subject_id, 1, 1, Task::RAN}, c);
    const auto s2 = generate_recording(sig, {sig.subject_id, 1, 2, Task::RAN}, c);
    CHECK(s1.samples[500].gx != s2.samples[500].gx);
    const auto f1 = compute_offset_features(s1);
    const auto f2 = compute_offset_features(s2);
    CHECK(std::abs(f1.median - f2.median) < 0.1);
  }
  SUBCASE("TEX has no targets") {
    const auto c = small();
    const auto sig = make_signature(0, c);
    const auto t = generate_recording(sig, {sig.subject_id, 1, 1, Task::TEX}, c);
    for (std::size_t i = 0; i < t.samples.size(); i += 50) CHECK_FALSE(t.samples[i].has_target());
  }
}

TEST_CASE("synthetic embeddings") {
  SUBCASE("no noise: genuine cosine 1 and EER 0") {
    auto c = small();
    c.n_subjects = 8;
    c.embedding_noise = 0;
    const auto s = embedding_scores(c);
    for (double g : s.genuine) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eer(s.genuine, s.impostor) == 0.0);
  }
  SUBCASE("no separation: genuine and impostor are indistinguishable") {
    auto c = small();
    c.n_subjects = 24;  // 24 genuine, 552 impostor
    c.embedding_class_separation = 0;
    auto s = embedding_scores(c);
    // widen the genuine sample with more subjects drawn from other seeds
    for (std::uint64_t seed = 1; s.genuine.size() < 500; ++seed) {
      c.seed = 1000 + seed;
      const auto more = embedding_scores(c);
      s.genuine.insert(s.genuine.end(), more.genuine.begin(), more.genuine.end());
    }
    s.impostor.resize(500);
    const double d = ks_statistic(s.genuine, s.impostor);
    const double n = 250.0;  // effective sample size n*m/(n+m)
    const double p = ks_pvalue(d, n);
    CHECK(p > 0.01);
  }
  SUBCASE("cosine gap matches the closed form") {
    auto c = small();
    c.n_subjects = 60;
    c.embedding_class_separation = 0.6;
    c.embedding_noise = 1.0;
    c.duration_s = 20;
    for (int n_seq : {1, 4}) {
      const auto s = embedding_scores(c, n_seq);
      const double gap = mean(s.genuine) - mean(s.impostor);
      const double expected = oracle::expected_cosine_gap(0.6, 1.0, n_seq);
      CHECK(std::abs(gap - expected) < 0.1 * expected);
    }
  }
}

TEST_CASE("config validation") {
  auto c = small();
  c.n_subjects = 0;
  CHECK_THROWS_AS(validate(c), Error);
  c = small();
  c.embedding_class_separation = 1.5;
  CHECK_THROWS_AS(validate(c), Error);
  CHECK(synth_subject_id(0) == "S0001");
}
