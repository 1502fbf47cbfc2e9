// gazefuse command-line front end.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gazefuse/error.hpp"
#include "gazefuse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gazefuse;

namespace {

std::vector<Task> parse_tasks(const std::vector<std::string>& names) {
  std::vector<Task> out;
  for (const auto& n : names) out.push_back(parse_task(n));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

Error as_config_error(const std::exception& e) { return Error(ErrorCode::InvalidConfig, e.what()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazefuse: gaze-offset and embedding score fusion for eye-movement biometrics"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  SynthConfig sc;
  fs::path synth_out;
  synth->add_option("--subjects", sc.n_subjects, "Number of subjects")->capture_default_str();
  synth->add_option("--out-dir", synth_out, "Output directory")->required();
  synth->add_option("--seed", sc.seed)->capture_default_str();
  synth->add_option("--rounds", sc.rounds)->capture_default_str();
  synth->add_option("--rate", sc.rate_hz, "Sampling rate, Hz")->capture_default_str();
  synth->add_option("--duration", sc.duration_s, "Recording length, s")->capture_default_str();
  synth->add_option("--offset-spread", sc.offset_signature_spread, "Between-subject bias std, dva")->capture_default_str();
  synth->add_option("--offset-noise", sc.offset_noise, "Per-sample gaze noise, dva")->capture_default_str();
  synth->add_option("--separation", sc.embedding_class_separation, "Embedding subject share in [0,1]")->capture_default_str();
  synth->add_option("--embedding-noise", sc.embedding_noise, "Per-window embedding noise")->capture_default_str();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Velocity windows from gaze recordings");
  fs::path pre_manifest, pre_out;
  WindowOptions wopts;
  bool normalize = false;
  pre->add_option("--manifest", pre_manifest)->required();
  pre->add_option("--out", pre_out, "Output CSV")->required();
  pre->add_option("--max-missing", wopts.max_missing_fraction)->capture_default_str();
  pre->add_option("--clamp", wopts.velocity_clamp, "Velocity clamp, deg/s")->capture_default_str();
  pre->add_flag("--normalize", normalize, "z-score with statistics of train-tagged recordings");
  bool pre_samples = false;
  pre->add_flag("--samples", pre_samples, "One row per sample instead of per-window summaries");

  // offset
  auto* off = app.add_subcommand("offset", "Gaze-offset features of RAN recordings");
  fs::path off_manifest, off_out;
  IdtParams idt;
  std::vector<int> off_windows;
  off->add_option("--manifest", off_manifest)->required();
  off->add_option("--out", off_out, "Output CSV")->required();
  off->add_option("--dispersion", idt.dispersion_threshold, "I-DT dispersion threshold, dva")->capture_default_str();
  off->add_option("--min-duration,--min-dur", idt.min_duration_ms, "I-DT minimum duration, ms")->capture_default_str();
  off->add_option("--windows", off_windows, "Also compute over the first N windows");

  // embed-score
  auto* es = app.add_subcommand("embed-score", "Score enrollment/authentication pairs");
  fs::path es_embeddings, es_offsets, es_out;
  int es_nseq = 1, es_round = 1, es_offset_windows = 0;
  std::vector<std::string> es_tasks{"RAN", "TEX"};
  es->add_option("--embeddings", es_embeddings)->required();
  es->add_option("--offsets", es_offsets, "offsets.csv for the spatial score");
  fs::path es_pairs;
  es->add_option("--pairs", es_pairs, "pairs.csv (default: every session-2 x session-1 pair)");
  es->add_option("--n-seq,--nseq", es_nseq)->capture_default_str();
  es->add_option("--round", es_round)->capture_default_str();
  es->add_option("--tasks", es_tasks)->capture_default_str();
  es->add_option("--offset-windows", es_offset_windows, "Offset row scope (0: whole recording)")->capture_default_str();
  es->add_option("--out", es_out, "Output CSV")->required();

  // fuse
  auto* fu = app.add_subcommand("fuse", "Fuse pair scores");
  fs::path fu_scores, fu_out;
  std::string fu_method = "tree", fu_kind = "rf", fu_task;
  std::optional<int> fu_nseq;
  CvOptions cv;
  fu->add_option("--scores", fu_scores)->required();
  fu->add_option("--method", fu_method, "baseline|weighted|tree|cross|triple")->capture_default_str();
  fu->add_option("--kind", fu_kind, "rf|et|gb")->capture_default_str();
  fu->add_option("--task", fu_task, "RAN or TEX (default: every task present)");
  fu->add_option("--n-seq,--nseq", fu_nseq, "Select rows with this n_seq");
  fu->add_option("--k", cv.k)->capture_default_str();
  fu->add_option("--seed", cv.seed)->capture_default_str();
  fu->add_option("--search", cv.tree.search_candidates, "Randomized-search candidates")->capture_default_str();
  fu->add_option("--inner-folds", cv.tree.inner_folds)->capture_default_str();
  fu->add_option("--alpha-lo", cv.alpha.lo_percent, "Alpha grid start, hundredths")->capture_default_str();
  fu->add_option("--alpha-hi", cv.alpha.hi_percent)->capture_default_str();
  fu->add_option("--alpha-step", cv.alpha.step_percent)->capture_default_str();
  fu->add_option("--out", fu_out, "Output CSV (metadata goes to <out>.meta.json)")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate fused scores");
  fs::path ev_fused, ev_report, ev_table;
  std::optional<int> ev_k;
  double ev_far = 1e-4;
  ev->add_option("--fused", ev_fused)->required();
  ev->add_option("--k", ev_k, "Expected fold count");
  ev->add_option("--far", ev_far, "FAR target")->capture_default_str();
  ev->add_option("--report", ev_report, "Report JSON")->required();
  ev->add_option("--table", ev_table, "Optional table CSV");

  // run
  // train-fusion
  auto* tf = app.add_subcommand("train-fusion", "Fit a fusion classifier on all pairs and save it");
  fs::path tf_scores, tf_save;
  std::string tf_method = "tree", tf_kind = "rf", tf_task = "RAN";
  std::optional<int> tf_nseq;
  TreeFusionOptions tf_opts;
  tf->add_option("--scores", tf_scores)->required();
  tf->add_option("--method", tf_method, "tree|cross|triple")->capture_default_str();
  tf->add_option("--kind", tf_kind, "rf|et|gb")->capture_default_str();
  tf->add_option("--task", tf_task, "Task of the pairs for the tree method")->capture_default_str();
  tf->add_option("--n-seq,--nseq", tf_nseq, "Select rows with this n_seq");
  tf->add_option("--seed", tf_opts.seed)->capture_default_str();
  tf->add_option("--search", tf_opts.search_candidates)->capture_default_str();
  tf->add_option("--inner-folds", tf_opts.inner_folds)->capture_default_str();
  tf->add_option("--save", tf_save, "Model JSON")->required();

  auto* run = app.add_subcommand("run", "Run every stage from a manifest");
  fs::path run_config;
  RunConfig rc;
  std::string manifest_s, embeddings_s, out_dir_s;
  std::vector<int> run_nseq;
  std::vector<std::string> run_methods, run_kinds, run_tasks;
  std::uint64_t run_seed = 0;
  double run_far = 0;
  int run_k = 0, run_search = 0;
  bool force = false;
  run->add_option("--config", run_config, "JSON config; flags override it");
  auto* o_manifest = run->add_option("--manifest", manifest_s);
  auto* o_embeddings = run->add_option("--embeddings", embeddings_s);
  auto* o_out = run->add_option("--out-dir", out_dir_s);
  auto* o_nseq = run->add_option("--n-seq", run_nseq);
  auto* o_methods = run->add_option("--methods", run_methods);
  auto* o_kinds = run->add_option("--kinds", run_kinds);
  auto* o_tasks = run->add_option("--tasks", run_tasks);
  auto* o_seed = run->add_option("--seed", run_seed);
  auto* o_far = run->add_option("--far", run_far);
  auto* o_k = run->add_option("--k", run_k);
  auto* o_search = run->add_option("--search", run_search);
  run->add_flag("--force", force, "Recompute cached stages");

  // report
  auto* rep = app.add_subcommand("report", "Render a report as a table");
  fs::path rep_in, rep_out;
  rep->add_option("--report", rep_in)->required();
  rep->add_option("--out", rep_out, "Output CSV (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code_for(ErrorCategory::Config);
  }

  try {
    if (synth->parsed()) {
      const auto m = synth_stage(sc, synth_out);
      std::cout << "wrote " << m.recordings.size() << " recordings to " << synth_out.string() << "\n";
    } else if (pre->parsed()) {
      const auto n = preprocess_stage(pre_manifest, wopts, normalize, pre_out, pre_samples, threads);
      std::cout << "wrote " << n << " windows to " << pre_out.string() << "\n";
    } else if (off->parsed()) {
      const auto rows = compute_offsets(load_manifest(off_manifest), idt, off_windows, threads);
      write_offsets(off_out, rows);
      std::cout << "wrote " << rows.size() << " offset rows to " << off_out.string() << "\n";
    } else if (es->parsed()) {
      const EmbeddingStore store(parse_embeddings(es_embeddings));
      std::optional<OffsetTable> offsets;
      if (!es_offsets.empty()) offsets = index_offsets(read_offsets(es_offsets));
      const auto tasks = parse_tasks(es_tasks);
      const auto rows =
          es_pairs.empty()
              ? score_pairs(store, offsets ? &*offsets : nullptr, es_nseq, es_round, tasks, es_offset_windows, threads)
              : score_pair_list(store, offsets ? &*offsets : nullptr, read_pairs(es_pairs), es_nseq,
                                es_offset_windows, threads);
      write_scores(es_out, rows);
      std::cout << "wrote " << rows.size() << " pairs to " << es_out.string() << "\n";
    } else if (fu->parsed()) {
      const Method method = parse_method(fu_method);
      cv.tree.kind = parse_model_kind(fu_kind);
      std::optional<Task> task;
      if (!fu_task.empty()) task = parse_task(fu_task);
      const auto rows = read_scores(fu_scores);
      std::vector<ScoreVector> scores;
      std::optional<int> n_seq = fu_nseq;
      for (const auto& r : rows) {
        if (fu_nseq && r.n_seq != *fu_nseq) continue;
        if (!n_seq) n_seq = r.n_seq;
        if (r.n_seq != *n_seq) fail(ErrorCode::InvalidConfig, "scores mix several n_seq values; pass --n-seq");
        scores.push_back(r.v);
      }
      if (scores.empty()) fail(ErrorCode::InvalidValue, "no score rows selected");
      cv.tree.seed = cv.seed;
      cv.tree.threads = threads;
      const auto runs = fuse_scores(scores, method, cv, task);
      write_fused(fu_out, runs, *n_seq);
      std::cout << "wrote " << fu_out.string() << "\n";
    } else if (ev->parsed()) {
      const auto fused = read_fused(ev_fused);
      for (const auto& r : fused.runs)
        if (ev_k && r.k != *ev_k)
          fail(ErrorCode::InvalidConfig, "fused scores were produced with k=" + std::to_string(r.k));
      const auto reports = evaluate_fused(fused, ev_far);
      ReportHeader header;
      header.inputs["fused"] = content_hash(read_file(ev_fused));
      const auto text = reports_to_json(header, reports);
      write_text(ev_report, text);
      if (!ev_table.empty()) write_text(ev_table, render_table(text));
      for (const auto& r : reports)
        std::cout << r.task << " " << r.method << (r.kind.empty() ? "" : ":" + r.kind) << " EER "
                  << r.eer_percent << "%\n";
    } else if (tf->parsed()) {
      const Method method = parse_method(tf_method);
      if (!is_cross_validated(method)) fail(ErrorCode::InvalidConfig, "train-fusion fits tree, cross or triple");
      std::vector<ScoreVector> all;
      for (const auto& r : read_scores(tf_scores))
        if (!tf_nseq || r.n_seq == *tf_nseq) all.push_back(r.v);
      std::vector<ScoreVector> pairs;
      FeatureMode mode = FeatureMode::EkytSpatial;
      if (method == Method::Tree) {
        const Task task = parse_task(tf_task);
        for (const auto& v : all)
          if (v.task() == task) pairs.push_back(v);
      } else {
        std::vector<ScoreVector> tex, ran;
        for (const auto& v : all) (v.task() == Task::TEX ? tex : ran).push_back(v);
        pairs = cross_task_scores(tex, ran, method == Method::Triple);
        mode = method == Method::Triple ? FeatureMode::Triple : FeatureMode::CrossTask;
      }
      tf_opts.kind = method == Method::Tree ? parse_model_kind(tf_kind) : ModelKind::RandomForest;
      tf_opts.threads = threads;
      const auto fitted = train_fusion_model(pairs, mode, tf_opts);
      write_text(tf_save, model_to_json(fitted.model));
      std::cout << "wrote " << tf_save.string() << " (" << fitted.model.trees.size() << " trees, recipe "
                << recipe_id(mode) << ")\n";
    } else if (run->parsed()) {
      RunConfig cfg;
      if (!run_config.empty()) cfg = load_config(run_config);
      if (*o_manifest) cfg.manifest = manifest_s;
      if (*o_embeddings) cfg.embeddings = fs::path(embeddings_s);
      if (*o_out) cfg.out_dir = out_dir_s;
      if (*o_nseq) cfg.n_seq = run_nseq;
      if (*o_methods) {
        cfg.methods.clear();
        for (const auto& m : run_methods) cfg.methods.push_back(parse_method(m));
      }
      if (*o_kinds) {
        cfg.tree_kinds.clear();
        for (const auto& k : run_kinds) cfg.tree_kinds.push_back(parse_model_kind(k));
      }
      if (*o_tasks) {
        try {
          cfg.tasks = parse_tasks(run_tasks);
        } catch (const Error& e) {
          throw as_config_error(e);
        }
      }
      if (*o_seed) cfg.seed = run_seed;
      if (*o_far) cfg.far_target = run_far;
      if (*o_k) cfg.k = run_k;
      if (*o_search) cfg.search_candidates = run_search;
      if (app.get_option("--threads")->count() > 0 || run_config.empty()) cfg.threads = threads;
      cfg.force = force;
      const auto summary = run_pipeline(cfg, &std::cerr);
      std::cout << "report: " << summary.report.string() << "\ntable:  " << summary.table.string() << "\n";
    } else if (rep->parsed()) {
      const auto table = render_table(read_file(rep_in));
      if (rep_out.empty())
        std::cout << table;
      else
        write_text(rep_out, table);
    }
  } catch (const Error& e) {
    std::cerr << "gazefuse: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "gazefuse: " << e.what() << "\n";
    return exit_code_for(ErrorCategory::Io);
  } catch (const std::exception& e) {
    std::cerr << "gazefuse: internal error: " << e.what() << "\n";
    return exit_code_for(ErrorCategory::Compute);
  }
  return 0;
}
