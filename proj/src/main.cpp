#include <cstdio>
#include <exception>
#include <filesystem>
#include <vector>

#include <CLI11.hpp>

#include "sfcgan/classify.hpp"
#include "sfcgan/render.hpp"
#include "sfcgan/run_config.hpp"

namespace fs = std::filesystem;

namespace sfcgan {
namespace {

struct Flags {
  std::string config;
  uint64_t seed = 0;
  bool no_sp = false;
  std::string sp_pairing;
  int threads = 0;
  double top = 0.0;
  std::string out;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; keys listed below");
  sub->add_option("--seed", f.seed, "override the config seed");
  sub->add_flag("--no-sp", f.no_sp, "disable the structure-preserving loss terms");
  sub->add_option("--sp-pairing", f.sp_pairing, "correlation pairing: literal or paired")
      ->check(CLI::IsMember({"literal", "paired"}));
  sub->add_option("--threads", f.threads,
                  "worker threads; 1 is the deterministic reference mode")
      ->envname("SFCGAN_THREADS");
  sub->add_option("--top", f.top, "edge fraction for render edge lists");
  sub->add_option("--out", f.out, "override the output directory");
  sub->footer(run_config_help());
}

RunConfig resolve_config(const CLI::App* sub, const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (sub->count("--seed")) cfg.seed = f.seed;
  if (f.no_sp) cfg.sp_enabled = false;
  if (sub->count("--sp-pairing")) cfg.sp_pairing = f.sp_pairing;
  if (sub->count("--threads")) cfg.threads = f.threads;
  if (sub->count("--top")) cfg.top = f.top;
  if (sub->count("--out")) cfg.out_dir = f.out;
  validate_run_config(cfg);
  return cfg;
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (!fs::is_directory(cfg.out_dir))
    throw IoError("cannot create output directory " + cfg.out_dir);
}

std::vector<const SubjectEntry*> test_subjects(const DatasetManifest& m) {
  std::vector<const SubjectEntry*> out;
  for (const auto& s : m.subjects)
    if (s.split == Split::test) out.push_back(&s);
  if (out.empty()) throw ValidationError("manifest has no test subjects");
  return out;
}

/// parallel_for with worker exceptions carried back to the caller.
template <typename Fn>
void for_each_subject(const std::vector<const SubjectEntry*>& subs, int threads, Fn fn) {
  std::vector<std::exception_ptr> errs(subs.size());
  parallel_for(int64_t(subs.size()), threads, [&](int64_t i) {
    try {
      fn(*subs[size_t(i)]);
    } catch (...) {
      errs[size_t(i)] = std::current_exception();
    }
  });
  for (const auto& e : errs)
    if (e) std::rethrow_exception(e);
}

int cmd_synth(const RunConfig& cfg) {
  DatasetManifest m = gen_dataset(synth_config(cfg), cfg.data_dir);
  std::printf("dataset: %zu subjects (%d train / %d test), n=%d, %s\n",
              m.subjects.size(), m.train_count(), m.test_count(), m.n,
              manifest_path(cfg).c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  DatasetManifest m = load_manifest(manifest_path(cfg));
  TrainConfig tc = train_config(cfg);
  ensure_out_dir(cfg);
  const std::string ck_path = checkpoint_file(cfg);

  ModelCheckpoint ck;
  TrainHistory hist;
  if (fs::exists(ck_path)) {
    ck = load_checkpoint(ck_path);
    std::printf("resuming from %s (epoch %d)\n", ck_path.c_str(), ck.epoch);
    std::tie(ck, hist) = resume(std::move(ck), m, tc);
  } else {
    std::tie(ck, hist) = train(m, tc);
  }
  save_checkpoint(ck, ck_path);
  if (!hist.epochs.empty()) {
    save_train_log(hist, (fs::path(cfg.out_dir) / "train_log.csv").string());
    const LossReport& last = hist.epochs.back();
    std::printf("epoch %d: gan_g=%s gan_d=%s cyc=%s id=%s sp_mse=%s sp_pcc=%s total=%s\n",
                ck.epoch, format_general(last.gan_g, 6).c_str(),
                format_general(last.gan_d, 6).c_str(), format_general(last.cyc, 6).c_str(),
                format_general(last.id, 6).c_str(), format_general(last.sp_mse, 6).c_str(),
                format_general(last.sp_pcc, 6).c_str(), format_general(last.total, 6).c_str());
  } else {
    std::printf("checkpoint already at epoch %d, nothing to do\n", ck.epoch);
  }
  std::printf("checkpoint: %s\n", ck_path.c_str());
  return 0;
}

int cmd_translate(const RunConfig& cfg) {
  DatasetManifest m = load_manifest(manifest_path(cfg));
  ModelCheckpoint ck = load_checkpoint(checkpoint_file(cfg));
  if (ck.models.cfg.n != m.n)
    throw ValidationError("checkpoint n does not match dataset n");
  ensure_out_dir(cfg);

  auto subs = test_subjects(m);
  for_each_subject(subs, cfg.threads, [&](const SubjectEntry& s) {
    Connectome sc = load_connectome(s.sc_path, Domain::SC, m.n);
    Connectome fc = load_connectome(s.fc_path, Domain::FC, m.n);
    save_connectome(translate(ck.models.g_fc, sc),
                    (fs::path(cfg.out_dir) / (s.id + "_translated_fc.csv")).string());
    save_connectome(translate(ck.models.g_sc, fc),
                    (fs::path(cfg.out_dir) / (s.id + "_translated_sc.csv")).string());
  });
  std::printf("translated %zu test subjects in both directions to %s\n", subs.size(),
              cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  DatasetManifest m = load_manifest(manifest_path(cfg));
  ModelCheckpoint ck = load_checkpoint(checkpoint_file(cfg));
  ensure_out_dir(cfg);

  EvalReport r = evaluate_dataset(m, ck.models, eval_thresholds(cfg));
  const std::string path = (fs::path(cfg.out_dir) / "eval_report.csv").string();
  save_eval_report(r, path);
  for (const auto& f : r.failures)
    std::fprintf(stderr, "warning: metric failed: %s\n", f.c_str());
  for (const auto& a : r.aggregates)
    std::printf("%s: pearson %s  ssim %s  mse %s (%d rows)\n",
                domain_name(a.direction), format_mean_std(a.pearson, true).c_str(),
                format_mean_std(a.ssim, true).c_str(),
                format_mean_std(a.mse, false).c_str(), a.mse.count);
  std::printf("report: %s\n", path.c_str());
  return 0;
}

int cmd_classify(const RunConfig& cfg) {
  DatasetManifest m = load_manifest(manifest_path(cfg));
  ModelCheckpoint ck = load_checkpoint(checkpoint_file(cfg));
  ensure_out_dir(cfg);

  Translator sc_to_fc = [&](const Connectome& x) { return translate(ck.models.g_fc, x); };
  Translator fc_to_sc = [&](const Connectome& x) { return translate(ck.models.g_sc, x); };

  std::string dataset = fs::path(cfg.data_dir).filename().string();
  if (dataset.empty()) dataset = cfg.data_dir;

  std::vector<ClassifyRow> rows;
  for (FeatureSource src :
       {FeatureSource::real_fc, FeatureSource::real_sc, FeatureSource::real_both,
        FeatureSource::translated_fc, FeatureSource::translated_sc,
        FeatureSource::translated_both}) {
    FeatureSet tr = feature_set(m, Split::train, src, &sc_to_fc, &fc_to_sc);
    FeatureSet te = feature_set(m, Split::test, src, &sc_to_fc, &fc_to_sc);
    SvmModel svm = train_linear_svm(tr);
    ClassifierMetrics cm = classification_metrics(predict_scores(svm, te), te.labels);
    rows.push_back({"linear_svm", dataset, src, cm});
    std::printf("%-15s accuracy %s  f1 %s  auc %s\n", feature_source_name(src),
                format_fixed(cm.accuracy, 2).c_str(), format_fixed(cm.f1, 2).c_str(),
                format_fixed(cm.auc, 2).c_str());
  }
  const std::string path = (fs::path(cfg.out_dir) / "classify_report.csv").string();
  save_classify_report(rows, path);
  std::printf("report: %s\n", path.c_str());
  return 0;
}

int cmd_render(const RunConfig& cfg) {
  DatasetManifest m = load_manifest(manifest_path(cfg));
  ensure_out_dir(cfg);

  const std::string ck_path = checkpoint_file(cfg);
  ModelCheckpoint ck;
  bool translated = fs::exists(ck_path);
  if (translated) {
    ck = load_checkpoint(ck_path);
    if (ck.models.cfg.n != m.n)
      throw ValidationError("checkpoint n does not match dataset n");
  }

  auto subs = test_subjects(m);
  for_each_subject(subs, cfg.threads, [&](const SubjectEntry& s) {
    Connectome fc = load_connectome(s.fc_path, Domain::FC, m.n);
    Connectome sc = load_connectome(s.sc_path, Domain::SC, m.n);
    fs::path base = fs::path(cfg.out_dir) / s.id;
    render_heatmap(fc, base.string() + "_fc.pgm");
    render_heatmap(sc, base.string() + "_sc.pgm");
    save_top_edges(fc, cfg.top, base.string() + "_fc_top.csv");
    save_top_edges(sc, cfg.top, base.string() + "_sc_top.csv");
    if (translated) {
      Connectome fc_hat = translate(ck.models.g_fc, sc);
      Connectome sc_hat = translate(ck.models.g_sc, fc);
      render_heatmap(fc_hat, base.string() + "_translated_fc.pgm");
      render_heatmap(sc_hat, base.string() + "_translated_sc.pgm");
      save_top_edges(fc_hat, cfg.top, base.string() + "_translated_fc_top.csv");
      save_top_edges(sc_hat, cfg.top, base.string() + "_translated_sc_top.csv");
    }
  });
  std::printf("rendered %zu test subjects%s to %s\n", subs.size(),
              translated ? " (real and translated)" : " (real only, no checkpoint)",
              cfg.out_dir.c_str());
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"sfcgan: bidirectional translation between functional and structural "
               "brain connectivity matrices"};
  app.require_subcommand(1);
  Flags f;

  add_flags(app.add_subcommand("synth", "generate a synthetic paired FC/SC dataset"), f);
  add_flags(app.add_subcommand("train", "train translators (resumes if a checkpoint exists)"), f);
  add_flags(app.add_subcommand("translate", "translate the test split in both directions"), f);
  add_flags(app.add_subcommand("eval", "score translations: similarity and graph-property APD"), f);
  add_flags(app.add_subcommand("classify", "linear SVM on real and translated features"), f);
  add_flags(app.add_subcommand("render", "PGM heatmaps and strongest-edge lists"), f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const CLI::App* sub = app.get_subcommands().front();
  RunConfig cfg = resolve_config(sub, f);
  const std::string name = sub->get_name();
  if (name == "synth") return cmd_synth(cfg);
  if (name == "train") return cmd_train(cfg);
  if (name == "translate") return cmd_translate(cfg);
  if (name == "eval") return cmd_eval(cfg);
  if (name == "classify") return cmd_classify(cfg);
  return cmd_render(cfg);
}

}  // namespace
}  // namespace sfcgan

int main(int argc, char** argv) {
  try {
    return sfcgan::run(argc, argv);
  } catch (const sfcgan::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
