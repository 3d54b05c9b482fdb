#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "vpfd/bench.hpp"
#include "vpfd/checkpoint.hpp"
#include "vpfd/config.hpp"
#include "vpfd/dataset.hpp"
#include "vpfd/distill.hpp"
#include "vpfd/errors.hpp"
#include "vpfd/trainers.hpp"

namespace fs = std::filesystem;
using namespace vpfd;

namespace {

RunConfig build_config(const std::string& config_path, const std::vector<std::string>& sets) {
  RunConfig cfg = RunConfig::defaults();
  if (!config_path.empty()) cfg.load_file(config_path);
  for (const std::string& kv : sets) cfg.set_kv(kv);
  if (const char* root = std::getenv("VPFD_RUN_ROOT"); root != nullptr && root[0] != '\0') {
    cfg.set("run.root", root);
  }
  return cfg;
}

void require_checkpoint(const std::string& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw DependencyError("missing checkpoint: " + path + " (produce it with `vpfd " + producer + "`)");
  }
}

Dataset load_data(const RunConfig& cfg, const ConditioningProviders& providers) {
  return load_dataset(cfg.run_root() + "/data", cfg.mel_config(), providers);
}

DistillConfig distill_config(const RunConfig& cfg) {
  DistillConfig d;
  d.epochs = cfg.integer("trainer.epochs");
  d.max_steps = cfg.integer("trainer.max_steps");
  d.batch = cfg.integer("trainer.batch");
  d.lr = cfg.real("trainer.lr");
  d.beta1 = cfg.real("trainer.adam_beta1");
  d.beta2 = cfg.real("trainer.adam_beta2");
  d.variant = parse_variant(cfg.str("disc.variant"));
  d.vpfd.L = cfg.integer("disc.vpfd_L");
  d.vpfd.n_resblocks = cfg.integer("disc.vpfd_resblocks");
  d.vpfd.kernel = cfg.integer("disc.vpfd_kernel");
  d.vpfd.channel_rule = cfg.str("disc.vpfd_channel_rule");
  d.mpd = cfg.mpd_config();
  d.mrd = cfg.mrd_config();
  d.meld_small_channels = cfg.integer("disc.meld_small_channels");
  d.meld_large_channels = cfg.integer("disc.meld_large_channels");
  d.extractor_pretrained = cfg.boolean("trainer.extractor_pretrained");
  d.extractor_frozen = cfg.boolean("trainer.extractor_frozen");
  d.student_t = cfg.integer("trainer.student_t");
  d.distill_l2 = cfg.str("trainer.distill_norm") == "l2";
  if (cfg.str("trainer.distill_norm") != "l1" && cfg.str("trainer.distill_norm") != "l2") {
    throw ConfigError("trainer.distill_norm must be l1 or l2");
  }
  d.weights.lambda_fm = cfg.real("trainer.lambda_fm");
  d.weights.lambda_distill = cfg.real("trainer.lambda_distill");
  d.crop_frames = cfg.integer("trainer.crop_frames");
  d.seed = cfg.seed();
  d.eval_every = cfg.integer("trainer.eval_every");
  d.eval_items = cfg.integer("trainer.eval_items");
  d.teacher_ref_steps = cfg.integer("trainer.teacher_ref_steps");
  d.checkpoint_every = cfg.integer("trainer.checkpoint_every");
  d.mel = cfg.mel_config();
  return d;
}

NoiseSchedule schedule_from(const RunConfig& cfg) {
  return make_schedule(cfg.integer("diffusion.steps"), cfg.real("diffusion.beta_start"),
                       cfg.real("diffusion.beta_end"));
}

int cmd_gen_data(const RunConfig& cfg) {
  const SyntheticCorpusSpec spec = cfg.corpus_spec();
  const std::vector<CorpusItem> items = generate_corpus(spec);
  const std::string dir = cfg.run_root() + "/data";
  write_corpus(dir, items);
  cfg.write_resolved(dir + "/config_resolved.txt");
  std::printf("wrote %zu utterances (%lld speakers) to %s\n", items.size(),
              static_cast<long long>(spec.n_speakers), dir.c_str());
  return 0;
}

int cmd_pretrain_vocoder(const RunConfig& cfg) {
  ConditioningProviders providers(cfg.cond_config(), cfg.integer("mel.n_mels"));
  const Dataset ds = load_data(cfg, providers);
  const VocoderConfig vc = cfg.vocoder_config();
  Vocoder vocoder(vc, Rng(cfg.seed()).fork(101).seed());

  const std::string dir = cfg.run_root() + "/vocoder";
  fs::create_directories(dir);
  VocoderPretrainConfig pc;
  pc.steps = cfg.integer("vocoder.pretrain_steps");
  pc.batch = cfg.integer("vocoder.batch");
  pc.crop_frames = cfg.integer("vocoder.crop_frames");
  pc.lr = cfg.real("vocoder.lr");
  pc.beta1 = cfg.real("vocoder.adam_beta1");
  pc.beta2 = cfg.real("vocoder.adam_beta2");
  pc.stft_resolutions = cfg.stft_list("vocoder.stft_loss_resolutions");
  pc.mel = cfg.mel_config();
  pc.seed = cfg.seed();
  pc.log_path = dir + "/losses.csv";

  const PretrainStats stats = pretrain_vocoder(vocoder, ds, pc);

  CheckpointData ck;
  ck.meta["kind"] = "vocoder";
  ck.meta["steps"] = std::to_string(stats.steps);
  ck.meta["initial_loss"] = std::to_string(stats.initial_loss);
  ck.meta["final_loss"] = std::to_string(stats.final_loss);
  ck.meta["upsample_rates"] = cfg.str("vocoder.upsample_rates");
  ck.meta["base_channels"] = cfg.str("vocoder.base_channels");
  store_params(ck, vocoder.params());
  save_checkpoint(cfg.vocoder_ckpt_path(), ck);
  cfg.write_resolved(dir + "/config_resolved.txt");
  std::printf("vocoder reconstruction loss: %.6f -> %.6f over %lld steps\n", stats.initial_loss,
              stats.final_loss, static_cast<long long>(stats.steps));
  return 0;
}

int cmd_pretrain_teacher(const RunConfig& cfg) {
  ConditioningProviders providers(cfg.cond_config(), cfg.integer("mel.n_mels"));
  const Dataset ds = load_data(cfg, providers);
  const NoiseSchedule sched = schedule_from(cfg);
  Denoiser teacher(cfg.denoiser_config(), Rng(cfg.seed()).fork(102).seed());

  const std::string dir = cfg.run_root() + "/teacher";
  fs::create_directories(dir);
  TeacherPretrainConfig tc;
  tc.steps = cfg.integer("teacher.steps");
  tc.batch = cfg.integer("teacher.batch");
  tc.crop_frames = cfg.integer("teacher.crop_frames");
  tc.lr = cfg.real("teacher.lr");
  tc.beta1 = cfg.real("teacher.adam_beta1");
  tc.beta2 = cfg.real("teacher.adam_beta2");
  tc.seed = cfg.seed();
  tc.log_path = dir + "/losses.csv";

  const PretrainStats stats = pretrain_teacher(teacher, sched, ds, tc);

  CheckpointData ck;
  ck.meta["kind"] = "teacher";
  ck.meta["steps"] = std::to_string(stats.steps);
  ck.meta["initial_eps_mse"] = std::to_string(stats.initial_loss);
  ck.meta["final_eps_mse"] = std::to_string(stats.final_loss);
  ck.meta["diffusion_steps"] = cfg.str("diffusion.steps");
  {
    const MelNorm norm = mel_stats(ds);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", norm.mean);
    ck.meta["mel_mean"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", norm.scale);
    ck.meta["mel_scale"] = buf;
  }
  store_params(ck, teacher.params());
  save_checkpoint(cfg.teacher_ckpt_path(), ck);
  cfg.write_resolved(dir + "/config_resolved.txt");
  std::printf("teacher held-out eps-MSE: %.6f -> %.6f over %lld steps\n", stats.initial_loss,
              stats.final_loss, static_cast<long long>(stats.steps));
  return 0;
}

int cmd_distill(const RunConfig& cfg) {
  require_checkpoint(cfg.vocoder_ckpt_path(), "pretrain-vocoder");
  require_checkpoint(cfg.teacher_ckpt_path(), "pretrain-teacher");
  ConditioningProviders providers(cfg.cond_config(), cfg.integer("mel.n_mels"));
  const Dataset ds = load_data(cfg, providers);
  const NoiseSchedule sched = schedule_from(cfg);

  DistillTrainer trainer(distill_config(cfg), ds, sched, cfg.denoiser_config(), cfg.vocoder_config(),
                         cfg.teacher_ckpt_path(), cfg.vocoder_ckpt_path(), &providers);
  const std::string dir = cfg.run_root() + "/distill";
  fs::create_directories(dir);
  cfg.write_resolved(dir + "/config_resolved.txt");
  trainer.run(dir);
  std::printf("distillation finished after %lld steps; outputs in %s\n",
              static_cast<long long>(trainer.steps_done()), dir.c_str());
  return 0;
}

int cmd_convert(const RunConfig& cfg, const std::string& source, const std::string& target,
                const std::string& out) {
  require_checkpoint(cfg.vocoder_ckpt_path(), "pretrain-vocoder");
  const std::string student_path = cfg.student_ckpt_path();
  if (!fs::exists(student_path)) {
    throw DependencyError("missing checkpoint: " + student_path + " (produce it with `vpfd distill`)");
  }

  ConditioningProviders providers(cfg.cond_config(), cfg.integer("mel.n_mels"));
  const NoiseSchedule sched = schedule_from(cfg);
  const CheckpointData student_ck = load_checkpoint(student_path);
  Denoiser student(cfg.denoiser_config(), 0);
  load_params(student_ck, student.params());
  Vocoder vocoder(cfg.vocoder_config(), 0);
  load_params(load_checkpoint(cfg.vocoder_ckpt_path()), vocoder.params());
  MelNorm norm;
  norm.mean = std::stod(student_ck.meta_or("mel_mean", "0"));
  norm.scale = std::stod(student_ck.meta_or("mel_scale", "1"));

  const Waveform src = load_wav(source);
  const Waveform tgt = load_wav(target);
  const Waveform converted = convert_voice(src, tgt, student, vocoder, providers, cfg.mel_config(), sched,
                                           cfg.integer("trainer.student_t"), cfg.seed(), norm);
  save_wav(converted, out);
  std::printf("converted %s -> %s (speaker from %s), %lld samples\n", source.c_str(), out.c_str(),
              target.c_str(), static_cast<long long>(converted.size()));
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  require_checkpoint(cfg.vocoder_ckpt_path(), "pretrain-vocoder");
  require_checkpoint(cfg.teacher_ckpt_path(), "pretrain-teacher");
  ConditioningProviders providers(cfg.cond_config(), cfg.integer("mel.n_mels"));
  const Dataset ds = load_data(cfg, providers);
  const NoiseSchedule sched = schedule_from(cfg);

  BenchConfig bc;
  bc.steps = cfg.integer("bench.steps");
  bc.reps = cfg.integer("bench.reps");
  bc.warmup = cfg.integer("bench.warmup");
  bc.batch = cfg.integer("bench.batch");
  bc.crop_frames = cfg.integer("bench.crop_frames");
  bc.early_divisor = cfg.integer("bench.early_divisor");
  bc.variants.clear();
  {
    std::stringstream ss(cfg.str("bench.variants"));
    std::string item;
    while (std::getline(ss, item, ',')) bc.variants.push_back(item);
  }

  const std::string dir = cfg.run_root() + "/bench";
  const std::vector<BenchRow> rows =
      run_bench(bc, distill_config(cfg), ds, sched, cfg.denoiser_config(), cfg.vocoder_config(),
                cfg.teacher_ckpt_path(), cfg.vocoder_ckpt_path());
  emit_report(rows, dir);
  cfg.write_resolved(dir + "/config_resolved.txt");
  std::printf("bench suite of %zu variants written to %s\n", rows.size(), dir.c_str());
  return 0;
}

int cmd_report(const RunConfig& cfg, std::string dir) {
  if (dir.empty()) dir = cfg.run_root() + "/bench";
  const std::vector<BenchRow> rows = load_raw_rows(dir + "/raw_rows.csv");
  emit_report(rows, dir);
  std::printf("report regenerated from %s/raw_rows.csv\n", dir.c_str());
  return 0;
}

int cmd_dump_arch(const RunConfig& cfg) {
  const DistillConfig d = distill_config(cfg);
  const VocoderConfig vc = cfg.vocoder_config();
  switch (d.variant) {
    case DiscVariant::Vpfd: {
      VpfdHead head(vc, d.vpfd, 0);
      std::fputs(head.dump_arch().c_str(), stdout);
      break;
    }
    case DiscVariant::Vwd:
    case DiscVariant::VwdNoMpd:
    case DiscVariant::VwdNoMrd: {
      if (d.variant != DiscVariant::VwdNoMpd) std::fputs(Mpd(d.mpd, 0).dump_arch().c_str(), stdout);
      if (d.variant != DiscVariant::VwdNoMrd) std::fputs(Mrd(d.mrd, 0).dump_arch().c_str(), stdout);
      break;
    }
    case DiscVariant::MeldSmall:
    case DiscVariant::MeldLarge: {
      MeldConfig mc;
      mc.channels = d.variant == DiscVariant::MeldSmall ? d.meld_small_channels : d.meld_large_channels;
      std::fputs(Meld(mc, cfg.integer("mel.n_mels"), 0).dump_arch().c_str(), stdout);
      break;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-step voice conversion distillation with vocoder-feature discriminators"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "config file (key = value lines)");
  app.add_option("--set", sets, "override a config key (key=value), repeatable");
  app.footer("config keys (defaults shown; override with --config/--set):\n" + RunConfig::schema_help());

  auto* gen = app.add_subcommand("gen-data", "write the deterministic synthetic corpus");
  auto* pv = app.add_subcommand("pretrain-vocoder", "reconstruction-pretrain the vocoder");
  auto* pt = app.add_subcommand("pretrain-teacher", "train the multi-step teacher");
  auto* di = app.add_subcommand("distill", "adversarially distill the one-step student");
  auto* cv = app.add_subcommand("convert", "one-shot voice conversion");
  std::string src_path, tgt_path, out_path = "converted.wav";
  cv->add_option("--source", src_path, "source speaker wav")->required();
  cv->add_option("--target", tgt_path, "target speaker wav")->required();
  cv->add_option("--out", out_path, "output wav path");
  auto* be = app.add_subcommand("bench", "measure training cost across discriminator variants");
  auto* re = app.add_subcommand("report", "regenerate bench tables from saved raw rows");
  std::string report_dir;
  re->add_option("--dir", report_dir, "bench output directory (default <run.root>/bench)");
  auto* da = app.add_subcommand("dump-arch", "print the configured discriminator architecture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fprintf(stderr, "error: kind=config msg=\"%s\"\n", e.what());
    return 2;
  }

  try {
    const RunConfig cfg = build_config(config_path, sets);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (pv->parsed()) return cmd_pretrain_vocoder(cfg);
    if (pt->parsed()) return cmd_pretrain_teacher(cfg);
    if (di->parsed()) return cmd_distill(cfg);
    if (cv->parsed()) return cmd_convert(cfg, src_path, tgt_path, out_path);
    if (be->parsed()) return cmd_bench(cfg);
    if (re->parsed()) return cmd_report(cfg, report_dir);
    if (da->parsed()) return cmd_dump_arch(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: kind=config msg=\"%s\"\n", e.what());
    return 2;
  } catch (const DependencyError& e) {
    std::fprintf(stderr, "error: kind=dependency msg=\"%s\"\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: kind=numeric msg=\"%s\"\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: kind=runtime msg=\"%s\"\n", e.what());
    return 1;
  }
  return 0;
}
