#pragma once

#include <string>
#include <vector>

#include "vpfd/distill.hpp"

namespace vpfd {

// Suite rows: vpfd0..vpfdN (feature heads by depth), vwd (full waveform
// baseline), early (vwd with a reduced step budget), vwd_no_mpd / vwd_no_mrd,
// meld_small / meld_large.
struct BenchConfig {
  std::vector<std::string> variants{"vpfd0", "vpfd1", "vpfd2", "vpfd3", "vpfd4",
                                    "vwd",   "early", "vwd_no_mrd", "vwd_no_mpd",
                                    "meld_small", "meld_large"};
  nn::Index steps = 200;
  nn::Index reps = 3;
  nn::Index warmup = 3;
  nn::Index batch = 8;
  nn::Index crop_frames = 128;
  nn::Index early_divisor = 10;
};

struct BenchRow {
  std::string name;  // suite key, e.g. "vpfd1"
  nn::Index steps_run = 0;
  nn::Index reps = 0;
  double wall_median_s = 0.0;
  double wall_min_s = 0.0;
  double wall_max_s = 0.0;
  double rss_delta_bytes = 0.0;   // best-effort process peak-RSS growth
  double analytic_bytes = 0.0;    // machine-independent activation accounting
  double proxy_mel_l1 = 0.0;      // quality proxy after the timed steps
  bool failed = false;
  std::string error;
};

// Sum of conv-output elements (x batch x 8 bytes) along the discriminator
// path per training item pass: extractor maps, spectrogram maps, and head
// layer outputs. Pure function of the configs.
double analytic_footprint_bytes(const std::string& variant_key, const DistillConfig& base,
                                const VocoderConfig& voc_cfg, nn::Index n_mels, nn::Index batch,
                                nn::Index frames);

// Applies a suite key to the base distillation config.
DistillConfig variant_config(const std::string& variant_key, const DistillConfig& base);

std::vector<BenchRow> run_bench(const BenchConfig& bcfg, const DistillConfig& base, const Dataset& ds,
                                const NoiseSchedule& sched, const DenoiserConfig& dn_cfg,
                                const VocoderConfig& voc_cfg, const std::string& teacher_ckpt,
                                const std::string& vocoder_ckpt);

void write_raw_rows(const std::vector<BenchRow>& rows, const std::string& path);
std::vector<BenchRow> load_raw_rows(const std::string& path);

// raw_rows.csv, table1_like.txt, table3_like.txt, ratios.csv; pure function of
// the rows, so regeneration from the saved raw rows is byte-identical.
void emit_report(const std::vector<BenchRow>& rows, const std::string& out_dir);

double peak_rss_bytes();

}  // namespace vpfd
