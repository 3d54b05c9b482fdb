#include "vpfd/bench.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vpfd/errors.hpp"

namespace vpfd {

namespace fs = std::filesystem;
using nn::Index;

double peak_rss_bytes() {
  struct rusage ru;
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_maxrss) * 1024.0;
}

DistillConfig variant_config(const std::string& key, const DistillConfig& base) {
  DistillConfig cfg = base;
  if (key.rfind("vpfd", 0) == 0 && key.size() > 4) {
    cfg.variant = DiscVariant::Vpfd;
    cfg.vpfd.L = std::stoll(key.substr(4));
  } else if (key == "vwd" || key == "early") {
    cfg.variant = DiscVariant::Vwd;
  } else if (key == "vwd_no_mpd") {
    cfg.variant = DiscVariant::VwdNoMpd;
  } else if (key == "vwd_no_mrd") {
    cfg.variant = DiscVariant::VwdNoMrd;
  } else if (key == "meld_small") {
    cfg.variant = DiscVariant::MeldSmall;
  } else if (key == "meld_large") {
    cfg.variant = DiscVariant::MeldLarge;
  } else {
    throw ConfigError("unknown bench variant: " + key);
  }
  return cfg;
}

namespace {

Index conv_out_len(Index in, Index kernel, Index stride, Index pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

double head_plan_elements(const std::vector<LayerDesc>& plan, Index h0, Index w0) {
  double total = 0.0;
  Index h = h0, w = w0;
  for (const LayerDesc& l : plan) {
    if (l.kind == "conv2d") {
      h = conv_out_len(h, l.kernel_h, l.stride_h, (l.kernel_h - 1) / 2);
      w = conv_out_len(w, l.kernel_w, l.stride_w, (l.kernel_w - 1) / 2);
      total += static_cast<double>(l.out_ch * h * w);
    }
  }
  return total;
}

// conv outputs of the extractor up to level L (resblock internals included)
double extractor_elements(const VocoderConfig& v, Index L, Index frames, bool include_post) {
  double total = static_cast<double>(v.channels_at(0) * frames);  // input conv
  Index len = frames;
  const Index res_convs =
      2 * static_cast<Index>(v.resblock_kernels.size() * v.resblock_dilations.size());
  for (Index st = 1; st <= L; ++st) {
    len *= v.upsample_rates[static_cast<size_t>(st - 1)];
    const Index c = v.channels_at(st);
    total += static_cast<double>(c * len);  // transposed conv
    const bool resblocks = v.tap_after_resblocks || st < L || include_post;
    if (resblocks) total += static_cast<double>(res_convs * c * len);
  }
  if (include_post) total += static_cast<double>(len);  // waveform map
  return total;
}

}  // namespace

double analytic_footprint_bytes(const std::string& key, const DistillConfig& base,
                                const VocoderConfig& voc_cfg, Index n_mels, Index batch, Index frames) {
  const DistillConfig cfg = variant_config(key, base);
  double elements = 0.0;
  switch (cfg.variant) {
    case DiscVariant::Vpfd: {
      elements += extractor_elements(voc_cfg, cfg.vpfd.L, frames, false);
      VpfdHead head(voc_cfg, cfg.vpfd, 0);
      Index len = frames;
      for (Index i = 0; i < cfg.vpfd.L; ++i) len *= voc_cfg.upsample_rates[static_cast<size_t>(i)];
      Index cursor = len;
      for (const LayerDesc& l : head.plan()) {
        if (l.role == "down") cursor /= l.stride_h;
        elements += static_cast<double>(l.out_ch * cursor);
      }
      break;
    }
    case DiscVariant::Vwd:
    case DiscVariant::VwdNoMpd:
    case DiscVariant::VwdNoMrd: {
      elements += extractor_elements(voc_cfg, voc_cfg.stages(), frames, true);
      const Index T = frames * voc_cfg.hop();
      if (cfg.variant != DiscVariant::VwdNoMpd) {
        Mpd mpd(cfg.mpd, 0);
        for (size_t pi = 0; pi < cfg.mpd.periods.size(); ++pi) {
          const Index p = cfg.mpd.periods[pi];
          elements += head_plan_elements(mpd.plans()[pi], (T + p - 1) / p, p);
        }
      }
      if (cfg.variant != DiscVariant::VwdNoMrd) {
        Mrd mrd(cfg.mrd, 0);
        for (size_t ri = 0; ri < cfg.mrd.resolutions.size(); ++ri) {
          const StftRes& r = cfg.mrd.resolutions[ri];
          const Index bins = r.fft / 2 + 1;
          const Index nframes = T / r.hop + 1;
          elements += static_cast<double>(bins * nframes);  // magnitude map
          elements += head_plan_elements(mrd.plans()[ri], bins, nframes);
        }
      }
      break;
    }
    case DiscVariant::MeldSmall:
    case DiscVariant::MeldLarge: {
      MeldConfig mc;
      mc.channels =
          cfg.variant == DiscVariant::MeldSmall ? cfg.meld_small_channels : cfg.meld_large_channels;
      Meld meld(mc, n_mels, 0);
      elements += head_plan_elements(meld.plan(), n_mels, frames);
      break;
    }
  }
  return elements * static_cast<double>(batch) * 8.0;
}

std::vector<BenchRow> run_bench(const BenchConfig& bcfg, const DistillConfig& base, const Dataset& ds,
                                const NoiseSchedule& sched, const DenoiserConfig& dn_cfg,
                                const VocoderConfig& voc_cfg, const std::string& teacher_ckpt,
                                const std::string& vocoder_ckpt) {
  std::vector<BenchRow> rows;
  for (const std::string& key : bcfg.variants) {
    BenchRow row;
    row.name = key;
    row.reps = bcfg.reps;
    row.steps_run = key == "early" ? std::max<Index>(1, bcfg.steps / bcfg.early_divisor) : bcfg.steps;
    try {
      DistillConfig cfg = variant_config(key, base);
      cfg.batch = bcfg.batch;
      cfg.crop_frames = bcfg.crop_frames;
      row.analytic_bytes =
          analytic_footprint_bytes(key, base, voc_cfg, dn_cfg.n_mels, bcfg.batch, bcfg.crop_frames);

      const double rss_before = peak_rss_bytes();
      std::vector<double> walls;
      double proxy = 0.0;
      for (Index rep = 0; rep < bcfg.reps; ++rep) {
        DistillTrainer trainer(cfg, ds, sched, dn_cfg, voc_cfg, teacher_ckpt, vocoder_ckpt);
        for (Index w = 0; w < bcfg.warmup; ++w) trainer.step();
        const auto t0 = std::chrono::steady_clock::now();
        for (Index s = 0; s < row.steps_run; ++s) trainer.step();
        const auto t1 = std::chrono::steady_clock::now();
        walls.push_back(std::chrono::duration<double>(t1 - t0).count());
        if (rep == bcfg.reps - 1) proxy = trainer.evaluate().mel_l1_teacher;
      }
      std::sort(walls.begin(), walls.end());
      row.wall_min_s = walls.front();
      row.wall_max_s = walls.back();
      row.wall_median_s = walls[walls.size() / 2];
      row.proxy_mel_l1 = proxy;
      row.rss_delta_bytes = std::max(0.0, peak_rss_bytes() - rss_before);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string csv_escape(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',' || c == '\n') c = ';';
  }
  return out;
}

std::string pretty_name(const std::string& key) {
  if (key == "vwd") return "FVG (VWD)";
  if (key == "early") return "FVG_early";
  if (key == "vwd_no_mrd") return "FVG w/o MRD";
  if (key == "vwd_no_mpd") return "FVG w/o MPD";
  if (key == "meld_small") return "FVG+MelD_small";
  if (key == "meld_large") return "FVG+MelD_large";
  if (key.rfind("vpfd", 0) == 0) return "FVG+VPFD_" + key.substr(4);
  return key;
}

const BenchRow* find_row(const std::vector<BenchRow>& rows, const std::string& name) {
  for (const BenchRow& r : rows) {
    if (r.name == name && !r.failed) return &r;
  }
  return nullptr;
}

void write_table(std::ofstream& f, const std::vector<BenchRow>& rows,
                 const std::vector<std::string>& keys) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-18s %12s %12s %14s %14s %8s\n", "model", "mel_l1*", "time_s",
                "mem_analytic_MB", "mem_rss_MB", "steps");
  f << buf;
  for (const std::string& k : keys) {
    const BenchRow* r = nullptr;
    for (const BenchRow& row : rows) {
      if (row.name == k) r = &row;
    }
    if (r == nullptr) continue;
    if (r->failed) {
      std::snprintf(buf, sizeof(buf), "%-18s %12s  FAILED: %s\n", pretty_name(k).c_str(), "-",
                    r->error.c_str());
      f << buf;
      continue;
    }
    std::snprintf(buf, sizeof(buf), "%-18s %12.6f %12.3f %14.3f %14.3f %8lld\n", pretty_name(k).c_str(),
                  r->proxy_mel_l1, r->wall_median_s, r->analytic_bytes / 1048576.0,
                  r->rss_delta_bytes / 1048576.0, static_cast<long long>(r->steps_run));
    f << buf;
  }
  f << "\n* mel-L1 of the student one-step output against the teacher multi-step reference\n";
}

}  // namespace

void write_raw_rows(const std::vector<BenchRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write bench rows: " + path);
  f << "name,steps,reps,wall_median_s,wall_min_s,wall_max_s,rss_delta_bytes,analytic_bytes,proxy_mel_l1,"
       "failed,error\n";
  char buf[512];
  for (const BenchRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s\n",
                  r.name.c_str(), static_cast<long long>(r.steps_run), static_cast<long long>(r.reps),
                  r.wall_median_s, r.wall_min_s, r.wall_max_s, r.rss_delta_bytes, r.analytic_bytes,
                  r.proxy_mel_l1, r.failed ? 1 : 0, csv_escape(r.error).c_str());
    f << buf;
  }
}

std::vector<BenchRow> load_raw_rows(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DependencyError("missing bench rows: " + path + " (run bench first)");
  std::vector<BenchRow> rows;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    BenchRow r;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw DataError("malformed bench row: " + line);
      return field;
    };
    r.name = next();
    r.steps_run = std::stoll(next());
    r.reps = std::stoll(next());
    r.wall_median_s = std::stod(next());
    r.wall_min_s = std::stod(next());
    r.wall_max_s = std::stod(next());
    r.rss_delta_bytes = std::stod(next());
    r.analytic_bytes = std::stod(next());
    r.proxy_mel_l1 = std::stod(next());
    r.failed = std::stoll(next()) != 0;
    std::getline(ss, r.error);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("bench rows file is empty: " + path);
  return rows;
}

void emit_report(const std::vector<BenchRow>& rows, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_raw_rows(rows, (fs::path(out_dir) / "raw_rows.csv").string());

  {
    std::ofstream f(fs::path(out_dir) / "table1_like.txt");
    f << "Discriminator cost vs feature depth (fixed generator, data, seed, steps)\n\n";
    std::vector<std::string> keys{"vwd"};
    for (const BenchRow& r : rows) {
      if (r.name.rfind("vpfd", 0) == 0) keys.push_back(r.name);
    }
    write_table(f, rows, keys);
  }
  {
    std::ofstream f(fs::path(out_dir) / "table3_like.txt");
    f << "Training acceleration alternatives\n\n";
    write_table(f, rows, {"vwd", "early", "vwd_no_mrd", "vwd_no_mpd", "meld_small", "meld_large", "vpfd1"});
  }
  {
    std::ofstream f(fs::path(out_dir) / "ratios.csv");
    f << "name,value\n";
    char buf[128];
    const BenchRow* vwd = find_row(rows, "vwd");
    const BenchRow* v1 = find_row(rows, "vpfd1");
    if (vwd != nullptr && v1 != nullptr) {
      std::snprintf(buf, sizeof(buf), "time_vwd_over_vpfd1,%.17g\n", vwd->wall_median_s / v1->wall_median_s);
      f << buf;
      std::snprintf(buf, sizeof(buf), "mem_analytic_vwd_over_vpfd1,%.17g\n",
                    vwd->analytic_bytes / v1->analytic_bytes);
      f << buf;
    }
    for (const BenchRow& r : rows) {
      if (r.failed || vwd == nullptr || r.name.rfind("vpfd", 0) != 0) continue;
      std::snprintf(buf, sizeof(buf), "time_vwd_over_%s,%.17g\n", r.name.c_str(),
                    vwd->wall_median_s / r.wall_median_s);
      f << buf;
    }
  }
}

}  // namespace vpfd
