#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "vpfd/bench.hpp"

using namespace vpfd;
using namespace vpfd::testutil;
using nn::Index;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

DistillConfig base_config() {
  DistillConfig c;
  c.batch = 2;
  c.crop_frames = 16;
  c.vpfd.L = 1;
  c.mpd = {.periods = {2, 3}, .channels = {4, 8}};
  c.mrd = {.resolutions = {{64, 16, 64}}, .channels = 4};
  c.meld_small_channels = 4;
  c.meld_large_channels = 8;
  c.eval_items = 2;
  c.teacher_ref_steps = 5;
  c.seed = 7;
  c.mel = tiny_mel();
  return c;
}

}  // namespace

TEST_CASE("analytic footprint is strictly monotone in L and VWD dominates") {
  VocoderConfig vc;
  vc.n_mels = 80;
  vc.upsample_rates = {4, 4, 2, 2};
  vc.base_channels = 64;
  vc.resblock_kernels = {3, 7};
  vc.resblock_dilations = {1, 3};
  DistillConfig base = base_config();

  double prev = -1.0;
  std::vector<double> vals;
  for (Index L = 0; L <= 4; ++L) {
    const double f =
        analytic_footprint_bytes("vpfd" + std::to_string(L), base, vc, 80, 8, 128);
    CHECK(f > prev);
    prev = f;
    vals.push_back(f);
  }
  const double vwd = analytic_footprint_bytes("vwd", base, vc, 80, 8, 128);
  CHECK(vwd > vals[1]);

  // pure function of configs: identical on recomputation
  CHECK(analytic_footprint_bytes("vpfd2", base, vc, 80, 8, 128) == vals[2]);
  // scales linearly with batch
  CHECK(analytic_footprint_bytes("vpfd2", base, vc, 80, 16, 128) == doctest::Approx(2.0 * vals[2]));
}

TEST_CASE("suite runs every variant once with timing and a quality proxy") {
  Dataset ds = tiny_dataset();
  NoiseSchedule sched = make_schedule(20, 1e-3, 0.05);
  DenoiserConfig dn = tiny_denoiser();
  VocoderConfig vc = tiny_vocoder();
  const std::string dir = tmp_dir("bench_fixture");
  Denoiser teacher(dn, 71);
  const std::string teacher_ckpt = save_teacher_ckpt(teacher, dir);
  Vocoder voc(vc, 72);
  const std::string vocoder_ckpt = save_vocoder_ckpt(voc, dir);

  BenchConfig bc;
  bc.variants = {"vpfd0", "vpfd1", "vwd", "early", "meld_small"};
  bc.steps = 4;
  bc.reps = 3;
  bc.warmup = 1;
  bc.batch = 2;
  bc.crop_frames = 16;
  bc.early_divisor = 4;

  DistillConfig base = base_config();
  const auto rows = run_bench(bc, base, ds, sched, dn, vc, teacher_ckpt, vocoder_ckpt);
  REQUIRE(rows.size() == 5);
  for (const auto& r : rows) {
    INFO(r.name, " error=", r.error);
    CHECK_FALSE(r.failed);
    CHECK(r.wall_median_s >= r.wall_min_s);
    CHECK(r.wall_max_s >= r.wall_median_s);
    CHECK(std::isfinite(r.proxy_mel_l1));
    CHECK(r.analytic_bytes > 0);
  }
  CHECK(rows[3].name == "early");
  CHECK(rows[3].steps_run == 1);  // 4 / 4

  // emit + reload + re-emit is byte-identical
  const std::string out1 = tmp_dir("bench_out1");
  const std::string out2 = tmp_dir("bench_out2");
  emit_report(rows, out1);
  const auto reloaded = load_raw_rows(out1 + "/raw_rows.csv");
  emit_report(reloaded, out2);
  for (const char* f : {"/raw_rows.csv", "/table1_like.txt", "/table3_like.txt", "/ratios.csv"}) {
    CHECK(slurp(out1 + f) == slurp(out2 + f));
  }

  // ratio cells equal the quotient of the underlying cells
  const BenchRow* vwd = nullptr;
  const BenchRow* v1 = nullptr;
  for (const auto& r : rows) {
    if (r.name == "vwd") vwd = &r;
    if (r.name == "vpfd1") v1 = &r;
  }
  REQUIRE(vwd != nullptr);
  REQUIRE(v1 != nullptr);
  std::ifstream rf(out1 + "/ratios.csv");
  std::string line;
  std::getline(rf, line);  // header
  bool found_time = false;
  while (std::getline(rf, line)) {
    const size_t comma = line.find(',');
    if (line.substr(0, comma) == "time_vwd_over_vpfd1") {
      found_time = true;
      const double got = std::stod(line.substr(comma + 1));
      CHECK(std::abs(got - vwd->wall_median_s / v1->wall_median_s) < 1e-9);
    }
  }
  CHECK(found_time);
}

TEST_CASE("zero timed steps produce a near-zero wall time row") {
  Dataset ds = tiny_dataset();
  NoiseSchedule sched = make_schedule(20, 1e-3, 0.05);
  DenoiserConfig dn = tiny_denoiser();
  VocoderConfig vc = tiny_vocoder();
  const std::string dir = tmp_dir("bench_zero");
  Denoiser teacher(dn, 71);
  Vocoder voc(vc, 72);

  BenchConfig bc;
  bc.variants = {"vpfd1"};
  bc.steps = 0;
  bc.reps = 3;
  bc.warmup = 0;
  bc.batch = 2;
  bc.crop_frames = 16;
  bc.early_divisor = 10;

  const auto rows = run_bench(bc, base_config(), ds, sched, dn, vc, save_teacher_ckpt(teacher, dir),
                              save_vocoder_ckpt(voc, dir));
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].failed);
  CHECK(rows[0].steps_run == 0);
  CHECK(rows[0].wall_median_s < 0.05);
}

TEST_CASE("a variant that cannot build is marked failed and the suite continues") {
  Dataset ds = tiny_dataset();
  NoiseSchedule sched = make_schedule(20, 1e-3, 0.05);
  DenoiserConfig dn = tiny_denoiser();
  VocoderConfig vc = tiny_vocoder();  // only 2 stages
  const std::string dir = tmp_dir("bench_fail");
  Denoiser teacher(dn, 71);
  Vocoder voc(vc, 72);

  BenchConfig bc;
  bc.variants = {"vpfd4", "vpfd1"};  // vpfd4 exceeds the stage count
  bc.steps = 1;
  bc.reps = 1;
  bc.warmup = 0;
  bc.batch = 2;
  bc.crop_frames = 16;

  const auto rows = run_bench(bc, base_config(), ds, sched, dn, vc, save_teacher_ckpt(teacher, dir),
                              save_vocoder_ckpt(voc, dir));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].failed);
  CHECK_FALSE(rows[0].error.empty());
  CHECK_FALSE(rows[1].failed);
}
