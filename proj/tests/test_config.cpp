#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "test_util.hpp"
#include "vpfd/checkpoint.hpp"
#include "vpfd/config.hpp"
#include "vpfd/errors.hpp"

using namespace vpfd;
using namespace vpfd::testutil;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  const char* bin = std::getenv("VPFD_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "VPFD_BIN must point at the built binary");
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string text;
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe) != nullptr) text += buf;
  const int status = pclose(pipe);
  if (out != nullptr) *out = text;
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("defaults, overrides, and unknown-key rejection") {
  RunConfig cfg = RunConfig::defaults();
  CHECK(cfg.integer("mel.n_mels") == 80);
  CHECK(cfg.real("trainer.lambda_distill") == 45.0);
  CHECK(cfg.boolean("trainer.extractor_frozen"));

  cfg.set("mel.n_mels", "40");
  CHECK(cfg.integer("mel.n_mels") == 40);
  cfg.set_kv("trainer.batch=8");
  CHECK(cfg.integer("trainer.batch") == 8);

  CHECK_THROWS_AS(cfg.set("mel.bogus", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set_kv("nonsense"), ConfigError);
  CHECK_THROWS_AS(cfg.integer("trainer.distill_norm"), ConfigError);
  CHECK_THROWS_AS((void)cfg.str("not.a.key"), ConfigError);
}

TEST_CASE("config file round trip preserves the resolved document") {
  RunConfig cfg = RunConfig::defaults();
  cfg.set("run.seed", "99");
  cfg.set("vocoder.base_channels", "32");
  const std::string dir = tmp_dir("config_rt");
  cfg.write_resolved(dir + "/resolved.txt");

  RunConfig re = RunConfig::defaults();
  re.load_file(dir + "/resolved.txt");
  CHECK(re.resolved_text() == cfg.resolved_text());

  // files with comments and unknown keys
  {
    std::ofstream f(dir + "/bad.cfg");
    f << "# comment\nmel.n_mels = 40\nunknown.key = 3\n";
  }
  RunConfig bad = RunConfig::defaults();
  CHECK_THROWS_AS(bad.load_file(dir + "/bad.cfg"), ConfigError);
  CHECK_THROWS_AS(bad.load_file(dir + "/does_not_exist.cfg"), ConfigError);
}

TEST_CASE("typed builders validate cross-field constraints") {
  RunConfig cfg = RunConfig::defaults();
  CHECK(cfg.mel_config().n_mels == 80);
  CHECK(cfg.vocoder_config().hop() == 64);

  cfg.set("vocoder.upsample_rates", "4,4");  // product 16 != hop 64
  CHECK_THROWS_AS(cfg.vocoder_config(), ConfigError);
  cfg.set("mel.hop", "16");
  CHECK(cfg.vocoder_config().hop() == 16);

  cfg.set("mel.fft_size", "100");  // not a power of two
  CHECK_THROWS_AS(cfg.mel_config(), ConfigError);
}

TEST_CASE("checkpoint container round-trips bit-exactly and rejects damage") {
  const std::string dir = tmp_dir("ckpt_rt");
  CheckpointData ck;
  ck.meta["kind"] = "test";
  ck.meta["note"] = "with = signs = ok";
  Rng rng(8);
  ck.arrays.emplace_back("a.v", nn::Tensor::randn({3, 2, 5}, rng));
  ck.arrays.emplace_back("b.g", nn::Tensor::randn({7}, rng));
  save_checkpoint(dir + "/x.ckpt", ck);

  CheckpointData re = load_checkpoint(dir + "/x.ckpt");
  CHECK(re.meta.at("kind") == "test");
  REQUIRE(re.arrays.size() == 2);
  CHECK(re.arrays[0].first == "a.v");
  CHECK(re.arrays[0].second.shape == std::vector<nn::Index>{3, 2, 5});
  CHECK(re.arrays[0].second.data == ck.arrays[0].second.data);
  CHECK(re.arrays[1].second.data == ck.arrays[1].second.data);

  // byte-identical re-save
  save_checkpoint(dir + "/y.ckpt", re);
  CHECK(slurp(dir + "/x.ckpt") == slurp(dir + "/y.ckpt"));

  // truncation is detected
  const std::string full = slurp(dir + "/x.ckpt");
  {
    std::ofstream f(dir + "/trunc.ckpt", std::ios::binary);
    f.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/trunc.ckpt"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir + "/absent.ckpt"), DependencyError);
}

TEST_CASE("cli: help enumerates config keys and exits zero") {
  std::string out;
  CHECK(run_cli("--help") == 0);
  run_cli("--help", &out);
  CHECK(out.find("gen-data") != std::string::npos);
  CHECK(out.find("trainer.lambda_distill") != std::string::npos);
  CHECK(out.find("vocoder.upsample_rates") != std::string::npos);
}

TEST_CASE("cli: exit codes map error categories") {
  const std::string root = tmp_dir("cli_root");
  std::string out;

  // unknown config key -> 2
  CHECK(run_cli("gen-data --set bogus.key=1 --set run.root=" + root, &out) == 2);
  CHECK(out.find("kind=config") != std::string::npos);

  // missing student checkpoint -> 3, message names the distill step
  const std::string empty_root = tmp_dir("cli_empty");
  const int code = run_cli("convert --source a.wav --target b.wav --set run.root=" + empty_root, &out);
  CHECK(code == 3);
  CHECK(out.find("kind=dependency") != std::string::npos);

  // report on an empty suite directory -> 3 with the expected path
  CHECK(run_cli("report --dir " + tmp_dir("cli_empty_bench"), &out) == 3);
  CHECK(out.find("raw_rows.csv") != std::string::npos);
}

TEST_CASE("cli: gen-data writes corpus + manifest and dump-arch prints the head") {
  const std::string root = tmp_dir("cli_gen");
  std::string out;
  const int code = run_cli("gen-data --set run.root=" + root +
                               " --set data.n_speakers=2 --set data.sentences_per_speaker=2"
                               " --set data.duration_s=0.3",
                           &out);
  CHECK(code == 0);
  CHECK(std::filesystem::exists(root + "/data/manifest.tsv"));
  CHECK(std::filesystem::exists(root + "/data/s0_u0.wav"));
  CHECK(std::filesystem::exists(root + "/data/config_resolved.txt"));
  const std::string manifest = slurp(root + "/data/manifest.tsv");
  CHECK(manifest.find("s1_u1.wav\t1\t1") != std::string::npos);

  CHECK(run_cli("dump-arch --set disc.vpfd_L=2", &out) == 0);
  CHECK(out.find("arch kind=vpfd_head L=2") != std::string::npos);
  CHECK(out.find("role=down") != std::string::npos);

  // environment variable overrides the run root
  const std::string env_root = tmp_dir("cli_env");
  const char* bin = std::getenv("VPFD_BIN");
  REQUIRE(bin != nullptr);
  const std::string cmd = "VPFD_RUN_ROOT=" + env_root + " " + bin +
                          " gen-data --set run.root=/nonexistent_ignored --set data.duration_s=0.3 >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(std::filesystem::exists(env_root + "/data/manifest.tsv"));
}
