#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "vpfd/distill.hpp"
#include "vpfd/errors.hpp"

using namespace vpfd;
using namespace vpfd::testutil;
using nn::Index;
using nn::Tensor;

namespace {

struct Fixture {
  Dataset ds = tiny_dataset();
  NoiseSchedule sched = make_schedule(20, 1e-3, 0.05);
  DenoiserConfig dn = tiny_denoiser();
  VocoderConfig vc = tiny_vocoder();
  std::string dir;
  std::string teacher_ckpt;
  std::string vocoder_ckpt;

  explicit Fixture(const std::string& name) : dir(tmp_dir(name)) {
    Denoiser teacher(dn, 71);
    teacher_ckpt = save_teacher_ckpt(teacher, dir);
    Vocoder voc(vc, 72);
    vocoder_ckpt = save_vocoder_ckpt(voc, dir);
  }

  DistillConfig config(DiscVariant variant = DiscVariant::Vpfd) const {
    DistillConfig c;
    c.batch = 3;
    c.crop_frames = 16;
    c.variant = variant;
    c.vpfd.L = 1;
    c.mpd = {.periods = {2, 3}, .channels = {4, 8}};
    c.mrd = {.resolutions = {{64, 16, 64}}, .channels = 4};
    c.meld_small_channels = 4;
    c.meld_large_channels = 8;
    c.eval_items = 2;
    c.teacher_ref_steps = 5;
    c.seed = 2024;
    c.mel = tiny_mel();
    return c;
  }

  DistillTrainer trainer(const DistillConfig& c) const {
    return DistillTrainer(c, ds, sched, dn, vc, teacher_ckpt, vocoder_ckpt);
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("student initialization copies the teacher bit-exactly") {
  Fixture fx("init_student");
  DistillTrainer tr = fx.trainer(fx.config());
  CHECK(params_equal(tr.student().params(), tr.teacher().params()));

  // identical outputs right after init
  Rng rng(4);
  Tensor x = Tensor::randn({1, fx.dn.n_mels, 16}, rng, 0.5);
  Tensor p = Tensor::randn({1, fx.dn.content_dim, 16}, rng, 0.5);
  Tensor s = Tensor::randn({1, fx.dn.speaker_dim}, rng, 0.5);
  std::vector<Index> t{3};
  Tensor ys = tr.student().infer(x, p, s, t);
  Tensor yt = tr.teacher().infer(x, p, s, t);
  for (Index i = 0; i < ys.numel(); ++i) CHECK(std::abs(ys.at(i) - yt.at(i)) < 1e-7);

  // one update later at least one parameter differs
  tr.step();
  CHECK_FALSE(params_equal(tr.student().params(), tr.teacher().params()));
}

TEST_CASE("one_step_generate: shape, determinism, and composition contract") {
  Fixture fx("one_step");
  DistillTrainer tr = fx.trainer(fx.config());
  Rng rng(5);
  Tensor x_r = Tensor::randn({2, fx.dn.n_mels, 16}, rng, 0.5);
  Tensor p = Tensor::randn({2, fx.dn.content_dim, 16}, rng, 0.5);
  Tensor s = Tensor::randn({2, fx.dn.speaker_dim}, rng, 0.5);
  Tensor eps = Tensor::randn(x_r.shape, rng);
  const Index t_s = fx.sched.steps();

  Tensor a = one_step_generate(tr.student(), x_r, p, s, fx.sched, t_s, eps);
  Tensor b = one_step_generate(tr.student(), x_r, p, s, fx.sched, t_s, eps);
  CHECK(a.shape == x_r.shape);
  CHECK(a.data == b.data);

  const std::vector<Index> tv(2, t_s);
  Tensor x_t = diffuse(x_r, tv, eps, fx.sched);
  Tensor manual = reverse_mu(x_t, tv, tr.student().infer(x_t, p, s, tv), fx.sched);
  CHECK(a.data == manual.data);

  CHECK_THROWS_AS(one_step_generate(tr.student(), x_r, p, s, fx.sched, 999, eps), std::out_of_range);
}

TEST_CASE("freeze contract: frozen extractor is byte-identical over steps, unfrozen is not") {
  Fixture fx("freeze");
  {
    DistillConfig c = fx.config();
    c.extractor_frozen = true;
    DistillTrainer tr = fx.trainer(c);
    auto before = snapshot_params(tr.extractor()->params());
    for (int i = 0; i < 3; ++i) tr.step();
    CHECK(snapshot_equal(before, tr.extractor()->params()));
  }
  {
    DistillConfig c = fx.config();
    c.extractor_frozen = false;
    DistillTrainer tr = fx.trainer(c);
    auto before = snapshot_params(tr.extractor()->params());
    tr.step();
    CHECK_FALSE(snapshot_equal(before, tr.extractor()->params()));
  }
}

TEST_CASE("pretrained flag selects vocoder-checkpoint initialization") {
  Fixture fx("pretrained_flag");
  Vocoder reference(fx.vc, 1, 1);
  load_params(load_checkpoint(fx.vocoder_ckpt), reference.params());
  {
    DistillConfig c = fx.config();
    c.extractor_pretrained = true;
    DistillTrainer tr = fx.trainer(c);
    CHECK(params_equal(tr.extractor()->params(), reference.params()));
  }
  {
    DistillConfig c = fx.config();
    c.extractor_pretrained = false;
    DistillTrainer tr = fx.trainer(c);
    CHECK_FALSE(params_equal(tr.extractor()->params(), reference.params()));
  }
}

TEST_CASE("teacher is never updated during distillation") {
  Fixture fx("teacher_frozen");
  DistillTrainer tr = fx.trainer(fx.config());
  auto before = snapshot_params(tr.teacher().params());
  for (int i = 0; i < 3; ++i) tr.step();
  CHECK(snapshot_equal(before, tr.teacher().params()));
}

TEST_CASE("every discriminator variant drives the same generator-side path") {
  Fixture fx("variants");
  for (DiscVariant v : {DiscVariant::Vpfd, DiscVariant::Vwd, DiscVariant::VwdNoMpd,
                        DiscVariant::VwdNoMrd, DiscVariant::MeldSmall, DiscVariant::MeldLarge}) {
    DistillTrainer tr = fx.trainer(fx.config(v));
    const LossReport r = tr.step();
    INFO("variant ", variant_name(v));
    CHECK(r.finite());
    CHECK(std::abs(r.g_total - (r.g_adv + 2.0 * r.g_fm + 45.0 * r.g_distill)) < 1e-9);
    const auto m = tr.evaluate();
    CHECK(std::isfinite(m.mel_l1_teacher));
    CHECK(std::isfinite(m.lsd));
    CHECK(std::isfinite(m.spk_cos));
  }
}

TEST_CASE("epochs = 0 leaves the student at initialization") {
  Fixture fx("zero_epochs");
  DistillConfig c = fx.config();
  c.epochs = 0;
  DistillTrainer tr = fx.trainer(c);
  const std::string out = tmp_dir("zero_epochs_run");
  tr.run(out);
  CHECK(params_equal(tr.student().params(), tr.teacher().params()));
  CHECK(std::filesystem::exists(out + "/student.ckpt"));
}

TEST_CASE("identical seeds give byte-identical checkpoints and logs") {
  Fixture fx("determinism");
  auto run_once = [&](const std::string& tag) {
    DistillConfig c = fx.config();
    c.epochs = 2;
    c.eval_every = 2;
    const std::string out = tmp_dir("det_" + tag);
    DistillTrainer tr = fx.trainer(c);
    tr.run(out);
    return out;
  };
  const std::string a = run_once("a");
  const std::string b = run_once("b");
  CHECK(slurp(a + "/student.ckpt") == slurp(b + "/student.ckpt"));
  CHECK(slurp(a + "/losses.csv") == slurp(b + "/losses.csv"));
  CHECK(slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv"));
  // sanity: files are non-trivial
  CHECK(slurp(a + "/losses.csv").size() > 40);
}

TEST_CASE("conversion preserves duration and is deterministic under a fixed seed") {
  Fixture fx("convert");
  DistillTrainer tr = fx.trainer(fx.config());

  SyntheticCorpusSpec spec;
  spec.n_speakers = 2;
  spec.sentences_per_speaker = 1;
  spec.duration_s = 0.3;
  spec.seed = 33;
  auto items = generate_corpus(spec);
  ConditioningProviders prov(tiny_cond(), fx.dn.n_mels);

  const MelConfig mel = tiny_mel();
  Waveform out1 = convert_voice(items[0].wav, items[1].wav, tr.student(), tr.vocoder_full(), prov, mel,
                                fx.sched, 0, 99);
  Waveform out2 = convert_voice(items[0].wav, items[1].wav, tr.student(), tr.vocoder_full(), prov, mel,
                                fx.sched, 0, 99);
  CHECK(out1.samples == out2.samples);

  const Index frames = items[0].wav.size() / mel.hop + 1;
  CHECK(out1.size() == frames * fx.vc.hop());
  // up to one frame of framing edge vs the source duration
  CHECK(std::abs(out1.size() - items[0].wav.size()) <= fx.vc.hop());
}

TEST_CASE("missing checkpoints raise dependency errors naming the path") {
  Fixture fx("missing_ckpt");
  DistillConfig c = fx.config();
  try {
    DistillTrainer tr(c, fx.ds, fx.sched, fx.dn, fx.vc, fx.dir + "/nope.ckpt", fx.vocoder_ckpt);
    FAIL("expected DependencyError");
  } catch (const DependencyError& e) {
    CHECK(std::string(e.what()).find("nope.ckpt") != std::string::npos);
  }
}
