// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria can be run individually with --criterion N. Fixtures
// (corpus, pretrained checkpoints) are cached under --work DIR so the long
// criteria do not repeat each other's pretraining; every fixture is
// deterministic, so cache reuse cannot change results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vpfd/bench.hpp"
#include "vpfd/checkpoint.hpp"
#include "vpfd/config.hpp"
#include "vpfd/dataset.hpp"
#include "vpfd/distill.hpp"
#include "vpfd/losses.hpp"
#include "vpfd/ops.hpp"
#include "vpfd/trainers.hpp"

namespace fs = std::filesystem;
using namespace vpfd;
using nn::Index;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

struct Check {
  std::string label;
  bool ok;
};

std::vector<Check> g_checks;

void expect(bool ok, const std::string& label) { g_checks.push_back({label, ok}); }

void expect_near(double got, double want, double tol, const std::string& label) {
  const bool ok = std::isfinite(got) && std::abs(got - want) <= tol;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s (got %.12g, want %.12g, tol %g)", label.c_str(), got, want, tol);
  g_checks.push_back({buf, ok});
}

// ------------------------------------------------------------------ fixtures

struct Toy {
  uint64_t seed = 1234;
  MelConfig mel;
  VocoderConfig voc;
  DenoiserConfig dn;
  CondConfig cond;
  NoiseSchedule sched = make_schedule(100, 1e-4, 0.02);

  Toy() {
    mel.n_mels = 80;
    mel.fft_size = 256;
    mel.hop = 64;
    mel.window = 256;

    voc.n_mels = 80;
    voc.upsample_rates = {4, 4, 2, 2};
    voc.base_channels = 24;
    voc.resblock_kernels = {3};
    voc.resblock_dilations = {1, 3};

    dn.n_mels = 80;
    dn.hidden = 24;
    dn.content_dim = 32;
    dn.speaker_dim = 64;

    cond.speaker_dim = 64;
    cond.content_dim = 32;
  }

  SyntheticCorpusSpec corpus_spec() const {
    SyntheticCorpusSpec s;
    s.n_speakers = 2;
    s.sentences_per_speaker = 4;
    s.duration_s = 1.5;
    s.seed = seed;
    return s;
  }
};

Dataset build_dataset(const Toy& toy) {
  const auto items = generate_corpus(toy.corpus_spec());
  ConditioningProviders providers(toy.cond, toy.mel.n_mels);
  Dataset ds;
  std::map<Index, Index> max_sentence;
  for (const CorpusItem& it : items) {
    Utterance u;
    u.id = it.id;
    u.speaker = it.speaker_id;
    u.sentence = it.sentence_id;
    u.wav = it.wav;
    u.mel = extract_mel(u.wav, toy.mel);
    u.speaker_emb = providers.embed_speaker(u.mel);
    u.content = providers.embed_content(u.mel);
    auto mit = max_sentence.find(u.speaker);
    if (mit == max_sentence.end() || u.sentence > mit->second) max_sentence[u.speaker] = u.sentence;
    ds.items.push_back(std::move(u));
  }
  for (size_t i = 0; i < ds.items.size(); ++i) {
    const Utterance& u = ds.items[i];
    (u.sentence == max_sentence[u.speaker] ? ds.eval_idx : ds.train_idx).push_back(i);
  }
  return ds;
}

constexpr Index kVocoderPretrainSteps = 600;
constexpr Index kTeacherPretrainSteps = 900;

std::string fixture_vocoder(const Toy& toy, const Dataset& ds, const std::string& work) {
  const std::string path = work + "/vocoder.ckpt";
  if (fs::exists(path)) return path;
  Vocoder vocoder(toy.voc, Rng(toy.seed).fork(101).seed());
  VocoderPretrainConfig pc;
  pc.steps = kVocoderPretrainSteps;
  pc.batch = 8;
  pc.crop_frames = 32;
  pc.stft_resolutions = {{128, 32, 128}, {256, 64, 256}, {64, 16, 64}};
  pc.mel = toy.mel;
  pc.seed = toy.seed;
  const PretrainStats st = pretrain_vocoder(vocoder, ds, pc);
  CheckpointData ck;
  ck.meta["kind"] = "vocoder";
  ck.meta["initial_loss"] = std::to_string(st.initial_loss);
  ck.meta["final_loss"] = std::to_string(st.final_loss);
  store_params(ck, vocoder.params());
  save_checkpoint(path, ck);
  return path;
}

std::string fixture_teacher(const Toy& toy, const Dataset& ds, const std::string& work) {
  const std::string path = work + "/teacher.ckpt";
  if (fs::exists(path)) return path;
  Denoiser teacher(toy.dn, Rng(toy.seed).fork(102).seed());
  TeacherPretrainConfig tc;
  tc.steps = kTeacherPretrainSteps;
  tc.batch = 8;
  tc.crop_frames = 64;
  tc.seed = toy.seed;
  const PretrainStats st = pretrain_teacher(teacher, toy.sched, ds, tc);
  CheckpointData ck;
  ck.meta["kind"] = "teacher";
  ck.meta["initial_eps_mse"] = std::to_string(st.initial_loss);
  ck.meta["final_eps_mse"] = std::to_string(st.final_loss);
  store_params(ck, teacher.params());
  save_checkpoint(path, ck);
  return path;
}

DistillConfig toy_distill_config(const Toy& toy) {
  DistillConfig c;
  c.batch = 8;
  c.crop_frames = 128;
  c.vpfd.L = 1;
  c.eval_items = 2;
  c.teacher_ref_steps = 10;
  c.seed = toy.seed;
  c.mel = toy.mel;
  return c;
}

// ----------------------------------------------------------------- criteria

// Loss arithmetic: every closed-form example at 1e-9.
void criterion_1(const std::string&) {
  Tape tape;
  auto tvec = [&](std::initializer_list<double> vals) {
    Tensor t({1, 1, static_cast<Index>(vals.size())});
    size_t i = 0;
    for (double v : vals) t.data[i++] = v;
    return t;
  };
  auto out = [&](const Tensor& score) {
    DiscOutput o;
    o.score = tape.constant(score);
    o.features = {o.score};
    return o;
  };
  auto scalar = [&](Var v) { return tape.val(v).at(0); };

  {
    std::vector<DiscOutput> r{out(tvec({1, 1}))}, f{out(tvec({0, 0}))};
    expect_near(scalar(lsgan_d(tape, r, f)), 0.0, 1e-9, "lsgan_d(real=1, fake=0) = 0");
  }
  {
    std::vector<DiscOutput> r{out(tvec({0.5, 0.5}))}, f{out(tvec({0.5, 0.5}))};
    expect_near(scalar(lsgan_d(tape, r, f)), 0.5, 1e-9, "lsgan_d(0.5, 0.5) = 0.5");
  }
  {
    std::vector<DiscOutput> r{out(tvec({1, 0}))}, f{out(tvec({0, 1}))};
    expect_near(scalar(lsgan_d(tape, r, f)), 1.0, 1e-9, "lsgan_d([1,0],[0,1]) = 1");
  }
  {
    std::vector<DiscOutput> f1{out(tvec({1, 1}))}, f0{out(tvec({0, 0}))}, fh{out(tvec({0.5, 0.5}))};
    expect_near(scalar(lsgan_g(tape, f1)), 0.0, 1e-9, "lsgan_g(fake=1) = 0");
    expect_near(scalar(lsgan_g(tape, f0)), 1.0, 1e-9, "lsgan_g(fake=0) = 1");
    expect_near(scalar(lsgan_g(tape, fh)), 0.25, 1e-9, "lsgan_g(fake=0.5) = 0.25");
  }
  {
    std::vector<DiscOutput> f{out(tvec({4, -2, 7}))};
    expect_near(scalar(feature_matching(tape, detach_features(tape, f), f)), 0.0, 1e-9,
                "fm(identical) = 0");
    std::vector<DiscOutput> fz{out(tvec({0, 0}))};
    expect_near(scalar(feature_matching(tape, {{tvec({1, 2})}}, fz)), 1.5, 1e-9,
                "fm(real=[1,2], fake=[0,0]) = 1.5");
    DiscOutput two;
    two.score = tape.constant(tvec({0, 0}));
    two.features = {tape.constant(tvec({0, 0})), two.score};
    expect_near(scalar(feature_matching(tape, {{tvec({1, 1}), tvec({1, 1})}}, {two})), 2.0, 1e-9,
                "fm(two layers, |diff|=1 each) = 2");
  }
  {
    NoiseSchedule s;
    s.beta = {0.75};
    s.alpha = {0.25};
    s.alpha_bar = {0.25};
    Var x = tape.constant(tvec({2, 2}));
    expect_near(scalar(score_distillation(tape, x, tvec({0, 0}), {1}, s)), 1.0, 1e-9,
                "distill(abar=0.25, |diff|=2) = 1");
    Var same = tape.constant(tvec({3, 3}));
    expect_near(scalar(score_distillation(tape, same, tvec({3, 3}), {1}, s)), 0.0, 1e-9,
                "distill(equal) = 0");
  }
  {
    LossWeights w;
    Var one = tape.constant_scalar(1.0);
    expect_near(scalar(total_g(tape, one, one, one, w)), 48.0, 1e-9,
                "total_g(1,1,1) = 1 + 2 + 45 = 48");
    Var zero = tape.constant_scalar(0.0);
    expect_near(scalar(total_g(tape, zero, zero, zero, w)), 0.0, 1e-9, "total_g(0,0,0) = 0");
    LossWeights off{0, 0};
    expect_near(scalar(total_g(tape, one, one, one, off)), 1.0, 1e-9,
                "total_g with zero weights = pure adversarial");
    expect_near(scalar(total_d(tape, one)), 1.0, 1e-9, "total_d passes the adversarial term through");
  }
}

// Diffusion identities.
void criterion_2(const std::string&) {
  {
    NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
    double prod = 1.0;
    double worst = 0.0;
    for (Index t = 1; t <= 1000; ++t) {
      prod *= s.alpha_at(t);
      worst = std::max(worst, std::abs(prod - s.alpha_bar_at(t)));
    }
    expect_near(worst, 0.0, 1e-12, "alpha_bar incremental product vs closed form (T=1000)");
  }
  {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    Rng rng(71);
    Tensor x0 = Tensor::randn({1, 4, 6}, rng);
    Tensor eps = Tensor::randn({1, 4, 6}, rng);
    Tensor x1 = diffuse(x0, 1, eps, s);
    Tensor mu = reverse_mu(x1, 1, eps, s);
    double worst = 0.0;
    for (Index i = 0; i < mu.numel(); ++i) worst = std::max(worst, std::abs(mu.at(i) - x0.at(i)));
    expect_near(worst, 0.0, 1e-6, "perfect-oracle reverse step at t=1 recovers x_0");
  }
  {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    const Index t = 60;
    const double true_var = 1.0 - s.alpha_bar_at(t);
    const int n = 100000;
    Rng rng(17);
    Tensor x0 = Tensor::full({1, 2, 2}, 0.35);
    double mean[4] = {0, 0, 0, 0}, m2[4] = {0, 0, 0, 0};
    for (int k = 0; k < n; ++k) {
      Tensor eps = Tensor::randn({1, 2, 2}, rng);
      Tensor xt = diffuse(x0, t, eps, s);
      for (Index i = 0; i < 4; ++i) {
        const double v = xt.at(i);
        const double d = v - mean[i];
        mean[i] += d / (k + 1);
        m2[i] += d * (v - mean[i]);
      }
    }
    const double se = true_var * std::sqrt(2.0 / (n - 1));
    for (Index i = 0; i < 4; ++i) {
      const double var = m2[i] / (n - 1);
      expect(std::abs(var - true_var) < 3.0 * se,
             "Monte-Carlo cell variance within 3 standard errors of 1 - alpha_bar (cell " +
                 std::to_string(i) + ")");
    }
  }
}

// Gradient checks on <=100-parameter instances, relative error < 1e-3.
void criterion_3(const std::string&) {
  const double h = 1e-3;
  auto rel_err = [](double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
  };

  {
    Rng rng(5);
    Tensor r({2, 1, 6}), f({2, 1, 6});
    for (Index i = 0; i < 12; ++i) {
      r.at(i) = rng.uniform(-1.2, 1.2);
      f.at(i) = rng.uniform(-1.2, 1.2);
    }
    NoiseSchedule s;
    s.beta = {0.19, 0.75};
    s.alpha = {0.81, 0.25 / 0.81};
    s.alpha_bar = {0.81, 0.25};
    Tensor teacher({2, 1, 6});
    for (Index i = 0; i < 12; ++i) teacher.at(i) = rng.uniform(2.0, 4.0);
    Tensor real_feat({2, 1, 6});
    for (Index i = 0; i < 12; ++i) real_feat.at(i) = rng.uniform(2.0, 4.0);

    struct LossCase {
      std::string name;
      std::function<Var(Tape&, const std::vector<Var>&)> build;
      std::vector<Tensor> inputs;
    };
    std::vector<LossCase> cases;
    cases.push_back({"lsgan_d",
                     [](Tape& t, const std::vector<Var>& v) {
                       std::vector<DiscOutput> real{{v[0], {v[0]}}}, fake{{v[1], {v[1]}}};
                       return lsgan_d(t, real, fake);
                     },
                     {r, f}});
    cases.push_back({"lsgan_g",
                     [](Tape& t, const std::vector<Var>& v) {
                       std::vector<DiscOutput> fake{{v[0], {v[0]}}};
                       return lsgan_g(t, fake);
                     },
                     {f}});
    cases.push_back({"feature_matching",
                     [real_feat](Tape& t, const std::vector<Var>& v) {
                       std::vector<DiscOutput> fake{{v[0], {v[0]}}};
                       return feature_matching(t, {{real_feat}}, fake);
                     },
                     {f}});
    cases.push_back({"score_distillation",
                     [teacher, s](Tape& t, const std::vector<Var>& v) {
                       return score_distillation(t, v[0], teacher, {1, 2}, s);
                     },
                     {f}});

    for (auto& c : cases) {
      std::vector<Tensor> grads(c.inputs.size());
      {
        Tape tape;
        std::vector<Var> vars;
        for (size_t i = 0; i < c.inputs.size(); ++i) vars.push_back(tape.leaf(c.inputs[i], &grads[i], true));
        tape.backward(c.build(tape, vars));
      }
      double worst = 0.0;
      for (size_t i = 0; i < c.inputs.size(); ++i) {
        for (Index k = 0; k < c.inputs[i].numel(); ++k) {
          auto eval = [&](double delta) {
            std::vector<Tensor> w = c.inputs;
            w[i].at(k) += delta;
            Tape tape;
            std::vector<Var> vars;
            for (const auto& t : w) vars.push_back(tape.constant(t));
            return tape.val(c.build(tape, vars)).at(0);
          };
          const double fd = (eval(h) - eval(-h)) / (2 * h);
          const double ga = grads[i].numel() ? grads[i].at(k) : 0.0;
          worst = std::max(worst, rel_err(fd, ga));
        }
      }
      expect(worst < 1e-3, c.name + " analytic vs central differences, worst rel err " +
                               std::to_string(worst));
    }
  }

  {
    DenoiserConfig dc;
    dc.n_mels = 1;
    dc.hidden = 1;
    dc.content_dim = 1;
    dc.speaker_dim = 1;
    dc.kernel = 1;
    dc.down_kernel = 2;
    dc.time_dim = 2;
    Denoiser den(dc, 55);
    expect(den.params().total_values() <= 100,
           "toy denoiser instance has <= 100 parameters (" +
               std::to_string(den.params().total_values()) + ")");

    NoiseSchedule sched = make_schedule(10, 0.01, 0.1);
    Rng rng(9);
    Tensor x0 = Tensor::randn({1, 1, 8}, rng);
    Tensor p = Tensor::randn({1, 1, 8}, rng);
    Tensor s = Tensor::randn({1, 1}, rng);
    Tensor eps = Tensor::randn({1, 1, 8}, rng);
    const std::vector<Index> t{4};
    const Tensor xt = diffuse(x0, t, eps, sched);

    auto loss_value = [&]() {
      Tape tape;
      Var pred = den.forward(tape, tape.constant(xt), p, s, t, false);
      return tape.val(nn::mse_mean(tape, pred, tape.constant(eps))).at(0);
    };
    Tape tape;
    Var pred = den.forward(tape, tape.constant(xt), p, s, t, true);
    tape.backward(nn::mse_mean(tape, pred, tape.constant(eps)));

    double worst = 0.0;
    for (nn::Param* prm : den.params().all()) {
      for (Index i = 0; i < prm->value.numel(); ++i) {
        const double orig = prm->value.at(i);
        prm->value.at(i) = orig + h;
        const double lp = loss_value();
        prm->value.at(i) = orig - h;
        const double lm = loss_value();
        prm->value.at(i) = orig;
        worst = std::max(worst, rel_err((lp - lm) / (2 * h), prm->grad.numel() ? prm->grad.at(i) : 0.0));
      }
    }
    expect(worst < 1e-3,
           "denoiser eps-MSE analytic vs central differences over every parameter, worst rel err " +
               std::to_string(worst));
  }
}

// Structural head checks via the dump-arch text.
void criterion_4(const std::string&) {
  Toy toy;
  for (Index L = 0; L <= 4; ++L) {
    VpfdHeadConfig hc;
    hc.L = L;
    VpfdHead head(toy.voc, hc, 1);
    const std::string dump = head.dump_arch();

    std::vector<int64_t> down_strides;
    bool kernels_ok = true, wn_ok = true, channels_ok = true;
    std::stringstream ss(dump);
    std::string line;
    while (std::getline(ss, line)) {
      if (line.rfind("layer ", 0) != 0) continue;
      std::map<std::string, std::string> kv;
      std::stringstream ls(line);
      std::string tok;
      while (ls >> tok) {
        const size_t eq = tok.find('=');
        if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      const int64_t kernel = std::stoll(kv.at("kernel"));
      const int64_t stride = std::stoll(kv.at("stride"));
      const int64_t out = std::stoll(kv.at("out"));
      const int64_t scale = std::stoll(kv.at("scale"));
      if (kv.at("wn") != "1") wn_ok = false;
      if (kv.at("role") == "down") {
        if (kernel != 2 * stride) kernels_ok = false;
        down_strides.push_back(stride);
      } else {
        if (kernel != 21 || stride != 1) kernels_ok = false;
      }
      if (kv.at("role") == "score") {
        if (out != 1) channels_ok = false;
      } else if (out != toy.voc.channels_at(scale)) {
        channels_ok = false;
      }
    }
    std::vector<int64_t> expect_strides;
    for (Index s = L; s >= 1; --s) expect_strides.push_back(toy.voc.upsample_rates[static_cast<size_t>(s - 1)]);

    const std::string tag = "L=" + std::to_string(L);
    expect(kernels_ok, tag + ": downsampling kernels are 2x rate, all other kernels 21");
    expect(down_strides == expect_strides, tag + ": downsampling rates mirror the upsampling rates");
    expect(wn_ok, tag + ": weight normalization on every convolution");
    expect(channels_ok, tag + ": per-scale output channels match the vocoder feature channels");
  }
}

// Freeze/pretrain grid, one epoch each.
void criterion_5(const std::string& work) {
  Toy toy;
  Dataset ds = build_dataset(toy);
  const std::string voc_ckpt = fixture_vocoder(toy, ds, work);
  const std::string tea_ckpt = fixture_teacher(toy, ds, work);

  Vocoder reference(toy.voc, 1, 1);
  load_params(load_checkpoint(voc_ckpt), reference.params());
  auto ref_snapshot = [&]() {
    std::vector<Tensor> out;
    for (const nn::Param* p : reference.params().all()) out.push_back(p->value);
    return out;
  }();

  for (bool pretrained : {false, true}) {
    for (bool frozen : {false, true}) {
      DistillConfig c = toy_distill_config(toy);
      c.epochs = 1;
      c.extractor_pretrained = pretrained;
      c.extractor_frozen = frozen;
      DistillTrainer tr(c, ds, toy.sched, toy.dn, toy.voc, tea_ckpt, voc_ckpt);
      const std::string tag = std::string("pretrained=") + (pretrained ? "1" : "0") + " frozen=" +
                              (frozen ? "1" : "0");

      // pretrained => byte-equal with the vocoder checkpoint prefix at init
      bool init_matches = true;
      {
        auto ps = tr.extractor()->params().all();
        for (size_t i = 0; i < ps.size(); ++i) {
          if (ps[i]->value.data != ref_snapshot[i].data) init_matches = false;
        }
      }
      expect(init_matches == pretrained,
             tag + ": extractor initialization " + (pretrained ? "matches" : "differs from") +
                 " the vocoder checkpoint");

      auto before = [&] {
        std::vector<Tensor> out;
        for (const nn::Param* p : tr.extractor()->params().all()) out.push_back(p->value);
        return out;
      }();
      tr.run(work + "/grid_" + std::to_string(pretrained) + std::to_string(frozen));
      bool unchanged = true;
      {
        auto ps = tr.extractor()->params().all();
        for (size_t i = 0; i < ps.size(); ++i) {
          if (ps[i]->value.data != before[i].data) unchanged = false;
        }
      }
      expect(unchanged == frozen, tag + ": extractor parameters " +
                                      (frozen ? "byte-identical" : "updated") + " after one epoch");
    }
  }
}

// Cost trend across VPFD_0..4 and the waveform baseline.
void criterion_6(const std::string& work) {
  Toy toy;
  Dataset ds = build_dataset(toy);
  const std::string voc_ckpt = fixture_vocoder(toy, ds, work);
  const std::string tea_ckpt = fixture_teacher(toy, ds, work);

  BenchConfig bc;
  bc.variants = {"vpfd0", "vpfd1", "vpfd2", "vpfd3", "vpfd4", "vwd"};
  bc.steps = 200;
  bc.reps = 3;
  bc.warmup = 3;
  bc.batch = 8;
  bc.crop_frames = 128;

  DistillConfig base = toy_distill_config(toy);
  const auto rows = run_bench(bc, base, ds, toy.sched, toy.dn, toy.voc, tea_ckpt, voc_ckpt);
  emit_report(rows, work + "/bench");

  std::map<std::string, const BenchRow*> by_name;
  for (const auto& r : rows) by_name[r.name] = &r;
  for (const auto& r : rows) expect(!r.failed, "variant " + r.name + " ran (" + r.error + ")");

  bool wall_monotone = true, analytic_monotone = true;
  for (int L = 1; L <= 4; ++L) {
    const BenchRow* a = by_name["vpfd" + std::to_string(L - 1)];
    const BenchRow* b = by_name["vpfd" + std::to_string(L)];
    if (a == nullptr || b == nullptr || a->failed || b->failed) continue;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "wall(vpfd%d)=%.3fs < wall(vpfd%d)=%.3fs", L - 1, a->wall_median_s,
                  L, b->wall_median_s);
    expect(a->wall_median_s < b->wall_median_s, buf);
    if (a->wall_median_s >= b->wall_median_s) wall_monotone = false;
    if (a->analytic_bytes >= b->analytic_bytes) analytic_monotone = false;
  }
  expect(wall_monotone, "wall time strictly monotone in L across VPFD_0..VPFD_4");
  expect(analytic_monotone, "analytic activation footprint strictly monotone in L");

  const BenchRow* vwd = by_name["vwd"];
  const BenchRow* v1 = by_name["vpfd1"];
  if (vwd != nullptr && v1 != nullptr && !vwd->failed && !v1->failed) {
    const double ratio = vwd->wall_median_s / v1->wall_median_s;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "time(VWD)/time(VPFD_1) = %.2f >= 2", ratio);
    expect(ratio >= 2.0, buf);
    expect(vwd->analytic_bytes > v1->analytic_bytes, "analytic footprint: VWD exceeds VPFD_1");
  } else {
    expect(false, "vwd and vpfd1 rows available");
  }
}

// End-to-end smoke distillation, timed.
void criterion_7(const std::string& work) {
  const auto t0 = std::chrono::steady_clock::now();
  Toy toy;
  Dataset ds = build_dataset(toy);
  const std::string dir = work + "/smoke";
  fs::create_directories(dir);
  // fresh pipeline in its own directory (fixture cache deliberately unused)
  const std::string voc_ckpt = fixture_vocoder(toy, ds, dir);
  const std::string tea_ckpt = fixture_teacher(toy, ds, dir);

  DistillConfig c = toy_distill_config(toy);
  c.epochs = 1 << 20;
  c.max_steps = 500;
  c.eval_every = 100;
  DistillTrainer tr(c, ds, toy.sched, toy.dn, toy.voc, tea_ckpt, voc_ckpt);

  const auto init = tr.evaluate();
  tr.run(dir + "/distill");
  const auto fin = tr.evaluate();
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

  char buf[256];
  std::snprintf(buf, sizeof(buf), "student-vs-teacher mel L1 dropped >= 20%% (init %.5f -> final %.5f, %.1f%%)",
                init.mel_l1_teacher, fin.mel_l1_teacher,
                100.0 * (1.0 - fin.mel_l1_teacher / init.mel_l1_teacher));
  expect(fin.mel_l1_teacher <= 0.8 * init.mel_l1_teacher, buf);
  std::snprintf(buf, sizeof(buf), "full pipeline ran in %.1f min (< 60)", minutes);
  expect(minutes < 60.0, buf);
}

// Determinism of every training entry point.
void criterion_8(const std::string& work) {
  Toy toy;
  Dataset ds = build_dataset(toy);
  auto slurp = [](const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };

  {
    auto run = [&](const std::string& tag) {
      Vocoder vocoder(toy.voc, Rng(toy.seed).fork(101).seed());
      VocoderPretrainConfig pc;
      pc.steps = 25;
      pc.batch = 4;
      pc.crop_frames = 32;
      pc.mel = toy.mel;
      pc.seed = toy.seed;
      pc.log_path = work + "/det_voc_" + tag + ".csv";
      pretrain_vocoder(vocoder, ds, pc);
      CheckpointData ck;
      ck.meta["kind"] = "vocoder";
      store_params(ck, vocoder.params());
      const std::string path = work + "/det_voc_" + tag + ".ckpt";
      save_checkpoint(path, ck);
      return path;
    };
    const std::string a = run("a"), b = run("b");
    expect(slurp(a) == slurp(b), "vocoder pretraining: byte-identical checkpoints across reruns");
    expect(slurp(work + "/det_voc_a.csv") == slurp(work + "/det_voc_b.csv"),
           "vocoder pretraining: byte-identical loss logs");
  }
  {
    auto run = [&](const std::string& tag) {
      Denoiser teacher(toy.dn, Rng(toy.seed).fork(102).seed());
      TeacherPretrainConfig tc;
      tc.steps = 25;
      tc.batch = 4;
      tc.crop_frames = 64;
      tc.seed = toy.seed;
      tc.log_path = work + "/det_tea_" + tag + ".csv";
      pretrain_teacher(teacher, toy.sched, ds, tc);
      CheckpointData ck;
      ck.meta["kind"] = "teacher";
      store_params(ck, teacher.params());
      const std::string path = work + "/det_tea_" + tag + ".ckpt";
      save_checkpoint(path, ck);
      return path;
    };
    const std::string a = run("a"), b = run("b");
    expect(slurp(a) == slurp(b), "teacher pretraining: byte-identical checkpoints across reruns");
    expect(slurp(work + "/det_tea_a.csv") == slurp(work + "/det_tea_b.csv"),
           "teacher pretraining: byte-identical loss logs");
  }
  {
    const std::string voc_ckpt = work + "/det_voc_a.ckpt";
    const std::string tea_ckpt = work + "/det_tea_a.ckpt";
    auto run = [&](const std::string& tag) {
      DistillConfig c = toy_distill_config(toy);
      c.epochs = 1 << 20;
      c.max_steps = 8;
      c.eval_every = 4;
      DistillTrainer tr(c, ds, toy.sched, toy.dn, toy.voc, tea_ckpt, voc_ckpt);
      const std::string dir = work + "/det_distill_" + tag;
      tr.run(dir);
      return dir;
    };
    const std::string a = run("a"), b = run("b");
    expect(slurp(a + "/student.ckpt") == slurp(b + "/student.ckpt"),
           "distillation: byte-identical student checkpoints across reruns");
    expect(slurp(a + "/losses.csv") == slurp(b + "/losses.csv"),
           "distillation: byte-identical loss logs");
    expect(slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv"),
           "distillation: byte-identical metric logs");
  }
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  std::string work = "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    if (std::strcmp(argv[i], "--work") == 0 && i + 1 < argc) work = argv[++i];
  }
  fs::create_directories(work);

  using Criterion = std::function<void(const std::string&)>;
  const std::vector<std::pair<std::string, Criterion>> criteria = {
      {"loss arithmetic suite", criterion_1},
      {"diffusion identities", criterion_2},
      {"gradient checks", criterion_3},
      {"structural feature-head checks", criterion_4},
      {"freeze/pretrain grid", criterion_5},
      {"cost trend across discriminator depths", criterion_6},
      {"end-to-end smoke distillation", criterion_7},
      {"training determinism", criterion_8},
  };

  bool all_ok = true;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int num = static_cast<int>(i) + 1;
    if (only != 0 && only != num) continue;
    g_checks.clear();
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string error;
    try {
      criteria[i].second(work);
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    }
    for (const Check& c : g_checks) {
      if (!c.ok) ok = false;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", num, criteria[i].first.c_str(),
                secs);
    for (const Check& c : g_checks) {
      std::printf("        %s %s\n", c.ok ? "ok  " : "FAIL", c.label.c_str());
    }
    if (!error.empty()) std::printf("        exception: %s\n", error.c_str());
    if (!ok) all_ok = false;
  }
  return all_ok ? 0 : 1;
}
