#include "vpfd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vpfd/errors.hpp"

namespace vpfd {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<ConfigEntry>& RunConfig::schema() {
  static const std::vector<ConfigEntry> entries = {
      {"schema.version", "1", "config schema version"},
      {"run.seed", "1", "global seed; training reruns with the same seed are byte-identical"},
      {"run.root", "runs", "root directory for run outputs (env VPFD_RUN_ROOT overrides)"},

      {"data.n_speakers", "2", "synthetic corpus speaker count"},
      {"data.sentences_per_speaker", "4", "synthetic sentences per speaker"},
      {"data.duration_s", "1.5", "synthetic utterance duration in seconds"},
      {"data.f0_base_hz", "110", "f0 of speaker 0"},
      {"data.f0_speaker_ratio", "1.8", "f0 ratio between successive speakers"},
      {"data.n_harmonics", "10", "harmonics per synthetic voice"},
      {"data.sample_rate", "22050", "sample rate in Hz"},

      {"mel.n_mels", "80", "mel bins"},
      {"mel.fft_size", "256", "FFT size (power of two); full-scale preset uses 1024"},
      {"mel.hop", "64", "hop in samples; must equal the vocoder upsampling product"},
      {"mel.window", "256", "analysis window length; full-scale preset uses 1024"},
      {"mel.fmin_hz", "0", "filterbank low edge"},
      {"mel.fmax_hz", "8000", "filterbank high edge"},
      {"mel.log_floor", "1e-5", "clamp before natural log"},
      {"mel.slaney_norm", "true", "triangle area normalization"},

      {"vocoder.upsample_rates", "4,4,2,2", "stage rates; full-scale preset 8,8,2,2"},
      {"vocoder.upsample_kernels", "", "stage kernels; empty = 2x rate"},
      {"vocoder.base_channels", "24", "channels before the first stage (halve per stage)"},
      {"vocoder.resblock_kernels", "3", "residual block kernel sizes"},
      {"vocoder.resblock_dilations", "1,3", "residual block dilation ladder"},
      {"vocoder.tap_after_resblocks", "true", "pyramid tap point: after stage resblocks vs after the transposed conv"},
      {"vocoder.pretrain_steps", "1200", "reconstruction pretraining steps"},
      {"vocoder.batch", "8", "pretraining batch size"},
      {"vocoder.crop_frames", "32", "mel crop length for pretraining"},
      {"vocoder.lr", "0.0002", "pretraining learning rate"},
      {"vocoder.adam_beta1", "0.8", "pretraining Adam beta1"},
      {"vocoder.adam_beta2", "0.99", "pretraining Adam beta2"},
      {"vocoder.stft_loss_resolutions", "128:32:128,256:64:256,64:16:64", "fft:hop:win triples for the spectral loss"},

      {"diffusion.steps", "100", "T; desk default 100, full-scale 1000"},
      {"diffusion.beta_start", "0.0001", "linear beta schedule start"},
      {"diffusion.beta_end", "0.02", "linear beta schedule end"},

      {"denoiser.hidden", "24", "hidden channels (512 at full scale)"},
      {"denoiser.kernel", "5", "conv kernel size"},
      {"denoiser.time_dim", "64", "sinusoidal step embedding width"},

      {"teacher.steps", "1200", "teacher pretraining steps"},
      {"teacher.batch", "8", "teacher batch size"},
      {"teacher.crop_frames", "64", "mel crop length for teacher training"},
      {"teacher.lr", "0.0002", "teacher learning rate"},
      {"teacher.adam_beta1", "0.9", "teacher Adam beta1"},
      {"teacher.adam_beta2", "0.99", "teacher Adam beta2"},

      {"cond.speaker_dim", "64", "speaker embedding dimension"},
      {"cond.content_dim", "32", "content embedding dimension"},
      {"cond.seed", "77", "provider projection seed (independent of run.seed)"},
      {"cond.speaker_file", "", "optional sidecar container with per-utterance speaker embeddings"},
      {"cond.content_file", "", "optional sidecar container with per-utterance content embeddings"},

      {"disc.variant", "vpfd", "vpfd|vwd|vwd_no_mpd|vwd_no_mrd|meld_small|meld_large"},
      {"disc.vpfd_L", "1", "number of upsampling stages in the feature extractor"},
      {"disc.vpfd_resblocks", "1", "residual blocks per head scale"},
      {"disc.vpfd_kernel", "21", "kernel size for non-downsampling head convs"},
      {"disc.vpfd_channel_rule", "vocoder_channels", "vocoder_channels|vocoder_layers"},
      {"disc.mpd_periods", "2,3,5,7,11", "period list"},
      {"disc.mpd_channels", "4,8,16", "strided stack widths"},
      {"disc.mrd_resolutions", "256:256:256,512:512:512,128:128:128", "fft:hop:win triples"},
      {"disc.mrd_channels", "8", "resolution stack width"},
      {"disc.meld_small_channels", "4", "mel discriminator small preset width"},
      {"disc.meld_large_channels", "8", "mel discriminator large preset width"},

      {"trainer.epochs", "100", "distillation epochs"},
      {"trainer.max_steps", "0", "hard step cap; 0 = epochs only"},
      {"trainer.batch", "32", "distillation batch size"},
      {"trainer.lr", "0.0002", "distillation learning rate"},
      {"trainer.adam_beta1", "0.5", "distillation Adam beta1"},
      {"trainer.adam_beta2", "0.9", "distillation Adam beta2"},
      {"trainer.student_t", "0", "diffusion step fed to the one-step student; 0 = T"},
      {"trainer.distill_norm", "l1", "distillation distance: l1|l2"},
      {"trainer.extractor_pretrained", "true", "initialize the feature extractor from the vocoder checkpoint"},
      {"trainer.extractor_frozen", "true", "exclude extractor parameters from optimization"},
      {"trainer.crop_frames", "128", "mel crop length per training item"},
      {"trainer.eval_every", "100", "steps between proxy-metric evaluations (0 = start/end only)"},
      {"trainer.eval_items", "4", "held-out items used for proxy metrics"},
      {"trainer.teacher_ref_steps", "10", "reverse steps for the teacher reference output"},
      {"trainer.checkpoint_every", "0", "periodic checkpoint interval in steps; 0 = final only"},
      {"trainer.lambda_fm", "2", "feature matching weight"},
      {"trainer.lambda_distill", "45", "score distillation weight"},

      {"bench.steps", "200", "timed training steps per variant"},
      {"bench.reps", "3", "timed repetitions (median reported)"},
      {"bench.warmup", "3", "untimed warmup steps"},
      {"bench.batch", "8", "bench batch size"},
      {"bench.crop_frames", "128", "bench mel crop length"},
      {"bench.variants", "vpfd0,vpfd1,vpfd2,vpfd3,vpfd4,vwd,early,vwd_no_mrd,vwd_no_mpd,meld_small,meld_large",
       "suite row order"},
      {"bench.early_divisor", "10", "step budget divisor for the early-stop variant"},

      {"paths.vocoder_ckpt", "", "vocoder checkpoint; empty = <run.root>/vocoder/vocoder.ckpt"},
      {"paths.teacher_ckpt", "", "teacher checkpoint; empty = <run.root>/teacher/teacher.ckpt"},
      {"paths.student_ckpt", "", "student checkpoint; empty = <run.root>/distill/student.ckpt"},
  };
  return entries;
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  for (const ConfigEntry& e : schema()) cfg.values_[e.key] = e.def;
  return cfg;
}

std::string RunConfig::schema_help() {
  std::ostringstream os;
  for (const ConfigEntry& e : schema()) {
    os << "  " << e.key << " = " << (e.def.empty() ? "<empty>" : e.def) << "\n      " << e.desc << "\n";
  }
  return os.str();
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (values_.find(key) == values_.end()) {
    throw ConfigError("unknown config key: " + key);
  }
  values_[key] = value;
}

void RunConfig::set_kv(const std::string& keyval) {
  const size_t eq = keyval.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got: " + keyval);
  set(trim(keyval.substr(0, eq)), trim(keyval.substr(eq + 1)));
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

int64_t RunConfig::integer(const std::string& key) const {
  const std::string& v = str(key);
  try {
    size_t pos = 0;
    const int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects an integer, got '" + v + "'");
  }
}

double RunConfig::real(const std::string& key) const {
  const std::string& v = str(key);
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects a number, got '" + v + "'");
  }
}

bool RunConfig::boolean(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + " expects true/false, got '" + v + "'");
}

std::vector<int64_t> RunConfig::int_list(const std::string& key) const {
  const std::string& v = str(key);
  std::vector<int64_t> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(trim(item)));
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " expects a comma-separated integer list, got '" + v + "'");
    }
  }
  return out;
}

std::vector<StftRes> RunConfig::stft_list(const std::string& key) const {
  const std::string& v = str(key);
  std::vector<StftRes> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    StftRes r;
    if (std::sscanf(item.c_str(), "%ld:%ld:%ld", &r.fft, &r.hop, &r.win) != 3) {
      throw ConfigError("config key " + key + " expects fft:hop:win triples, got '" + v + "'");
    }
    out.push_back(r);
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  for (const ConfigEntry& e : schema()) os << e.key << " = " << values_.at(e.key) << "\n";
  return os.str();
}

void RunConfig::write_resolved(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write resolved config: " + path);
  f << resolved_text();
}

MelConfig RunConfig::mel_config() const {
  MelConfig m;
  m.n_mels = integer("mel.n_mels");
  m.fft_size = integer("mel.fft_size");
  m.hop = integer("mel.hop");
  m.window = integer("mel.window");
  m.sample_rate = real("data.sample_rate");
  m.fmin_hz = real("mel.fmin_hz");
  m.fmax_hz = real("mel.fmax_hz");
  m.log_floor = real("mel.log_floor");
  m.slaney_norm = boolean("mel.slaney_norm");
  m.validate();
  return m;
}

VocoderConfig RunConfig::vocoder_config() const {
  VocoderConfig v;
  v.n_mels = integer("mel.n_mels");
  v.upsample_rates = int_list("vocoder.upsample_rates");
  v.upsample_kernels = int_list("vocoder.upsample_kernels");
  v.base_channels = integer("vocoder.base_channels");
  v.resblock_kernels = int_list("vocoder.resblock_kernels");
  v.resblock_dilations = int_list("vocoder.resblock_dilations");
  v.tap_after_resblocks = boolean("vocoder.tap_after_resblocks");
  v.validate();
  if (v.hop() != integer("mel.hop")) {
    throw ConfigError("vocoder upsampling product " + std::to_string(v.hop()) +
                      " must equal mel.hop " + str("mel.hop"));
  }
  return v;
}

DenoiserConfig RunConfig::denoiser_config() const {
  DenoiserConfig d;
  d.n_mels = integer("mel.n_mels");
  d.hidden = integer("denoiser.hidden");
  d.content_dim = integer("cond.content_dim");
  d.speaker_dim = integer("cond.speaker_dim");
  d.kernel = integer("denoiser.kernel");
  d.time_dim = integer("denoiser.time_dim");
  d.validate();
  return d;
}

CondConfig RunConfig::cond_config() const {
  CondConfig c;
  c.speaker_dim = integer("cond.speaker_dim");
  c.content_dim = integer("cond.content_dim");
  c.seed = static_cast<uint64_t>(integer("cond.seed"));
  c.speaker_file = str("cond.speaker_file");
  c.content_file = str("cond.content_file");
  return c;
}

SyntheticCorpusSpec RunConfig::corpus_spec() const {
  SyntheticCorpusSpec s;
  s.n_speakers = integer("data.n_speakers");
  s.sentences_per_speaker = integer("data.sentences_per_speaker");
  s.duration_s = real("data.duration_s");
  s.sample_rate = real("data.sample_rate");
  s.f0_base_hz = real("data.f0_base_hz");
  s.f0_speaker_ratio = real("data.f0_speaker_ratio");
  s.n_harmonics = integer("data.n_harmonics");
  s.seed = seed();
  s.validate();
  return s;
}

MpdConfig RunConfig::mpd_config() const {
  MpdConfig m;
  m.periods = int_list("disc.mpd_periods");
  m.channels = int_list("disc.mpd_channels");
  return m;
}

MrdConfig RunConfig::mrd_config() const {
  MrdConfig m;
  m.resolutions = stft_list("disc.mrd_resolutions");
  m.channels = integer("disc.mrd_channels");
  return m;
}

std::string RunConfig::vocoder_ckpt_path() const {
  const std::string& p = str("paths.vocoder_ckpt");
  return p.empty() ? run_root() + "/vocoder/vocoder.ckpt" : p;
}

std::string RunConfig::teacher_ckpt_path() const {
  const std::string& p = str("paths.teacher_ckpt");
  return p.empty() ? run_root() + "/teacher/teacher.ckpt" : p;
}

std::string RunConfig::student_ckpt_path() const {
  const std::string& p = str("paths.student_ckpt");
  return p.empty() ? run_root() + "/distill/student.ckpt" : p;
}

}  // namespace vpfd
