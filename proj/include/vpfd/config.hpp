#pragma once

#include <map>
#include <string>
#include <vector>

#include "vpfd/conditioning.hpp"
#include "vpfd/denoiser.hpp"
#include "vpfd/discriminators.hpp"
#include "vpfd/mel.hpp"
#include "vpfd/synthetic.hpp"
#include "vpfd/vocoder.hpp"

namespace vpfd {

struct ConfigEntry {
  std::string key;
  std::string def;
  std::string desc;
};

// Flat text config with hierarchical dotted keys. Every key is declared in a
// schema with its default; unknown keys are rejected, and every run writes
// back the fully resolved document so it can be replayed.
class RunConfig {
 public:
  static const std::vector<ConfigEntry>& schema();
  static RunConfig defaults();
  static std::string schema_help();  // one line per key with default and description

  // "key = value" lines; '#' comments and blank lines ignored.
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  void set_kv(const std::string& keyval);  // "key=value"

  const std::string& str(const std::string& key) const;
  int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<int64_t> int_list(const std::string& key) const;  // comma-separated
  std::vector<StftRes> stft_list(const std::string& key) const;  // fft:hop:win,...

  std::string resolved_text() const;  // schema order
  void write_resolved(const std::string& path) const;

  uint64_t seed() const { return static_cast<uint64_t>(integer("run.seed")); }
  std::string run_root() const { return str("run.root"); }

  MelConfig mel_config() const;
  VocoderConfig vocoder_config() const;
  DenoiserConfig denoiser_config() const;
  CondConfig cond_config() const;
  SyntheticCorpusSpec corpus_spec() const;
  MpdConfig mpd_config() const;
  MrdConfig mrd_config() const;

  // empty configured path means "derive from run.root"
  std::string vocoder_ckpt_path() const;
  std::string teacher_ckpt_path() const;
  std::string student_ckpt_path() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vpfd
