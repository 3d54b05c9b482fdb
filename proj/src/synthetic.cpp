#include "vpfd/synthetic.hpp"

#include <cmath>

#include "vpfd/errors.hpp"
#include "vpfd/rng.hpp"

namespace vpfd {

void SyntheticCorpusSpec::validate() const {
  if (n_speakers < 1 || sentences_per_speaker < 1) throw ConfigError("corpus: counts must be >= 1");
  if (!(duration_s > 0 && sample_rate > 0)) throw ConfigError("corpus: duration and rate must be positive");
  if (n_harmonics < 1) throw ConfigError("corpus: n_harmonics must be >= 1");
  if (!(f0_base_hz > 0 && f0_speaker_ratio > 0)) throw ConfigError("corpus: f0 parameters must be positive");
}

std::vector<CorpusItem> generate_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  std::vector<CorpusItem> out;
  const int64_t n_samples = static_cast<int64_t>(spec.duration_s * spec.sample_rate);
  const Rng base(spec.seed);

  for (int64_t spk = 0; spk < spec.n_speakers; ++spk) {
    Rng srng = base.fork(1000 + static_cast<uint64_t>(spk));
    const double f0 = spec.f0_base_hz * std::pow(spec.f0_speaker_ratio, static_cast<double>(spk));
    const double tilt = srng.uniform(0.7, 1.4);  // harmonic rolloff exponent
    std::vector<double> amps(static_cast<size_t>(spec.n_harmonics));
    double amp_sum = 0.0;
    for (int64_t h = 0; h < spec.n_harmonics; ++h) {
      const double a = std::pow(static_cast<double>(h + 1), -tilt) * srng.uniform(0.6, 1.0);
      amps[static_cast<size_t>(h)] = a;
      amp_sum += a;
    }

    for (int64_t sen = 0; sen < spec.sentences_per_speaker; ++sen) {
      Rng urng = base.fork(static_cast<uint64_t>(1000000 + spk * 10000 + sen));
      const double vib_rate1 = urng.uniform(0.8, 2.5);
      const double vib_rate2 = urng.uniform(3.0, 6.0);
      const double vib_phase1 = urng.uniform(0.0, 2.0 * M_PI);
      const double vib_phase2 = urng.uniform(0.0, 2.0 * M_PI);
      const double vib_depth1 = urng.uniform(0.03, 0.08);
      const double vib_depth2 = urng.uniform(0.01, 0.04);
      const double env_rate = urng.uniform(1.0, 3.0);
      const double env_phase = urng.uniform(0.0, 2.0 * M_PI);

      CorpusItem item;
      item.speaker_id = spk;
      item.sentence_id = sen;
      item.id = "s" + std::to_string(spk) + "_u" + std::to_string(sen);
      item.wav.sample_rate = spec.sample_rate;
      item.wav.samples.resize(static_cast<size_t>(n_samples));

      const double nyquist = spec.sample_rate / 2.0;
      double phase = urng.uniform(0.0, 2.0 * M_PI);
      for (int64_t i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / spec.sample_rate;
        const double f = f0 * (1.0 + vib_depth1 * std::sin(2.0 * M_PI * vib_rate1 * t + vib_phase1) +
                               vib_depth2 * std::sin(2.0 * M_PI * vib_rate2 * t + vib_phase2));
        phase += 2.0 * M_PI * f / spec.sample_rate;
        double v = 0.0;
        for (int64_t h = 0; h < spec.n_harmonics; ++h) {
          const double hf = f * static_cast<double>(h + 1);
          if (hf >= nyquist) break;
          v += amps[static_cast<size_t>(h)] * std::sin(phase * static_cast<double>(h + 1));
        }
        // attack/decay plus slow tremolo
        const double edge = std::min(1.0, std::min(t, spec.duration_s - t) / 0.05);
        const double env = edge * (0.75 + 0.25 * std::sin(2.0 * M_PI * env_rate * t + env_phase));
        item.wav.samples[static_cast<size_t>(i)] = 0.7 * env * v / amp_sum;
      }
      out.push_back(std::move(item));
    }
  }
  return out;
}

}  // namespace vpfd
