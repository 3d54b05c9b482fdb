#include "vpfd/mel.hpp"

#include <cmath>
#include <stdexcept>

#include "vpfd/errors.hpp"
#include "vpfd/fft.hpp"

namespace vpfd {

void MelConfig::validate() const {
  if (n_mels < 1) throw ConfigError("mel: n_mels must be >= 1");
  if (!(hop > 0 && hop <= window && window <= fft_size)) {
    throw ConfigError("mel: need 0 < hop <= window <= fft_size");
  }
  if (!is_power_of_two(fft_size)) throw ConfigError("mel: fft_size must be a power of two");
  if (!(sample_rate > 0)) throw ConfigError("mel: sample_rate must be positive");
  if (!(log_floor > 0)) throw ConfigError("mel: log_floor must be positive");
  if (!(fmin_hz >= 0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate / 2)) {
    throw ConfigError("mel: need 0 <= fmin < fmax <= nyquist");
  }
}

double hz_to_mel_slaney(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz_slaney(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

std::vector<double> mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const nn::Index bins = cfg.fft_size / 2 + 1;
  std::vector<double> fb(static_cast<size_t>(cfg.n_mels * bins), 0.0);

  const double mel_lo = hz_to_mel_slaney(cfg.fmin_hz);
  const double mel_hi = hz_to_mel_slaney(cfg.fmax_hz);
  std::vector<double> pts(static_cast<size_t>(cfg.n_mels + 2));
  for (nn::Index i = 0; i < cfg.n_mels + 2; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1);
    pts[static_cast<size_t>(i)] = mel_to_hz_slaney(mel);
  }

  for (nn::Index m = 0; m < cfg.n_mels; ++m) {
    const double lo = pts[static_cast<size_t>(m)];
    const double mid = pts[static_cast<size_t>(m + 1)];
    const double hi = pts[static_cast<size_t>(m + 2)];
    const double norm = cfg.slaney_norm ? 2.0 / (hi - lo) : 1.0;
    for (nn::Index k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.fft_size);
      double w = 0.0;
      if (hz > lo && hz < hi) {
        w = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
      }
      fb[static_cast<size_t>(m * bins + k)] = w * norm;
    }
  }
  return fb;
}

MelSpectrogram extract_mel(const Waveform& w, const MelConfig& cfg) {
  cfg.validate();
  if (w.size() == 0) throw DataError("extract_mel: empty waveform");
  if (w.size() < cfg.window) {
    throw DataError("extract_mel: waveform shorter than one window (" + std::to_string(w.size()) + " < " +
                    std::to_string(cfg.window) + " samples)");
  }
  const StftPlan plan = cfg.stft_plan();
  const nn::Index frames = plan.frames_for(w.size());
  const nn::Index bins = plan.bins();
  std::vector<double> mag(static_cast<size_t>(bins * frames));
  plan.magnitude(w.samples.data(), w.size(), mag.data());

  const std::vector<double> fb = mel_filterbank(cfg);
  MelSpectrogram out;
  out.n_mels = cfg.n_mels;
  out.frames = frames;
  out.values.assign(static_cast<size_t>(cfg.n_mels * frames), 0.0);
  for (nn::Index m = 0; m < cfg.n_mels; ++m) {
    for (nn::Index k = 0; k < bins; ++k) {
      const double fw = fb[static_cast<size_t>(m * bins + k)];
      if (fw == 0.0) continue;
      const double* mrow = &mag[static_cast<size_t>(k * frames)];
      double* orow = &out.values[static_cast<size_t>(m * frames)];
      for (nn::Index f = 0; f < frames; ++f) orow[f] += fw * mrow[f];
    }
  }
  for (auto& v : out.values) v = std::log(v > cfg.log_floor ? v : cfg.log_floor);
  return out;
}

nn::Tensor mel_to_tensor(const MelSpectrogram& m) {
  nn::Tensor t({1, m.n_mels, m.frames});
  t.data.assign(m.values.begin(), m.values.end());
  return t;
}

MelSpectrogram tensor_to_mel(const nn::Tensor& t, nn::Index item) {
  if (t.rank() != 3) throw std::invalid_argument("tensor_to_mel: expects (N, M, F)");
  MelSpectrogram m;
  m.n_mels = t.dim(1);
  m.frames = t.dim(2);
  m.values.resize(static_cast<size_t>(m.n_mels * m.frames));
  const double* src = t.ptr() + item * m.n_mels * m.frames;
  for (size_t i = 0; i < m.values.size(); ++i) m.values[i] = src[i];
  return m;
}

}  // namespace vpfd
