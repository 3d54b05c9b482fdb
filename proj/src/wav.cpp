#include "vpfd/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vpfd/errors.hpp"

namespace vpfd {

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace

Waveform load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open wav file: " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 44) throw DataError("wav too short (truncated header): " + path);
  if (std::memcmp(raw.data(), "RIFF", 4) != 0 || std::memcmp(raw.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path);
  }

  size_t pos = 12;
  uint16_t fmt_code = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  Waveform w;
  bool have_data = false;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    const uint32_t sz = get_u32(raw.data() + pos + 4);
    pos += 8;
    if (pos + sz > raw.size()) throw DataError("wav chunk overruns file (truncated): " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw DataError("wav fmt chunk too small: " + path);
      fmt_code = get_u16(raw.data() + pos);
      channels = get_u16(raw.data() + pos + 2);
      sample_rate = get_u32(raw.data() + pos + 4);
      bits = get_u16(raw.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw DataError("wav data chunk before fmt: " + path);
      if (fmt_code != 1) throw DataError("unsupported wav encoding (want PCM): " + path);
      if (channels != 1) throw DataError("unsupported channel count (want mono): " + path);
      if (bits != 16) throw DataError("unsupported bit depth (want 16): " + path);
      const size_t n = sz / 2;
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const int16_t s = static_cast<int16_t>(get_u16(raw.data() + pos + 2 * i));
        w.samples[i] = static_cast<double>(s) / 32768.0;
      }
      w.sample_rate = static_cast<double>(sample_rate);
      have_data = true;
    }
    pos += sz + (sz & 1);
  }
  if (!have_data) throw DataError("wav has no data chunk: " + path);
  return w;
}

void save_wav(const Waveform& w, const std::string& path) {
  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out.append("RIFF");
  put_u32(out, 36 + 2 * n);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  const uint32_t sr = static_cast<uint32_t>(std::lround(w.sample_rate));
  put_u32(out, sr);
  put_u32(out, sr * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.append("data");
  put_u32(out, 2 * n);
  for (uint32_t i = 0; i < n; ++i) {
    double v = w.samples[i];
    if (v > 1.0) v = 1.0;
    if (v < -1.0) v = -1.0;
    long q = std::lround(v * 32768.0);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write wav file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write to wav file: " + path);
}

}  // namespace vpfd
