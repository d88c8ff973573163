#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "painloop/actions.hpp"
#include "painloop/error.hpp"

namespace painloop {

// Mono signal, samples nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  double rate = 44100.0;

  double duration() const { return static_cast<double>(samples.size()) / rate; }
};

inline Waveform apply_gain(const Waveform& w, double g) {
  if (!(g >= 0.0) || !std::isfinite(g)) throw Error(Errc::invalid_gain, "gain must be finite and >= 0");
  Waveform out{std::vector<double>(w.samples.size()), w.rate};
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    out.samples[i] = std::clamp(w.samples[i] * g, -1.0, 1.0);
  return out;
}

// Playback-rate resampling: pitch goes up by p and duration shrinks by p.
// Output sample j reads the input at position j * p with linear interpolation.
inline Waveform pitch_shift(const Waveform& w, double p) {
  if (!(p > 0.0) || !std::isfinite(p)) throw Error(Errc::invalid_pitch, "pitch factor must be > 0");
  const std::size_t n = w.samples.size();
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) / p));
  Waveform out{std::vector<double>(m), w.rate};
  if (n == 0) return out;
  for (std::size_t j = 0; j < m; ++j) {
    const double pos = static_cast<double>(j) * p;
    const auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= n) {
      out.samples[j] = w.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out.samples[j] = w.samples[i0] + frac * (w.samples[i0 + 1] - w.samples[i0]);
  }
  return out;
}

inline Waveform render_action(const Waveform& track, const Action& a, const ActionSpace& space) {
  if (!valid(a)) throw Error(Errc::invalid_action, "action index out of range");
  return apply_gain(pitch_shift(track, space.pitch(a)), space.amplitude(a));
}

namespace wav {

inline void put_le(std::string& buf, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_le(const std::string& buf, std::size_t at, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint32_t(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  return v;
}

inline std::int16_t quantize(double x) {
  return static_cast<std::int16_t>(std::lround(std::clamp(x, -1.0, 1.0) * 32767.0));
}

}  // namespace wav

// Serializes as RIFF/WAVE, PCM 16-bit mono.
inline std::string wav_encode(const Waveform& w) {
  if (!(w.rate > 0.0)) throw Error(Errc::format, "sample rate must be > 0");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  const auto rate = static_cast<std::uint32_t>(std::lround(w.rate));
  std::string buf;
  buf.reserve(44 + data_bytes);
  buf += "RIFF";
  wav::put_le(buf, 36 + data_bytes, 4);
  buf += "WAVE";
  buf += "fmt ";
  wav::put_le(buf, 16, 4);
  wav::put_le(buf, 1, 2);         // PCM
  wav::put_le(buf, 1, 2);         // channels
  wav::put_le(buf, rate, 4);
  wav::put_le(buf, rate * 2, 4);  // byte rate
  wav::put_le(buf, 2, 2);         // block align
  wav::put_le(buf, 16, 2);        // bits per sample
  buf += "data";
  wav::put_le(buf, data_bytes, 4);
  for (double x : w.samples) wav::put_le(buf, static_cast<std::uint16_t>(wav::quantize(x)), 2);
  return buf;
}

inline Waveform wav_decode(const std::string& buf) {
  if (buf.size() < 12) throw Error(Errc::format, "RIFF header truncated");
  if (buf.compare(0, 4, "RIFF") != 0) throw Error(Errc::format, "chunk id is not RIFF");
  if (buf.compare(8, 4, "WAVE") != 0) throw Error(Errc::format, "RIFF form type is not WAVE");
  bool have_fmt = false;
  double rate = 0.0;
  std::size_t at = 12;
  while (at + 8 <= buf.size()) {
    const std::string id = buf.substr(at, 4);
    const std::uint32_t size = wav::get_le(buf, at + 4, 4);
    const std::size_t body = at + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > buf.size()) throw Error(Errc::format, "fmt chunk truncated");
      const auto format = wav::get_le(buf, body, 2);
      const auto channels = wav::get_le(buf, body + 2, 2);
      const auto bits = wav::get_le(buf, body + 14, 2);
      if (format != 1) throw Error(Errc::format, "audio_format = " + std::to_string(format) + ", expected 1 (PCM)");
      if (channels != 1) throw Error(Errc::format, "channels = " + std::to_string(channels) + ", expected 1 (mono)");
      if (bits != 16)
        throw Error(Errc::format, "bits_per_sample = " + std::to_string(bits) + ", expected 16");
      rate = static_cast<double>(wav::get_le(buf, body + 4, 4));
      if (!(rate > 0.0)) throw Error(Errc::format, "sample_rate = 0");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(Errc::format, "data chunk precedes fmt chunk");
      if (body + size > buf.size()) throw Error(Errc::format, "data chunk truncated");
      if (size % 2 != 0) throw Error(Errc::format, "data size is not a whole number of samples");
      Waveform w{std::vector<double>(size / 2), rate};
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(wav::get_le(buf, body + 2 * i, 2));
        w.samples[i] = static_cast<double>(v) / 32767.0;
      }
      return w;
    }
    at = body + size + (size & 1);
  }
  throw Error(Errc::format, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

inline void wav_write(const Waveform& w, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::format, "cannot open " + path + " for writing");
  const auto buf = wav_encode(w);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw Error(Errc::format, "write failed: " + path);
}

inline Waveform wav_read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::format, "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return wav_decode(buf);
}

// Synthetic vocal-like pain sounds used when no recorded assets are supplied: a
// harmonic stack on a gliding, vibrato-modulated fundamental under an attack/decay
// envelope. Deterministic in (persona, track, rate).
inline Waveform synth_pain_track(Persona persona, int track, double rate = 44100.0) {
  struct Voice {
    double f0, glide, duration, attack, vibrato_hz, breath;
  };
  // Three tracks per persona: short yelp, drawn-out groan, sharp cry.
  static constexpr Voice male[3] = {{150.0, 1.25, 0.8, 0.03, 5.5, 0.05},
                                    {120.0, 0.85, 1.4, 0.12, 4.0, 0.10},
                                    {175.0, 1.40, 0.6, 0.02, 6.5, 0.04}};
  static constexpr Voice female[3] = {{290.0, 1.25, 0.8, 0.03, 6.0, 0.05},
                                      {240.0, 0.85, 1.4, 0.10, 4.5, 0.08},
                                      {340.0, 1.35, 0.6, 0.02, 7.0, 0.04}};
  if (track < 1 || track > 3) throw Error(Errc::config, "track must be 1, 2 or 3");
  const Voice v = (persona == Persona::male ? male : female)[track - 1];
  const auto n = static_cast<std::size_t>(v.duration * rate);
  Waveform w{std::vector<double>(n), rate};
  double phase = 0.0;
  std::uint32_t noise = 0x9e3779b9u + static_cast<std::uint32_t>(track) * 7919u +
                        (persona == Persona::male ? 0u : 104729u);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double u = t / v.duration;
    const double f = v.f0 * (1.0 + (v.glide - 1.0) * std::sin(std::numbers::pi * u)) *
                     (1.0 + 0.02 * std::sin(two_pi * v.vibrato_hz * t));
    phase += two_pi * f / rate;
    double s = 0.0;
    for (int h = 1; h <= 8; ++h) s += std::sin(h * phase) / (h * h * 0.5 + 0.5);
    noise = noise * 1664525u + 1013904223u;
    const double breath = (static_cast<double>(noise >> 8) / 16777216.0 - 0.5) * 2.0 * v.breath;
    const double env = std::min(1.0, t / v.attack) * std::pow(1.0 - u, 1.5);
    w.samples[i] = 0.45 * env * (s / 2.2 + breath);
  }
  return w;
}

}  // namespace painloop
