#include "toepnmf/signal_io.hpp"

#include "toepnmf/error.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace toepnmf {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

Signal::Signal(std::vector<double> samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (sample_rate_hz_ <= 0) throw DataError("Signal: sample rate must be positive");
  for (double v : samples_)
    if (!std::isfinite(v)) throw DataError("Signal: non-finite sample");
}

Signal read_wav(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError(path.string() + ": not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError(path.string() + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(path.string() + ": short fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26) format = le16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw DataError(path.string() + ": data chunk before fmt");
      if (channels != 1) throw DataError(path.string() + ": only mono WAV is supported");
      std::vector<double> samples;
      if (format == 1 && bits == 16) {
        samples.resize(size / 2);
        for (std::size_t i = 0; i < samples.size(); ++i)
          samples[i] = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i)) / 32768.0;
      } else if (format == 3 && bits == 32) {
        samples.resize(size / 4);
        for (std::size_t i = 0; i < samples.size(); ++i)
          samples[i] = std::bit_cast<float>(le32(bytes.data() + body + 4 * i));
      } else {
        throw DataError(path.string() + ": unsupported WAV encoding (need PCM16 or float32)");
      }
      return Signal(std::move(samples), static_cast<int>(rate));
    }
    pos = body + size + (size & 1);
  }
  throw DataError(path.string() + ": no data chunk");
}

void write_wav(const Signal& signal, const fs::path& path) {
  const auto data_bytes = static_cast<std::uint32_t>(signal.size() * 4);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 3);  // IEEE float
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(signal.sample_rate_hz()));
  put32(out, static_cast<std::uint32_t>(signal.sample_rate_hz()) * 4);
  put16(out, 4);
  put16(out, 32);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_bytes);
  for (double v : signal.samples()) put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_bytes(path, out);
}

Signal read_raw_f32(const fs::path& path, int sample_rate_hz) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 4 != 0) throw DataError(path.string() + ": size is not a multiple of 4");
  std::vector<double> samples(bytes.size() / 4);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = std::bit_cast<float>(le32(bytes.data() + 4 * i));
  return Signal(std::move(samples), sample_rate_hz);
}

void write_raw_f32(const Signal& signal, const fs::path& path) {
  std::vector<unsigned char> out;
  out.reserve(signal.size() * 4);
  for (double v : signal.samples()) put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_bytes(path, out);
}

Signal read_signal(const fs::path& path, int raw_sample_rate_hz) {
  if (path.extension() == ".wav") return read_wav(path);
  return read_raw_f32(path, raw_sample_rate_hz);
}

void write_signal(const Signal& signal, const fs::path& path) {
  if (path.extension() == ".wav")
    write_wav(signal, path);
  else
    write_raw_f32(signal, path);
}

}  // namespace toepnmf
