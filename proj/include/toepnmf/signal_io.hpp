#pragma once

#include <filesystem>
#include <vector>

namespace toepnmf {

// Mono signal. Construction rejects non-finite samples and non-positive rates.
class Signal {
 public:
  Signal(std::vector<double> samples, int sample_rate_hz);

  const std::vector<double>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  int sample_rate_hz() const { return sample_rate_hz_; }

 private:
  std::vector<double> samples_;
  int sample_rate_hz_;
};

// Mono WAV, PCM16 or IEEE float32. Chunks other than fmt/data are skipped.
Signal read_wav(const std::filesystem::path& path);
// Writes IEEE float32 mono WAV.
void write_wav(const Signal& signal, const std::filesystem::path& path);

Signal read_raw_f32(const std::filesystem::path& path, int sample_rate_hz);
void write_raw_f32(const Signal& signal, const std::filesystem::path& path);

// Dispatches on extension: ".wav" -> WAV, anything else -> raw f32le.
Signal read_signal(const std::filesystem::path& path, int raw_sample_rate_hz);
void write_signal(const Signal& signal, const std::filesystem::path& path);

}  // namespace toepnmf
