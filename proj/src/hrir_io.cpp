#include "toepnmf/hrir_io.hpp"

#include "toepnmf/error.hpp"
#include "toepnmf/fft.hpp"
#include "toepnmf/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

namespace toepnmf {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kPayload = "hrir.f32";

void check_finite(std::span<const double> h, const char* what) {
  for (double v : h)
    if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite sample");
}

std::vector<double> parse_row(const std::string& line, bool& ok) {
  std::vector<double> row;
  ok = true;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      ok = false;
      return row;
    }
    const char* begin = cell.c_str() + first;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) {
      ok = false;
      return row;
    }
    row.push_back(v);
  }
  ok = ok && !row.empty();
  return row;
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    bool ok = false;
    auto row = parse_row(line, ok);
    if (!ok) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw DataError(path.string() + ": unparsable line '" + line + "'");
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

HrirSet::HrirSet(Matrix data, int sample_rate_hz, std::vector<Direction> directions,
                 PreprocessFlags flags, double norm_tolerance)
    : data_(std::move(data)),
      sample_rate_hz_(sample_rate_hz),
      directions_(std::move(directions)),
      flags_(flags) {
  if (data_.rows() == 0 || data_.cols() == 0)
    throw DataError("HrirSet: M and N must both be positive");
  if (sample_rate_hz_ <= 0) throw DataError("HrirSet: sample rate must be positive");
  if (static_cast<Index>(directions_.size()) != data_.cols())
    throw DataError("HrirSet: directions count does not match number of columns");
  if (!data_.allFinite()) throw DataError("HrirSet: non-finite samples");
  for (Index j = 0; j < data_.cols(); ++j) {
    const auto col = data_.col(j);
    if (flags_.normalized && std::abs(col.cwiseAbs().sum() - 1.0) > norm_tolerance)
      throw DataError("HrirSet: column " + std::to_string(j) + " is not normalized");
    if (flags_.delay_removed) {
      const double peak = col.cwiseAbs().maxCoeff();
      // Slack of one float32 ulp relative to peak so bundles pass re-validation.
      if (std::abs(col(0)) < flags_.onset_fraction * peak * (1.0 - 1e-6))
        throw DataError("HrirSet: column " + std::to_string(j) + " has onset after tap 0");
    }
  }
}

HrirSet load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifest;
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing manifest: " + manifest_path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  }
  try {
    if (m.at("format_version").get<int>() != 1) throw DataError("unsupported format_version");
    if (m.at("dtype").get<std::string>() != "f32le") throw DataError("unsupported dtype");
    if (m.at("layout").get<std::string>() != "direction_major")
      throw DataError("unsupported layout");
    const auto n = m.at("num_directions").get<std::int64_t>();
    const auto taps = m.at("num_taps").get<std::int64_t>();
    if (n <= 0 || taps <= 0) throw DataError("bundle has empty dimensions");
    const int rate = m.at("sample_rate_hz").get<int>();
    PreprocessFlags flags;
    const auto& f = m.at("flags");
    flags.minphase = f.at("minphase").get<bool>();
    flags.delay_removed = f.at("delay_removed").get<bool>();
    flags.normalized = f.at("normalized").get<bool>();
    flags.onset_fraction = f.value("onset_fraction", kDefaultOnsetFraction);
    std::vector<Direction> dirs;
    for (const auto& d : m.at("directions"))
      dirs.push_back({d.at("az_deg").get<double>(), d.at("el_deg").get<double>()});
    if (static_cast<std::int64_t>(dirs.size()) != n)
      throw DataError("manifest directions count does not match num_directions");

    const fs::path payload = dir / m.at("data_file").get<std::string>();
    std::ifstream raw(payload, std::ios::binary);
    if (!raw) throw DataError("missing payload: " + payload.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)),
                                     std::istreambuf_iterator<char>());
    const auto expected = static_cast<std::size_t>(n * taps) * 4;
    if (bytes.size() != expected)
      throw DataError("dimension mismatch: payload has " + std::to_string(bytes.size() / 4) +
                      " values, manifest expects " + std::to_string(n * taps));
    Matrix data(taps, n);
    for (std::int64_t j = 0; j < n; ++j) {
      for (std::int64_t i = 0; i < taps; ++i) {
        const std::size_t off = static_cast<std::size_t>(j * taps + i) * 4;
        const std::uint32_t word = std::uint32_t{bytes[off]} | (std::uint32_t{bytes[off + 1]} << 8) |
                                   (std::uint32_t{bytes[off + 2]} << 16) |
                                   (std::uint32_t{bytes[off + 3]} << 24);
        data(i, j) = static_cast<double>(std::bit_cast<float>(word));
      }
    }
    return HrirSet(std::move(data), rate, std::move(dirs), flags, kNormToleranceF32);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  }
}

void save_bundle(const HrirSet& set, const fs::path& dir) {
  const Index taps = set.num_taps();
  const Index n = set.num_directions();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  json m;
  m["format_version"] = 1;
  m["sample_rate_hz"] = set.sample_rate_hz();
  m["num_directions"] = n;
  m["num_taps"] = taps;
  m["flags"] = {{"minphase", set.flags().minphase},
                {"delay_removed", set.flags().delay_removed},
                {"normalized", set.flags().normalized},
                {"onset_fraction", set.flags().onset_fraction}};
  json dirs = json::array();
  for (const auto& d : set.directions()) dirs.push_back({{"az_deg", d.azimuth_deg}, {"el_deg", d.elevation_deg}});
  m["directions"] = std::move(dirs);
  m["data_file"] = kPayload;
  m["dtype"] = "f32le";
  m["layout"] = "direction_major";

  std::vector<unsigned char> bytes(static_cast<std::size_t>(taps * n) * 4);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < taps; ++i) {
      const auto word = std::bit_cast<std::uint32_t>(static_cast<float>(set.data()(i, j)));
      const std::size_t off = static_cast<std::size_t>(j * taps + i) * 4;
      for (int b = 0; b < 4; ++b) bytes[off + b] = static_cast<unsigned char>(word >> (8 * b));
    }
  }
  std::ofstream raw(dir / kPayload, std::ios::binary | std::ios::trunc);
  raw.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  std::ofstream man(dir / kManifest, std::ios::trunc);
  man << m.dump(2) << '\n';
  if (!raw || !man) throw DataError("write failed for bundle " + dir.string());
}

HrirSet load_csv(const fs::path& matrix_csv, const fs::path& directions_csv, int sample_rate_hz) {
  const auto rows = read_csv_rows(matrix_csv);
  const auto drows = read_csv_rows(directions_csv);
  if (rows.empty()) throw DataError(matrix_csv.string() + ": no data rows");
  const std::size_t taps = rows.front().size();
  Matrix data(static_cast<Index>(taps), static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != taps) throw DataError(matrix_csv.string() + ": ragged rows");
    for (std::size_t i = 0; i < taps; ++i) data(static_cast<Index>(i), static_cast<Index>(j)) = rows[j][i];
  }
  if (drows.size() != rows.size())
    throw DataError("directions CSV has " + std::to_string(drows.size()) + " rows, matrix has " +
                    std::to_string(rows.size()));
  std::vector<Direction> dirs;
  for (const auto& r : drows) {
    if (r.size() < 2) throw DataError(directions_csv.string() + ": expected az_deg,el_deg");
    dirs.push_back({r[0], r[1]});
  }
  return HrirSet(std::move(data), sample_rate_hz, std::move(dirs));
}

namespace {

// One cepstral pass at a fixed transform size.
std::vector<double> min_phase_at(std::span<const double> h, std::size_t nfft) {
  const Fft plan(nfft);
  std::vector<Complex> spec(nfft);
  std::copy(h.begin(), h.end(), spec.begin());
  plan.forward(spec);
  double peak = 0.0;
  for (const auto& v : spec) peak = std::max(peak, std::abs(v));
  const double floor = 1e-12 * peak;
  for (auto& v : spec) v = std::log(std::max(std::abs(v), floor));
  plan.inverse(spec);  // real cepstrum in the real part
  std::vector<Complex> folded(nfft);
  folded[0] = spec[0].real();
  for (std::size_t n = 1; n < nfft / 2; ++n) folded[n] = 2.0 * spec[n].real();
  folded[nfft / 2] = spec[nfft / 2].real();
  plan.forward(folded);
  for (auto& v : folded) v = std::exp(v);
  plan.inverse(folded);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = folded[i].real();
  return out;
}

double magnitude_mismatch(std::span<const double> a, std::span<const double> b, std::size_t nfft) {
  const Fft plan(nfft);
  std::vector<Complex> sa(nfft), sb(nfft);
  std::copy(a.begin(), a.end(), sa.begin());
  std::copy(b.begin(), b.end(), sb.begin());
  plan.forward(sa);
  plan.forward(sb);
  double peak = 0.0;
  for (const auto& v : sa) peak = std::max(peak, std::abs(v));
  double worst = 0.0;
  for (std::size_t k = 0; k < nfft; ++k) {
    const double ref = std::abs(sa[k]);
    worst = std::max(worst, std::abs(ref - std::abs(sb[k])) / std::max(ref, 1e-9 * peak));
  }
  return worst;
}

}  // namespace

std::vector<double> to_min_phase(std::span<const double> h) {
  if (h.empty()) throw DataError("to_min_phase: empty input");
  check_finite(h, "to_min_phase");
  if (std::all_of(h.begin(), h.end(), [](double v) { return v == 0.0; }))
    throw DataError("to_min_phase: all-zero input");
  // Start at the next power of two >= 4M and double while cepstral aliasing
  // still shows up in the magnitude response.
  const std::size_t start = next_pow2(4 * h.size());
  const std::size_t cap = std::max<std::size_t>(start, std::size_t{1} << 16);
  std::vector<double> best;
  for (std::size_t nfft = start;; nfft *= 2) {
    best = min_phase_at(h, nfft);
    if (nfft >= cap || magnitude_mismatch(h, best, start) <= 1e-10) break;
  }
  return best;
}

std::vector<double> remove_onset_delay(std::span<const double> h, double threshold_fraction) {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
    throw DimensionError("remove_onset_delay: threshold_fraction must lie in (0, 1)");
  check_finite(h, "remove_onset_delay");
  double peak = 0.0;
  for (double v : h) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw DataError("remove_onset_delay: all-zero input");
  std::size_t onset = 0;
  while (std::abs(h[onset]) < threshold_fraction * peak) ++onset;
  std::vector<double> out(h.size(), 0.0);
  std::copy(h.begin() + static_cast<std::ptrdiff_t>(onset), h.end(), out.begin());
  return out;
}

std::vector<double> normalize_abs_sum(std::span<const double> h) {
  check_finite(h, "normalize_abs_sum");
  double sum = 0.0;
  for (double v : h) sum += std::abs(v);
  if (sum == 0.0) throw DataError("normalize_abs_sum: zero vector");
  std::vector<double> out(h.begin(), h.end());
  for (auto& v : out) v /= sum;
  return out;
}

HrirSet preprocess(const HrirSet& set, const PreprocessOptions& options) {
  Matrix data = set.data();
  const Index taps = data.rows();
  parallel_for(data.cols(), [&](Index j) {
    std::vector<double> h(data.col(j).data(), data.col(j).data() + taps);
    if (options.minphase) h = to_min_phase(h);
    if (options.remove_delay) h = remove_onset_delay(h, options.onset_fraction);
    if (options.normalize) h = normalize_abs_sum(h);
    std::copy(h.begin(), h.end(), data.col(j).data());
  });
  // A flag carried over from the input survives only if no later-stage step
  // that could invalidate it was re-run.
  const PreprocessFlags& in = set.flags();
  PreprocessFlags flags;
  flags.minphase = options.minphase || (in.minphase && !options.remove_delay);
  flags.delay_removed = options.remove_delay || (in.delay_removed && !options.minphase);
  flags.onset_fraction = options.remove_delay ? options.onset_fraction : in.onset_fraction;
  flags.normalized = options.normalize || (in.normalized && !options.minphase && !options.remove_delay);
  return HrirSet(std::move(data), set.sample_rate_hz(), set.directions(), flags);
}

}  // namespace toepnmf
