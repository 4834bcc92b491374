#include "toepnmf/metrics.hpp"

#include "toepnmf/error.hpp"
#include "toepnmf/fft.hpp"
#include "toepnmf/parallel.hpp"
#include "toepnmf/seminmf.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace toepnmf {

double rmse(const Matrix& x, const Matrix& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols()) throw DimensionError("rmse: shape mismatch");
  if (x.size() == 0) throw DimensionError("rmse: empty matrices");
  return std::sqrt((x - xhat).squaredNorm() / static_cast<double>(x.size()));
}

namespace {

std::vector<double> floored_magnitude(const Vector& v) {
  const auto spec = dft(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  std::vector<double> mag(spec.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    mag[i] = std::abs(spec[i]);
    peak = std::max(peak, mag[i]);
  }
  const double floor = 1e-12 * peak;
  for (auto& m : mag) m = std::max(m, floor);
  return mag;
}

PlaneSlice make_slice(const std::vector<DirectionMetrics>& rows, bool horizontal) {
  PlaneSlice s;
  double sd = 0.0, nnze = 0.0;
  for (const auto& r : rows) {
    const double angle = horizontal ? r.direction.elevation_deg : r.direction.azimuth_deg;
    if (std::abs(angle) < kPlaneToleranceDeg) {
      s.members.push_back(r.index);
      sd += r.sd_db;
      nnze += static_cast<double>(r.nnze);
    }
  }
  if (!s.members.empty()) {
    s.mean_sd_db = sd / static_cast<double>(s.members.size());
    s.mean_nnze = nnze / static_cast<double>(s.members.size());
  }
  return s;
}

}  // namespace

double spectral_distortion(const Vector& x, const Vector& xhat) {
  if (x.size() != xhat.size()) throw DimensionError("spectral_distortion: length mismatch");
  if (x.size() == 0) throw DimensionError("spectral_distortion: empty input");
  if (x.isZero(0.0) || xhat.isZero(0.0)) throw DataError("spectral_distortion: all-zero input");
  const auto a = floored_magnitude(x);
  const auto b = floored_magnitude(xhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double db = 20.0 * std::log10(a[i] / b[i]);
    acc += db * db;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

EvalReport evaluate(const FactorModel& model, const HrirSet& set, double prune_threshold) {
  if (set.num_taps() != model.num_taps || set.num_directions() != model.num_directions)
    throw DimensionError("evaluate: model and HRIR set dimensions differ");
  const Matrix xhat = reconstruct_all(model);
  const Matrix& x = set.data();
  EvalReport report;
  report.per_direction.resize(static_cast<std::size_t>(model.num_directions));
  parallel_for(model.num_directions, [&](Index j) {
    DirectionMetrics& r = report.per_direction[static_cast<std::size_t>(j)];
    r.index = j;
    r.direction = set.directions()[static_cast<std::size_t>(j)];
    r.rmse = std::sqrt((x.col(j) - xhat.col(j)).squaredNorm() / static_cast<double>(x.rows()));
    // A direction whose reconstruction vanishes has no finite SD; report it
    // as infinite instead of failing the whole evaluation.
    r.sd_db = xhat.col(j).isZero(0.0) ? INFINITY : spectral_distortion(x.col(j), xhat.col(j));
    if (model.sparsity)
      r.nnze = model.sparsity->rows[static_cast<std::size_t>(j)].nnze();
    else
      r.nnze = (model.G.row(j).array() > prune_threshold).count();
  });
  double sd = 0.0, nnze = 0.0;
  for (const auto& r : report.per_direction) {
    sd += r.sd_db;
    nnze += static_cast<double>(r.nnze);
  }
  report.mean_sd_db = sd / static_cast<double>(report.per_direction.size());
  report.mean_nnze = nnze / static_cast<double>(report.per_direction.size());
  report.rmse_global = rmse(x, xhat);
  report.horizontal = make_slice(report.per_direction, true);
  report.median = make_slice(report.per_direction, false);
  return report;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "direction_index,az_deg,el_deg,rmse,sd_db,nnze\n";
  char buf[256];
  for (const auto& r : report.per_direction) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%lld\n", static_cast<long long>(r.index),
                  r.direction.azimuth_deg, r.direction.elevation_deg, r.rmse, r.sd_db,
                  static_cast<long long>(r.nnze));
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace toepnmf
