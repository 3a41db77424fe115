#include "aqcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "aqcal/error.hpp"
#include "aqcal/rng.hpp"

namespace aqcal::synth {
namespace {

// Slow "weather regime" cycle, in steps.
constexpr double kRegimePeriod = 720.0;
constexpr double kDiurnalPeriod = 24.0;

std::string sensor_name(std::size_t i, std::size_t n) {
  const int width = std::max(2, static_cast<int>(std::to_string(n).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%0*zu", width, i + 1);
  return buf;
}

}  // namespace

double spatial_wavelength() { return 2.0 * std::numbers::pi / kSpatialFrequency; }

void SynthConfig::validate() const {
  if (n_sensors < 1 || n_timesteps < 1) {
    fail(ErrorKind::kInvalidArgument, "synth: n_sensors and n_timesteps must be >= 1");
  }
  if (!(spread > 0.0)) fail(ErrorKind::kInvalidArgument, "synth: spread must be > 0");
  if (!(noise_sigma >= 0.0)) fail(ErrorKind::kInvalidArgument, "synth: noise_sigma must be >= 0");
  if (std::abs(center_lon) + spread > 180.0 || std::abs(center_lat) + spread > 90.0) {
    fail(ErrorKind::kInvalidArgument, "synth: sensor box leaves the valid lon/lat range");
  }
}

ingest::SensorSeries generate(const SynthConfig& config) {
  config.validate();
  const double two_pi = 2.0 * std::numbers::pi;
  ingest::SensorSeries out;
  for (std::size_t s = 0; s < config.n_sensors; ++s) {
    SplitMix64 rng(derive_seed(config.seed, s));
    const std::string id = sensor_name(s, config.n_sensors);
    const double lon = config.center_lon + rng.uniform(-config.spread, config.spread);
    const double lat = config.center_lat + rng.uniform(-config.spread, config.spread);
    const double spatial = config.spatial_amp * std::sin(kSpatialFrequency * lon) *
                           std::cos(kSpatialFrequency * lat);

    std::vector<ingest::SensorRecord> records;
    records.reserve(config.n_timesteps);
    for (std::size_t t = 0; t < config.n_timesteps; ++t) {
      const double td = static_cast<double>(t);
      const double regime = std::sin(two_pi * td / kRegimePeriod);
      const double diurnal = std::sin(two_pi * td / kDiurnalPeriod);

      ingest::SensorRecord rec;
      rec.sensor_id = id;
      rec.timestamp = config.start_epoch + static_cast<std::int64_t>(t) * config.step_seconds;
      rec.longitude = lon;
      rec.latitude = lat;
      const double temp_ext = 15.0 + 8.0 * regime + 5.0 * diurnal + rng.normal();
      const double temp_int = temp_ext + 4.0 + 0.5 * rng.normal();
      const double hum_ext =
          std::clamp(65.0 - 15.0 * regime - 10.0 * diurnal + 3.0 * rng.normal(), 5.0, 100.0);
      const double hum_int = std::clamp(hum_ext - 8.0 + rng.normal(), 0.0, 100.0);
      const double raw = 15.0 * std::exp(rng.normal() - 0.5);
      const double noise = config.noise_sigma * rng.normal();
      rec.raw_pm25 = raw;
      rec.temp_external = temp_ext;
      rec.temp_internal = temp_int;
      rec.hum_external = hum_ext;
      rec.hum_internal = hum_int;
      rec.ref_pm25 = config.coeff_raw * raw + config.coeff_hum * (hum_ext - 50.0) +
                     config.coeff_temp * (temp_ext - 15.0) + spatial + noise;
      records.push_back(std::move(rec));
    }
    out.emplace(id, std::move(records));
  }
  return out;
}

SynthConfig shifted(const SynthConfig& config, double wavelengths) {
  SynthConfig c = config;
  c.center_lon += wavelengths * spatial_wavelength();
  c.center_lat += wavelengths * spatial_wavelength();
  return c;
}

ingest::SensorSeries inject_missing(const ingest::SensorSeries& series, double fraction,
                                    std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    fail(ErrorKind::kInvalidArgument, "missing fraction must be in [0, 1]");
  }
  ingest::SensorSeries out = series;
  std::size_t s = 0;
  for (auto& [id, records] : out) {
    SplitMix64 rng(derive_seed(seed ^ 0xA5A5A5A5A5A5A5A5ULL, s++));
    for (auto& rec : records) {
      for (auto* field : {&rec.raw_pm25, &rec.ref_pm25, &rec.temp_internal, &rec.temp_external,
                          &rec.hum_internal, &rec.hum_external}) {
        if (rng.uniform() < fraction) field->reset();
      }
    }
  }
  return out;
}

std::vector<ingest::SensorRecord> flatten(const ingest::SensorSeries& series) {
  std::vector<ingest::SensorRecord> out;
  for (const auto& [id, records] : series) out.insert(out.end(), records.begin(), records.end());
  return out;
}

}  // namespace aqcal::synth
