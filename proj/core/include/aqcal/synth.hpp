#pragma once

#include <cstddef>
#include <cstdint>

#include "aqcal/ingest.hpp"

namespace aqcal::synth {

// Spatial frequency of the bias field, radians per degree.
inline constexpr double kSpatialFrequency = 40.0;

// One wavelength of the bias field in degrees (2 pi / 40).
double spatial_wavelength();

// A deterministic stand-in for a city-scale deployment. Readings are hourly.
struct SynthConfig {
  std::size_t n_sensors = 30;
  std::size_t n_timesteps = 5000;
  double center_lon = 4.40;  // Antwerp
  double center_lat = 51.22;
  double spread = 0.1;  // sensors fall in center +/- spread degrees
  double coeff_raw = 0.75;
  double coeff_hum = -0.1;
  double coeff_temp = 0.05;
  double spatial_amp = 10.0;
  double noise_sigma = 2.0;
  std::uint64_t seed = 1;
  std::int64_t start_epoch = 1577836800;  // 2020-01-01T00:00:00Z
  std::int64_t step_seconds = 3600;

  // Throws kInvalidArgument on zero counts, spread <= 0 or noise_sigma < 0.
  void validate() const;
};

// Per sensor: position uniform in the spread box; raw PM2.5 log-normal with
// mean 15; temperature and humidity as slow and diurnal sinusoids plus
// noise; and
//   ref = coeff_raw * raw + coeff_hum * (hum_external - 50)
//       + coeff_temp * (temp_external - 15)
//       + spatial_amp * sin(k lon) * cos(k lat) + N(0, noise_sigma).
// Sensor i draws from substream derive_seed(seed, i).
ingest::SensorSeries generate(const SynthConfig& config);

// Same network moved `wavelengths` bias wavelengths in both lon and lat.
SynthConfig shifted(const SynthConfig& config, double wavelengths);

// Blanks each optional reading independently with probability `fraction`.
ingest::SensorSeries inject_missing(const ingest::SensorSeries& series, double fraction,
                                    std::uint64_t seed);

// All records in (sensor_id, timestamp) order.
std::vector<ingest::SensorRecord> flatten(const ingest::SensorSeries& series);

}  // namespace aqcal::synth
