#include "run_config.hpp"

#include <sstream>

#include "aqcal/error.hpp"
#include "aqcal/format.hpp"

namespace aqcal::cli {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  if (!parse_real(text, v)) fail(ErrorKind::kConfig, key + ": '" + text + "' is not a number");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    fail(ErrorKind::kConfig, key + ": '" + text + "' is not an integer");
  }
  return v;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::stringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) fail(ErrorKind::kConfig, "config line " + std::to_string(line_no) + ": empty key");
    if (key == "input") {
      for (const auto& p : split_list(value)) cfg.add_input(p);
    } else {
      cfg.set(key, value);
    }
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

void RunConfig::add_input(const std::string& path) { inputs_.push_back(path); }

void RunConfig::merge(const RunConfig& overrides) {
  for (const auto& [k, v] : overrides.values_) values_[k] = v;
  if (!overrides.inputs_.empty()) inputs_ = overrides.inputs_;
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double RunConfig::real_or(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? to_real(key, *v) : fallback;
}

long long RunConfig::integer_or(const std::string& key, long long fallback) const {
  const auto v = get(key);
  return v ? to_integer(key, *v) : fallback;
}

bool RunConfig::has_section(std::string_view prefix) const {
  for (const auto& [k, v] : values_) {
    if (k.starts_with(prefix)) return true;
  }
  return false;
}

gbdt::Hyperparams RunConfig::hyperparams(gbdt::Hyperparams p) const {
  p.eta = real_or("eta", p.eta);
  p.n_rounds = static_cast<int>(integer_or("rounds", p.n_rounds));
  p.max_depth = static_cast<int>(integer_or("max_depth", p.max_depth));
  p.subsample = real_or("subsample", p.subsample);
  p.colsample_bytree = real_or("colsample_bytree", p.colsample_bytree);
  p.min_child_weight = real_or("min_child_weight", p.min_child_weight);
  p.lambda = real_or("lambda", p.lambda);
  p.gamma = real_or("gamma", p.gamma);
  p.alpha = real_or("alpha", p.alpha);
  if (has("seed")) p.seed = static_cast<std::uint64_t>(integer_or("seed", 0));
  if (const auto esr = get("early_stopping_rounds")) {
    if (*esr == "none" || esr->empty()) {
      p.early_stopping_rounds.reset();
    } else {
      p.early_stopping_rounds = static_cast<int>(to_integer("early_stopping_rounds", *esr));
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  return p;
}

ingest::Schema RunConfig::schema() const {
  ingest::Schema s;
  for (const auto& [k, v] : values_) {
    if (k.starts_with("schema.")) s.set(k.substr(7), v);
  }
  return s;
}

synth::SynthConfig RunConfig::synth_config() const {
  synth::SynthConfig c;
  for (const auto& [k, v] : values_) {
    if (!k.starts_with("synth.")) continue;
    const std::string f = k.substr(6);
    if (f == "n_sensors") c.n_sensors = static_cast<std::size_t>(to_integer(k, v));
    else if (f == "n_timesteps") c.n_timesteps = static_cast<std::size_t>(to_integer(k, v));
    else if (f == "center_lon") c.center_lon = to_real(k, v);
    else if (f == "center_lat") c.center_lat = to_real(k, v);
    else if (f == "spread") c.spread = to_real(k, v);
    else if (f == "coeff_raw") c.coeff_raw = to_real(k, v);
    else if (f == "coeff_hum") c.coeff_hum = to_real(k, v);
    else if (f == "coeff_temp") c.coeff_temp = to_real(k, v);
    else if (f == "spatial_amp") c.spatial_amp = to_real(k, v);
    else if (f == "noise_sigma") c.noise_sigma = to_real(k, v);
    else if (f == "seed") c.seed = static_cast<std::uint64_t>(to_integer(k, v));
    else if (f == "shift_wavelengths" || f == "missing_fraction") continue;
    else fail(ErrorKind::kConfig, "unknown synth key '" + k + "'");
  }
  if (!has("synth.seed") && has("seed")) c.seed = static_cast<std::uint64_t>(integer_or("seed", 1));
  if (const auto shift = get("synth.shift_wavelengths")) {
    c = synth::shifted(c, to_real("synth.shift_wavelengths", *shift));
  }
  return c;
}

tune::ParamGrid RunConfig::grid() const {
  tune::ParamGrid grid;
  for (const auto& [k, v] : values_) {
    if (!k.starts_with("grid.")) continue;
    auto& axis = grid[k.substr(5)];
    for (const auto& item : split_list(v)) axis.push_back(to_real(k, item));
  }
  return grid;
}

}  // namespace aqcal::cli
