#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aqcal/gbdt.hpp"
#include "aqcal/ingest.hpp"
#include "aqcal/preprocess.hpp"
#include "aqcal/synth.hpp"
#include "aqcal/tune.hpp"

namespace aqcal::cli {

// Key-value settings. Config file grammar, one entry per line:
//
//   # comment
//   key = value
//
// Blank lines and lines starting with '#' are ignored; whitespace around
// key and value is trimmed; a repeated key replaces the earlier value
// except for `input`, which accumulates. Dotted keys address sections:
// schema.<field>, synth.<field>, grid.<axis> (comma-separated values).
class RunConfig {
 public:
  static RunConfig parse(std::string_view text);

  void set(const std::string& key, const std::string& value);
  void add_input(const std::string& path);
  // Later entries win.
  void merge(const RunConfig& overrides);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double real_or(const std::string& key, double fallback) const;
  long long integer_or(const std::string& key, long long fallback) const;
  const std::vector<std::string>& inputs() const { return inputs_; }

  // Typed views. Unknown keys inside a section are config errors.
  gbdt::Hyperparams hyperparams(gbdt::Hyperparams base = {}) const;
  ingest::Schema schema() const;
  synth::SynthConfig synth_config() const;
  tune::ParamGrid grid() const;
  bool has_section(std::string_view prefix) const;

  // Resolved settings, for the manifest.
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> inputs_;
};

}  // namespace aqcal::cli
