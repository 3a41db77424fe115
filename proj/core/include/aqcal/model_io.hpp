#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "aqcal/gbdt.hpp"
#include "aqcal/linear_booster.hpp"

namespace aqcal::model_io {

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kFileExtension = ".calib.json";

enum class BoosterKind { kTree, kLinear };

using Model = std::variant<gbdt::Ensemble, linear::LinearModel>;

BoosterKind booster_kind(const Model& model);
std::string_view to_string(BoosterKind kind);

struct TrainingMeta {
  std::size_t rounds_run = 0;
  std::optional<std::size_t> best_iteration;
  std::uint64_t seed = 0;

  bool operator==(const TrainingMeta&) const = default;
};

struct ModelFile {
  Model model;
  gbdt::Hyperparams hyperparams;
  TrainingMeta training;
};

TrainingMeta meta_from(const gbdt::TrainReport& report, const gbdt::Hyperparams& params);

// Canonical JSON: keys sorted, reals in shortest round-trip form, two-space
// indentation, trailing newline. Equal inputs give equal bytes.
std::string save(const ModelFile& file);
std::string save(const Model& model, const gbdt::Hyperparams& params,
                 const gbdt::TrainReport& report);

// Throws kParse for malformed JSON, kVersion for a missing or unknown
// format_version and kIntegrity for structural violations.
ModelFile load(std::string_view text);

std::vector<double> predict(const Model& model, const FeatureMatrix& matrix);
const std::vector<std::string>& feature_names(const Model& model);
TargetMode target_mode(const Model& model);

}  // namespace aqcal::model_io
