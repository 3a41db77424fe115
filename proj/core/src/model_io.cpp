#include "aqcal/model_io.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "aqcal/error.hpp"
#include "aqcal/format.hpp"

namespace aqcal::model_io {
namespace {

using json = nlohmann::json;

bool is_scalar(const json& j) { return !j.is_object() && !j.is_array(); }

void write_value(std::string& out, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + json(it.key()).dump() + ": ";
        write_value(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      const bool flat = std::all_of(j.begin(), j.end(), is_scalar);
      if (j.empty() || flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write_value(out, j[i], indent + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write_value(out, j[i], indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_real(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

json hyperparams_json(const gbdt::Hyperparams& p) {
  json j;
  j["eta"] = p.eta;
  j["n_rounds"] = p.n_rounds;
  j["max_depth"] = p.max_depth;
  j["subsample"] = p.subsample;
  j["colsample_bytree"] = p.colsample_bytree;
  j["min_child_weight"] = p.min_child_weight;
  j["lambda"] = p.lambda;
  j["gamma"] = p.gamma;
  j["alpha"] = p.alpha;
  j["seed"] = p.seed;
  j["early_stopping_rounds"] =
      p.early_stopping_rounds ? json(*p.early_stopping_rounds) : json(nullptr);
  return j;
}

// Reals written without a fraction ("2") come back as integers; accept both.
double real_of(const json& j, const std::string& what) {
  if (!j.is_number()) fail(ErrorKind::kIntegrity, what + " must be a number");
  return j.get<double>();
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    fail(ErrorKind::kIntegrity, where + ": missing key '" + key + "'");
  }
  return obj.at(key);
}

gbdt::Hyperparams hyperparams_from(const json& j) {
  gbdt::Hyperparams p;
  const std::string w = "hyperparams";
  p.eta = real_of(field(j, "eta", w), "eta");
  p.n_rounds = field(j, "n_rounds", w).get<int>();
  p.max_depth = field(j, "max_depth", w).get<int>();
  p.subsample = real_of(field(j, "subsample", w), "subsample");
  p.colsample_bytree = real_of(field(j, "colsample_bytree", w), "colsample_bytree");
  p.min_child_weight = real_of(field(j, "min_child_weight", w), "min_child_weight");
  p.lambda = real_of(field(j, "lambda", w), "lambda");
  p.gamma = real_of(field(j, "gamma", w), "gamma");
  p.alpha = real_of(field(j, "alpha", w), "alpha");
  p.seed = field(j, "seed", w).get<std::uint64_t>();
  const json& esr = field(j, "early_stopping_rounds", w);
  if (!esr.is_null()) p.early_stopping_rounds = esr.get<int>();
  return p;
}

gbdt::RegressionTree tree_from(const json& j, std::size_t index, std::size_t n_features) {
  const std::string where = "tree " + std::to_string(index);
  const json& feature = field(j, "feature", where);
  const json& threshold = field(j, "threshold", where);
  const json& left = field(j, "left", where);
  const json& right = field(j, "right", where);
  const json& weight = field(j, "weight", where);
  const std::size_t n = feature.size();
  if (!feature.is_array() || !threshold.is_array() || !left.is_array() || !right.is_array() ||
      !weight.is_array() || threshold.size() != n || left.size() != n || right.size() != n ||
      weight.size() != n) {
    fail(ErrorKind::kIntegrity, where + ": node arrays must be arrays of equal length");
  }
  gbdt::RegressionTree tree;
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = tree.nodes[i];
    node.feature = feature[i].get<std::int32_t>();
    node.threshold = real_of(threshold[i], where + " threshold");
    node.left = left[i].get<std::int32_t>();
    node.right = right[i].get<std::int32_t>();
    node.weight = real_of(weight[i], where + " weight");
    if (node.feature < -1) {
      fail(ErrorKind::kIntegrity, where + ", node " + std::to_string(i) + ": bad feature index");
    }
  }
  try {
    tree.validate(n_features);
  } catch (const Error& e) {
    fail(ErrorKind::kIntegrity, where + ", " + e.what());
  }
  return tree;
}

json tree_json(const gbdt::RegressionTree& tree) {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), weight = json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    weight.push_back(n.weight);
  }
  return json{{"feature", feature},
              {"left", left},
              {"right", right},
              {"threshold", threshold},
              {"weight", weight}};
}

ModelFile load_impl(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, std::string("model document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc["format_version"].is_number_integer()) {
    fail(ErrorKind::kVersion, "model document lacks an integer format_version");
  }
  const auto version = doc["format_version"].get<std::int64_t>();
  if (version != kFormatVersion) {
    fail(ErrorKind::kVersion, "unsupported format_version " + std::to_string(version));
  }

  ModelFile file;
  const std::string top = "model";
  file.hyperparams = hyperparams_from(field(doc, "hyperparams", top));
  const json& training = field(doc, "training", top);
  file.training.rounds_run = field(training, "rounds_run", "training").get<std::size_t>();
  const json& best = field(training, "best_iteration", "training");
  if (!best.is_null()) file.training.best_iteration = best.get<std::size_t>();
  file.training.seed = field(training, "seed", "training").get<std::uint64_t>();

  const auto names = field(doc, "feature_names", top).get<std::vector<std::string>>();
  const TargetMode mode = parse_target_mode(field(doc, "target_mode", top).get<std::string>());
  const auto kind = field(doc, "booster_kind", top).get<std::string>();
  if (kind == "tree") {
    gbdt::Ensemble e;
    e.base_score = real_of(field(doc, "base_score", top), "base_score");
    e.feature_names = names;
    e.target_mode = mode;
    const json& trees = field(doc, "trees", top);
    if (!trees.is_array()) fail(ErrorKind::kIntegrity, "trees must be an array");
    for (std::size_t t = 0; t < trees.size(); ++t) {
      e.trees.push_back(tree_from(trees[t], t, names.size()));
    }
    file.model = std::move(e);
  } else if (kind == "linear") {
    const json& lin = field(doc, "linear", top);
    linear::LinearModel m;
    m.bias = real_of(field(lin, "bias", "linear"), "bias");
    m.lambda = real_of(field(lin, "lambda", "linear"), "lambda");
    m.alpha = real_of(field(lin, "alpha", "linear"), "alpha");
    m.eta = real_of(field(lin, "eta", "linear"), "eta");
    const json& w = field(lin, "weights", "linear");
    if (!w.is_array() || w.size() != names.size()) {
      fail(ErrorKind::kIntegrity, "linear weights do not match feature_names width");
    }
    for (const auto& v : w) m.weights.push_back(real_of(v, "weight"));
    m.feature_names = names;
    m.target_mode = mode;
    file.model = std::move(m);
  } else {
    fail(ErrorKind::kIntegrity, "unknown booster_kind '" + kind + "'");
  }
  return file;
}

}  // namespace

BoosterKind booster_kind(const Model& model) {
  return std::holds_alternative<gbdt::Ensemble>(model) ? BoosterKind::kTree : BoosterKind::kLinear;
}

std::string_view to_string(BoosterKind kind) {
  return kind == BoosterKind::kTree ? "tree" : "linear";
}

TrainingMeta meta_from(const gbdt::TrainReport& report, const gbdt::Hyperparams& params) {
  return TrainingMeta{report.rounds(), report.best_iteration, params.seed};
}

std::string save(const ModelFile& file) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["booster_kind"] = std::string(to_string(booster_kind(file.model)));
  doc["hyperparams"] = hyperparams_json(file.hyperparams);
  doc["training"] = json{
      {"rounds_run", file.training.rounds_run},
      {"best_iteration",
       file.training.best_iteration ? json(*file.training.best_iteration) : json(nullptr)},
      {"seed", file.training.seed}};
  doc["feature_names"] = feature_names(file.model);
  doc["target_mode"] = std::string(to_string(target_mode(file.model)));
  if (const auto* e = std::get_if<gbdt::Ensemble>(&file.model)) {
    doc["base_score"] = e->base_score;
    json trees = json::array();
    for (const auto& t : e->trees) trees.push_back(tree_json(t));
    doc["trees"] = std::move(trees);
  } else {
    const auto& m = std::get<linear::LinearModel>(file.model);
    doc["linear"] = json{{"bias", m.bias},   {"weights", m.weights}, {"lambda", m.lambda},
                         {"alpha", m.alpha}, {"eta", m.eta}};
  }
  std::string out;
  write_value(out, doc, 0);
  out += '\n';
  return out;
}

std::string save(const Model& model, const gbdt::Hyperparams& params,
                 const gbdt::TrainReport& report) {
  return save(ModelFile{model, params, meta_from(report, params)});
}

ModelFile load(std::string_view text) {
  try {
    return load_impl(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kIntegrity, std::string("model document: ") + e.what());
  }
}

std::vector<double> predict(const Model& model, const FeatureMatrix& matrix) {
  if (const auto* e = std::get_if<gbdt::Ensemble>(&model)) return gbdt::predict(*e, matrix);
  return linear::predict_linear(std::get<linear::LinearModel>(model), matrix);
}

const std::vector<std::string>& feature_names(const Model& model) {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.feature_names; },
                    model);
}

TargetMode target_mode(const Model& model) {
  return std::visit([](const auto& m) { return m.target_mode; }, model);
}

}  // namespace aqcal::model_io
