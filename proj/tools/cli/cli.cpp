#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <utility>

#include "aqcal/error.hpp"
#include "aqcal/eval.hpp"
#include "aqcal/format.hpp"
#include "aqcal/gbdt.hpp"
#include "aqcal/ingest.hpp"
#include "aqcal/linear_booster.hpp"
#include "aqcal/model_io.hpp"
#include "aqcal/preprocess.hpp"
#include "aqcal/synth.hpp"
#include "aqcal/tune.hpp"
#include "run_config.hpp"

namespace aqcal::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

// Collects the files one invocation writes and records them in the manifest.
class Artifacts {
 public:
  Artifacts(std::string subcommand, const RunConfig& cfg)
      : subcommand_(std::move(subcommand)), cfg_(cfg), dir_(cfg.get_or("out", ".")) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create output directory '" + dir_.string() + "'");
  }

  void write(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    hashes_[name] = sha256_hex(content);
  }

  void finish() {
    json config = cfg_.values();
    if (!cfg_.inputs().empty()) config["input"] = cfg_.inputs();
    json manifest = {{"artifacts", hashes_},
                     {"config", config},
                     {"seed", static_cast<std::uint64_t>(cfg_.integer_or("seed", 0))},
                     {"subcommand", subcommand_},
                     {"tool_version", kToolVersion}};
    write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  const RunConfig& cfg_;
  fs::path dir_;
  std::map<std::string, std::string> hashes_;
};

TargetMode target_of(const RunConfig& cfg) {
  return parse_target_mode(cfg.get_or("target", "offset"));
}

std::uint64_t seed_of(const RunConfig& cfg) {
  return static_cast<std::uint64_t>(cfg.integer_or("seed", 0));
}

FeatureMatrix load_matrix(const RunConfig& cfg) {
  const auto path = cfg.get("matrix");
  if (!path) fail(ErrorKind::kConfig, "missing --matrix");
  FeatureMatrix m = preprocess::read_matrix_csv(read_file(*path), target_of(cfg));
  if (const auto drop = cfg.get("drop_features")) {
    std::vector<std::string> keep;
    std::stringstream list(*drop);
    std::vector<std::string> dropped;
    for (std::string item; std::getline(list, item, ',');) dropped.push_back(item);
    for (const auto& name : m.feature_names) {
      if (std::find(dropped.begin(), dropped.end(), name) == dropped.end()) keep.push_back(name);
    }
    m = m.select_features(keep);
  }
  return m;
}

DataSplit load_split(const RunConfig& cfg, std::size_t n_rows) {
  if (const auto path = cfg.get("split_file")) {
    return preprocess::read_split_csv(read_file(*path), n_rows);
  }
  return preprocess::make_split(n_rows, preprocess::parse_split_mode(cfg.get_or("split", "chrono")),
                                seed_of(cfg));
}

const std::vector<std::size_t>& partition(const DataSplit& split, const std::string& part,
                                          std::vector<std::size_t>& all, std::size_t n_rows) {
  if (part == "train") return split.train_idx;
  if (part == "val") return split.val_idx;
  if (part == "test") return split.test_idx;
  if (part == "all") {
    all.resize(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) all[i] = i;
    return all;
  }
  fail(ErrorKind::kConfig, "unknown partition '" + part + "'");
}

// The test partition, or the next non-empty one for tiny matrices.
const std::vector<std::size_t>& scoring_rows(const DataSplit& split) {
  if (!split.test_idx.empty()) return split.test_idx;
  if (!split.val_idx.empty()) return split.val_idx;
  return split.train_idx;
}

eval::EvalReport evaluate_model(const model_io::Model& model, const FeatureMatrix& m,
                                const std::vector<std::size_t>& rows) {
  return std::visit([&](const auto& concrete) { return eval::evaluate(concrete, m, rows); }, model);
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  Artifacts artifacts("synth", cfg);
  const synth::SynthConfig sc = cfg.synth_config();
  ingest::SensorSeries series = synth::generate(sc);
  if (const auto frac = cfg.get("synth.missing_fraction")) {
    series = synth::inject_missing(series, cfg.real_or("synth.missing_fraction", 0.0), sc.seed);
  }
  const auto records = synth::flatten(series);
  artifacts.write("network.csv", ingest::write_csv(ingest::to_table(records, cfg.schema())));
  artifacts.finish();
  out << "synth: " << series.size() << " sensors, " << records.size() << " records\n";
  return 0;
}

int cmd_preprocess(const RunConfig& cfg, std::ostream& out) {
  const bool from_files = !cfg.inputs().empty();
  const bool from_synth = cfg.has_section("synth.") || cfg.get_or("use_synth", "") == "true";
  if (from_files == from_synth) {
    fail(ErrorKind::kConfig, "give either --input files or a synth configuration, not both or neither");
  }
  std::vector<ingest::SensorRecord> records;
  if (from_files) {
    const ingest::Schema schema = cfg.schema();
    for (const auto& path : cfg.inputs()) {
      const ingest::RawTable table = ingest::parse_csv(read_file(path));
      ingest::Schema file_schema = schema;
      if (!schema.sensor_id.empty() && !table.column_index(schema.sensor_id)) {
        // One file per deployment: the file name identifies the sensor.
        file_schema.sensor_id.clear();
        file_schema.default_sensor_id = fs::path(path).stem().string();
      }
      auto part = ingest::to_records(table, file_schema);
      records.insert(records.end(), part.begin(), part.end());
    }
  } else {
    records = synth::flatten(synth::generate(cfg.synth_config()));
  }

  const auto fill = preprocess::parse_fill_strategy(cfg.get_or("fill", "ffbf"));
  const FeatureMatrix m = preprocess::prepare(records, fill, target_of(cfg));
  const DataSplit split = preprocess::make_split(
      m.num_rows(), preprocess::parse_split_mode(cfg.get_or("split", "chrono")), seed_of(cfg));

  Artifacts artifacts("preprocess", cfg);
  artifacts.write("features.csv", preprocess::write_matrix_csv(m));
  artifacts.write("split.csv", preprocess::write_split_csv(split));
  artifacts.finish();
  out << "preprocess: " << m.num_rows() << " rows (" << m.excluded_rows << " excluded), split "
      << split.train_idx.size() << "/" << split.val_idx.size() << "/" << split.test_idx.size()
      << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const FeatureMatrix m = load_matrix(cfg);
  const DataSplit split = load_split(cfg, m.num_rows());
  const gbdt::Hyperparams params = cfg.hyperparams(gbdt::Hyperparams::tuned());
  const gbdt::ExecOptions exec{static_cast<int>(cfg.integer_or("threads", 1))};
  const std::string booster = cfg.get_or("booster", "tree");

  model_io::Model model;
  gbdt::TrainReport report;
  if (booster == "tree") {
    auto result = gbdt::train(m, split, params, exec);
    model = std::move(result.model);
    report = std::move(result.report);
  } else if (booster == "linear") {
    auto result = linear::train_linear(m, split, params);
    model = std::move(result.model);
    report = std::move(result.report);
  } else {
    fail(ErrorKind::kConfig, "unknown booster '" + booster + "'");
  }

  const eval::EvalReport ev = evaluate_model(model, m, scoring_rows(split));
  Artifacts artifacts("train", cfg);
  artifacts.write("model.calib.json", model_io::save(model, params, report));
  artifacts.write("curves.csv", eval::export_curves(report));
  artifacts.write("eval.txt", eval::format_text(ev));
  artifacts.write("eval.json", eval::format_record(ev) + "\n");
  artifacts.finish();
  out << eval::format_record(ev) << "\n";
  return 0;
}

int cmd_finetune(const RunConfig& cfg, std::ostream& out) {
  const auto model_path = cfg.get("model");
  if (!model_path) fail(ErrorKind::kConfig, "missing --model");
  const model_io::ModelFile file = model_io::load(read_file(*model_path));
  const auto* base = std::get_if<gbdt::Ensemble>(&file.model);
  if (!base) fail(ErrorKind::kInvalidArgument, "fine-tuning needs a tree model");

  const FeatureMatrix m = load_matrix(cfg);
  const DataSplit split = load_split(cfg, m.num_rows());
  gbdt::Hyperparams params = cfg.hyperparams(file.hyperparams);
  const int extra = static_cast<int>(cfg.integer_or("rounds", 100));
  const gbdt::ExecOptions exec{static_cast<int>(cfg.integer_or("threads", 1))};

  const auto& rows = scoring_rows(split);
  const eval::EvalReport before = eval::evaluate(*base, m, rows);
  auto result = gbdt::continue_training(*base, m, split, extra, params, exec);
  const eval::EvalReport after = eval::evaluate(result.model, m, rows);

  params.n_rounds = extra;
  model_io::TrainingMeta meta = model_io::meta_from(result.report, params);
  meta.rounds_run += file.training.rounds_run;

  Artifacts artifacts("finetune", cfg);
  artifacts.write("model.calib.json", model_io::save({result.model, params, meta}));
  artifacts.write("curves.csv", eval::export_curves(result.report));
  artifacts.write("eval_before.json", eval::format_record(before) + "\n");
  artifacts.write("eval_after.json", eval::format_record(after) + "\n");
  artifacts.write("eval.txt", "before fine-tuning\n" + eval::format_text(before) +
                                  "after fine-tuning\n" + eval::format_text(after));
  artifacts.finish();
  out << "finetune: rmse " << format_real(before.overall_rmse) << " -> "
      << format_real(after.overall_rmse) << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const auto model_path = cfg.get("model");
  if (!model_path) fail(ErrorKind::kConfig, "missing --model");
  const model_io::ModelFile file = model_io::load(read_file(*model_path));
  const FeatureMatrix m = load_matrix(cfg);
  const DataSplit split = load_split(cfg, m.num_rows());
  std::vector<std::size_t> all;
  const auto& rows = partition(split, cfg.get_or("part", "test"), all, m.num_rows());
  const eval::EvalReport ev = evaluate_model(file.model, m, rows);

  Artifacts artifacts("evaluate", cfg);
  artifacts.write("eval.txt", eval::format_text(ev));
  artifacts.write("eval.json", eval::format_record(ev) + "\n");
  artifacts.finish();
  out << eval::format_record(ev) << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  const auto model_path = cfg.get("model");
  const auto features_path = cfg.get("features");
  if (!model_path || !features_path) fail(ErrorKind::kConfig, "predict needs --model and --features");
  const model_io::ModelFile file = model_io::load(read_file(*model_path));
  const auto& names = model_io::feature_names(file.model);

  const ingest::RawTable table = ingest::parse_csv(read_file(*features_path));
  std::vector<std::string> cols = table.column_names;
  const std::vector<std::string> tail = {"label", "sensor_id", "timestamp"};
  if (cols.size() >= 3 && std::equal(tail.begin(), tail.end(), cols.end() - 3)) cols.resize(cols.size() - 3);
  if (cols != names) {
    fail(ErrorKind::kSchema, "feature CSV has " + std::to_string(cols.size()) +
                                 " feature columns; the model expects " +
                                 std::to_string(names.size()) + " named exactly as at training");
  }

  FeatureMatrix m;
  m.feature_names = names;
  m.target_mode = model_io::target_mode(file.model);
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto* v = std::get_if<double>(&table.rows[r][j]);
      if (!v) {
        fail(ErrorKind::kRow, "row " + std::to_string(r + 1) + ", column '" + names[j] +
                                  "': expected a number");
      }
      m.values.push_back(*v);
    }
    m.labels.push_back(0.0);
    m.sensor_ids.emplace_back();
    m.timestamps.push_back(0);
  }
  const std::vector<double> pred = model_io::predict(file.model, m);

  const auto raw_col = std::find(names.begin(), names.end(), "raw_pm25");
  const bool calibrated = m.target_mode == TargetMode::kOffset && raw_col != names.end();
  const auto raw_j = static_cast<std::size_t>(raw_col - names.begin());
  std::string csv = calibrated ? "row,prediction,calibrated_pm25\n" : "row,prediction\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    csv += std::to_string(i) + "," + format_real(pred[i]);
    if (calibrated) csv += "," + format_real(m.at(i, raw_j) + pred[i]);
    csv += "\n";
  }
  Artifacts artifacts("predict", cfg);
  artifacts.write("predictions.csv", csv);
  artifacts.finish();
  out << "predict: " << pred.size() << " rows\n";
  return 0;
}

int cmd_gridsearch(const RunConfig& cfg, std::ostream& out) {
  const FeatureMatrix m = load_matrix(cfg);
  const DataSplit split = load_split(cfg, m.num_rows());
  const gbdt::Hyperparams base = cfg.hyperparams(gbdt::Hyperparams::tuned());
  const tune::ParamGrid grid = cfg.grid();
  const gbdt::ExecOptions exec{static_cast<int>(cfg.integer_or("threads", 1))};
  const tune::GridResult result = tune::grid_search(grid, m, split, base, exec);

  const auto& best = result.trials[result.best];
  json best_json;
  for (const auto& [name, values] : grid) {
    if (name == "max_depth") best_json[name] = best.params.max_depth;
    else if (name == "n_rounds") best_json[name] = best.params.n_rounds;
    else if (name == "eta") best_json[name] = best.params.eta;
    else if (name == "subsample") best_json[name] = best.params.subsample;
    else if (name == "colsample_bytree") best_json[name] = best.params.colsample_bytree;
    else if (name == "min_child_weight") best_json[name] = best.params.min_child_weight;
  }
  best_json["trial"] = result.best;
  best_json["val_rmse"] = best.val_rmse;

  Artifacts artifacts("gridsearch", cfg);
  artifacts.write("trials.csv", tune::trials_csv(grid, result));
  artifacts.write("best_params.json", best_json.dump(2) + "\n");
  artifacts.finish();
  out << "gridsearch: " << result.trials.size() << " trials, best #" << result.best
      << " val_rmse " << format_real(best.val_rmse) << "\n";
  return 0;
}

void print_error(std::ostream& err, std::string_view kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::kIo, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"aqcal: gradient-boosted calibration of low-cost PM2.5 sensor networks"};
  app.require_subcommand(1);
  RunConfig flags;
  std::string config_path;

  // Flag -> config key. Every flag lands in `flags`, which is merged over
  // the config file so that flags win.
  auto bind = [&flags](CLI::App* sub, const std::string& flag, const std::string& key,
                       const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&flags, key](const std::string& v) { flags.set(key, v); }, help);
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    bind(sub, "--seed", "seed", "Seed for every random draw");
    bind(sub, "--out", "out", "Output directory");
    bind(sub, "--threads", "threads", "Worker threads");
  };
  auto data_flags = [&](CLI::App* sub) {
    bind(sub, "--matrix", "matrix", "Feature-matrix CSV from preprocess");
    bind(sub, "--split-file", "split_file", "Split CSV from preprocess");
    bind(sub, "--split", "split", "chrono|random, when no split file is given");
    bind(sub, "--target", "target", "offset|absolute label meaning");
    bind(sub, "--drop-features", "drop_features", "Comma-separated features to leave out");
  };
  auto booster_flags = [&](CLI::App* sub) {
    bind(sub, "--booster", "booster", "tree|linear");
    bind(sub, "--rounds", "rounds", "Boosting rounds");
    bind(sub, "--eta", "eta", "Learning rate");
    bind(sub, "--max-depth", "max_depth", "Maximum tree depth");
    bind(sub, "--subsample", "subsample", "Row fraction per round");
    bind(sub, "--colsample-bytree", "colsample_bytree", "Feature fraction per tree");
    bind(sub, "--min-child-weight", "min_child_weight", "Minimum hessian sum per child");
    bind(sub, "--lambda", "lambda", "L2 penalty");
    bind(sub, "--gamma", "gamma", "Per-split penalty");
    bind(sub, "--alpha", "alpha", "L1 penalty (linear booster)");
    bind(sub, "--early-stopping", "early_stopping_rounds", "Stop after this many rounds without improvement");
  };

  auto* synth = app.add_subcommand("synth", "Emit a synthetic sensor network as CSV");
  common(synth);
  bind(synth, "--sensors", "synth.n_sensors", "Number of sensors");
  bind(synth, "--timesteps", "synth.n_timesteps", "Hourly readings per sensor");
  bind(synth, "--center-lon", "synth.center_lon", "Network centre longitude");
  bind(synth, "--center-lat", "synth.center_lat", "Network centre latitude");
  bind(synth, "--spread", "synth.spread", "Half-width of the sensor box, degrees");
  bind(synth, "--spatial-amp", "synth.spatial_amp", "Amplitude of the spatial bias");
  bind(synth, "--noise", "synth.noise_sigma", "Reference noise sigma");
  bind(synth, "--shift-wavelengths", "synth.shift_wavelengths", "Move the network by this many bias wavelengths");
  bind(synth, "--missing-fraction", "synth.missing_fraction", "Blank this fraction of readings");

  auto* prep = app.add_subcommand("preprocess", "Raw CSV -> feature matrix + split");
  common(prep);
  prep->add_option_function<std::vector<std::string>>(
      "--input", [&flags](const std::vector<std::string>& v) {
        for (const auto& p : v) flags.add_input(p);
      }, "Deployment CSV file (repeatable)");
  bind(prep, "--fill", "fill", "drop|mean|median|ffbf");
  bind(prep, "--target", "target", "offset|absolute");
  bind(prep, "--split", "split", "chrono|random");
  prep->add_flag_callback("--synth", [&flags] { flags.set("use_synth", "true"); },
                          "Generate the network in memory from synth.* settings");

  auto* train = app.add_subcommand("train", "Train a calibration model");
  common(train);
  data_flags(train);
  booster_flags(train);

  auto* finetune = app.add_subcommand("finetune", "Continue boosting a model on new data");
  common(finetune);
  data_flags(finetune);
  booster_flags(finetune);
  bind(finetune, "--model", "model", "Model file to start from");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on one partition");
  common(evaluate);
  data_flags(evaluate);
  bind(evaluate, "--model", "model", "Model file");
  bind(evaluate, "--part", "part", "train|val|test|all");

  auto* predict = app.add_subcommand("predict", "Predict calibration values for a feature CSV");
  common(predict);
  bind(predict, "--model", "model", "Model file");
  bind(predict, "--features", "features", "CSV whose columns are the model's features");

  auto* grid = app.add_subcommand("gridsearch", "Grid-search hyperparameters on validation RMSE");
  common(grid);
  data_flags(grid);
  booster_flags(grid);
  grid->add_option_function<std::string>(
      "--grid", [&flags](const std::string& spec) {
        std::stringstream axes(spec);
        for (std::string axis; std::getline(axes, axis, ';');) {
          const auto eq = axis.find('=');
          if (eq == std::string::npos) fail(ErrorKind::kConfig, "grid axis needs name=v1,v2");
          flags.set("grid." + axis.substr(0, eq), axis.substr(eq + 1));
        }
      }, "Axes as name=v1,v2;name=v1,...");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (const Error& e) {
    print_error(err, to_string(e.kind()), e.what());
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::parse(read_file(config_path));
    cfg.merge(flags);
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth") return cmd_synth(cfg, out);
    if (name == "preprocess") return cmd_preprocess(cfg, out);
    if (name == "train") return cmd_train(cfg, out);
    if (name == "finetune") return cmd_finetune(cfg, out);
    if (name == "evaluate") return cmd_evaluate(cfg, out);
    if (name == "predict") return cmd_predict(cfg, out);
    if (name == "gridsearch") return cmd_gridsearch(cfg, out);
    print_error(err, "usage", "unknown subcommand");
    return 2;
  } catch (const Error& e) {
    print_error(err, to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return 1;
  }
}

}  // namespace aqcal::cli
