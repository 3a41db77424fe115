#include "aqcal/tune.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "aqcal/error.hpp"
#include "aqcal/format.hpp"

namespace aqcal::tune {
namespace {

int as_count(const std::string& name, double value) {
  if (std::floor(value) != value || value < 0 || value > 1e9) {
    fail(ErrorKind::kInvalidArgument, "grid axis " + name + " needs whole numbers");
  }
  return static_cast<int>(value);
}

std::vector<gbdt::Hyperparams> enumerate(const ParamGrid& grid, const gbdt::Hyperparams& base) {
  std::vector<gbdt::Hyperparams> out{base};
  for (const auto& [name, values] : grid) {
    std::vector<gbdt::Hyperparams> next;
    next.reserve(out.size() * values.size());
    for (const auto& p : out) {
      for (double v : values) {
        gbdt::Hyperparams q = p;
        apply(q, name, v);
        next.push_back(q);
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

void apply(gbdt::Hyperparams& params, const std::string& name, double value) {
  if (name == "eta") params.eta = value;
  else if (name == "max_depth") params.max_depth = as_count(name, value);
  else if (name == "n_rounds") params.n_rounds = as_count(name, value);
  else if (name == "subsample") params.subsample = value;
  else if (name == "colsample_bytree") params.colsample_bytree = value;
  else if (name == "min_child_weight") params.min_child_weight = value;
  else fail(ErrorKind::kInvalidArgument, "unknown grid axis '" + name + "'");
}

void validate(const ParamGrid& grid, const gbdt::Hyperparams& base) {
  if (grid.empty()) fail(ErrorKind::kInvalidArgument, "empty parameter grid");
  for (const auto& [name, values] : grid) {
    if (values.empty()) fail(ErrorKind::kInvalidArgument, "grid axis '" + name + "' is empty");
    for (double v : values) {
      gbdt::Hyperparams p = base;
      apply(p, name, v);
      p.validate();
    }
  }
}

GridResult grid_search(const ParamGrid& grid, const FeatureMatrix& matrix, const DataSplit& split,
                       const gbdt::Hyperparams& base, const gbdt::ExecOptions& exec) {
  validate(grid, base);
  if (split.val_idx.empty()) fail(ErrorKind::kInvalidArgument, "grid search needs a validation set");
  const auto cells = enumerate(grid, base);
  GridResult result;
  result.trials.resize(cells.size());

  auto run = [&](std::size_t t) {
    const auto trained = gbdt::train(matrix, split, cells[t]);
    const std::size_t best = *trained.report.best_iteration;
    result.trials[t] = Trial{cells[t], trained.report.val_rmse[best], best};
  };
  const auto workers = std::min<std::size_t>(cells.size(),
                                             static_cast<std::size_t>(std::max(1, exec.num_threads)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < cells.size(); ++t) run(t);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t t = w; t < cells.size(); t += workers) run(t);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t t = 1; t < result.trials.size(); ++t) {
    if (result.trials[t].val_rmse < result.trials[result.best].val_rmse) result.best = t;
  }
  return result;
}

std::string trials_csv(const ParamGrid& grid, const GridResult& result) {
  std::string out = "trial";
  for (const auto& [name, values] : grid) out += "," + name;
  out += ",val_rmse,best_iteration\n";
  for (std::size_t t = 0; t < result.trials.size(); ++t) {
    const auto& p = result.trials[t].params;
    out += std::to_string(t);
    for (const auto& [name, values] : grid) {
      double v = 0.0;
      if (name == "eta") v = p.eta;
      else if (name == "max_depth") v = p.max_depth;
      else if (name == "n_rounds") v = p.n_rounds;
      else if (name == "subsample") v = p.subsample;
      else if (name == "colsample_bytree") v = p.colsample_bytree;
      else if (name == "min_child_weight") v = p.min_child_weight;
      out += "," + format_real(v);
    }
    out += "," + format_real(result.trials[t].val_rmse) + "," +
           std::to_string(result.trials[t].best_iteration) + "\n";
  }
  return out;
}

}  // namespace aqcal::tune
