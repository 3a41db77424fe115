#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "aqcal/gbdt.hpp"
#include "aqcal/preprocess.hpp"

namespace aqcal::tune {

// Axis name -> candidate values. Names: eta, max_depth, n_rounds,
// subsample, colsample_bytree, min_child_weight. std::map keeps axes in
// lexicographic order, which fixes the enumeration order.
using ParamGrid = std::map<std::string, std::vector<double>>;

// Sets one named hyperparameter; integral axes reject fractional values.
void apply(gbdt::Hyperparams& params, const std::string& name, double value);

// Throws kInvalidArgument for an empty grid, an empty axis, an unknown name
// or an out-of-range value.
void validate(const ParamGrid& grid, const gbdt::Hyperparams& base);

struct Trial {
  gbdt::Hyperparams params;
  double val_rmse = 0.0;  // validation RMSE at best_iteration
  std::size_t best_iteration = 0;
};

struct GridResult {
  std::vector<Trial> trials;  // Cartesian product, first axis slowest
  std::size_t best = 0;       // lowest val_rmse, earliest on ties
};

// Every trial shares base.seed. Trials run on up to exec.num_threads
// workers; results are gathered by trial index.
GridResult grid_search(const ParamGrid& grid, const FeatureMatrix& matrix, const DataSplit& split,
                       const gbdt::Hyperparams& base, const gbdt::ExecOptions& exec = {});

// "trial,<axis...>,val_rmse,best_iteration" CSV.
std::string trials_csv(const ParamGrid& grid, const GridResult& result);

}  // namespace aqcal::tune
