#include "aqcal/gbdt.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "aqcal/error.hpp"
#include "aqcal/eval.hpp"
#include "support/oracles.hpp"

namespace aqcal::gbdt {
namespace {

using testing::all_train;
using testing::random_matrix;

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

FeatureMatrix one_feature(const std::vector<double>& x, const std::vector<double>& y) {
  FeatureMatrix m;
  m.feature_names = {"x"};
  m.values = x;
  m.labels = y;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.sensor_ids.push_back("s");
    m.timestamps.push_back(static_cast<std::int64_t>(i));
  }
  return m;
}

std::vector<GradHess> grads_at_zero(const std::vector<double>& y) {
  std::vector<GradHess> g;
  for (double t : y) g.push_back(grad_hess(0.0, t));
  return g;
}

TEST(GradHess, Examples) {
  EXPECT_EQ(grad_hess(7.0, 7.0).g, 0.0);
  EXPECT_EQ(grad_hess(7.0, 7.0).h, 1.0);
  EXPECT_EQ(grad_hess(3.0, 1.0).g, 2.0);
  EXPECT_EQ(grad_hess(3.0, 1.0).h, 1.0);
  EXPECT_THROW(grad_hess(NAN, 1.0), Error);
}

TEST(GradHess, MatchesFiniteDifferences) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-50, 50);
  const double eps = 1e-4;
  auto loss = [](double p, double t) { return 0.5 * (p - t) * (p - t); };
  for (int i = 0; i < 200; ++i) {
    const double p = u(gen), t = u(gen);
    const double fd_g = (loss(p + eps, t) - loss(p - eps, t)) / (2 * eps);
    const double fd_h = (loss(p + eps, t) - 2 * loss(p, t) + loss(p - eps, t)) / (eps * eps);
    EXPECT_NEAR(grad_hess(p, t).g, fd_g, 1e-6);
    EXPECT_NEAR(grad_hess(p, t).h, fd_h, 1e-3);
  }
}

TEST(LeafWeight, ExamplesAndGuards) {
  EXPECT_DOUBLE_EQ(leaf_weight(2.0, 4.0, 1.0), -0.4);
  EXPECT_EQ(leaf_weight(0.0, 0.0, 0.0), 0.0);
  EXPECT_EQ(leaf_weight(3.0, 0.0, 0.0), 0.0);
}

TEST(SplitGain, ExampleAndGammaShift) {
  EXPECT_DOUBLE_EQ(split_gain(-2, 2, 2, 2, 0, 0), 2.0);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-10, 10), h(0, 10);
  for (int i = 0; i < 100; ++i) {
    const double gl = u(gen), hl = h(gen), gr = u(gen), hr = h(gen), gamma = h(gen);
    EXPECT_NEAR(split_gain(gl, hl, gr, hr, 1.0, 0.0) - gamma,
                split_gain(gl, hl, gr, hr, 1.0, gamma), 1e-12);
    EXPECT_NEAR(split_gain(gl, hl, gr, hr, 1.0, gamma),
                testing::reference_gain(gl, hl, gr, hr, 1.0, gamma), 1e-12);
  }
}

TEST(FindBestSplit, TwoLevels) {
  const Columns cols{{1, 1, 2, 2}};
  const auto g = grads_at_zero({-1, -1, 1, 1});
  Hyperparams p;
  p.lambda = 0;
  p.min_child_weight = 0;
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  const auto s = find_best_split(rows, cols, g, p, feats);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 1.5);
  EXPECT_DOUBLE_EQ(s->gain, 2.0);
  EXPECT_EQ(s->left.sum_hess, 2.0);
}

TEST(FindBestSplit, ConstantColumnHasNoSplit) {
  const Columns cols{{3, 3, 3, 3}};
  const auto g = grads_at_zero({-1, 4, 1, 1});
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  EXPECT_FALSE(find_best_split(rows, cols, g, Hyperparams{}, feats));
}

TEST(FindBestSplit, TieGoesToLowerFeature) {
  const Columns cols{{1, 1, 2, 2}, {5, 5, 9, 9}};
  const auto g = grads_at_zero({-1, -1, 1, 1});
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0, 1};
  const auto s = find_best_split(rows, cols, g, Hyperparams{}, feats);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature_index, 0u);
}

TEST(FindBestSplit, AgreesWithBruteForce) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_matrix(gen, 20 + trial * 5, 4);
    const auto cols = to_columns(m);
    std::vector<GradHess> g;
    for (double y : m.labels) g.push_back(grad_hess(0.3, y));
    Hyperparams p;
    p.lambda = 0.5 * (trial % 3);
    p.min_child_weight = trial % 4;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < m.num_rows(); ++i) {
      if (i % 5 != 2) rows.push_back(i);
    }
    const std::vector<std::size_t> feats{0, 1, 2, 3};
    const auto got = find_best_split(rows, cols, g, p, feats);
    const auto want = testing::brute_force_split(rows, cols, g, p.lambda, p.gamma,
                                                 p.min_child_weight);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (!got) continue;
    EXPECT_EQ(got->feature_index, want->feature);
    EXPECT_EQ(got->threshold, want->threshold);
    EXPECT_NEAR(got->gain, want->gain, 1e-9);
  }
}

TEST(GrowTree, DepthZeroIsOneLeaf) {
  const Columns cols{{1, 2, 3}};
  const auto g = grads_at_zero({1, 2, 3});
  Hyperparams p;
  p.max_depth = 0;
  p.eta = 1;
  p.lambda = 0;
  const auto rows = iota(3);
  const std::vector<std::size_t> feats{0};
  const auto t = grow_tree(rows, cols, g, p, feats);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].weight, 2.0);
}

TEST(GrowTree, SeparableStump) {
  const Columns cols{{0, 0, 1, 1}};
  const auto g = grads_at_zero({-3, -3, 3, 3});
  Hyperparams p;
  p.max_depth = 1;
  p.eta = 1;
  p.lambda = 0;
  p.min_child_weight = 0;
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  const auto t = grow_tree(rows, cols, g, p, feats);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].threshold, 0.5);
  EXPECT_DOUBLE_EQ(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].weight, -3.0);
  EXPECT_DOUBLE_EQ(t.nodes[static_cast<std::size_t>(t.nodes[0].right)].weight, 3.0);
}

TEST(GrowTree, ZeroResidualsGiveZeroLeaf) {
  const Columns cols{{0, 1, 2, 3}};
  const auto g = grads_at_zero({0, 0, 0, 0});
  const auto rows = iota(4);
  const std::vector<std::size_t> feats{0};
  const auto t = grow_tree(rows, cols, g, Hyperparams{}, feats);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.nodes[0].weight, 0.0);
}

TEST(GrowTree, StructuralInvariantsProperty) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_matrix(gen, 150, 5);
    const auto cols = to_columns(m);
    std::vector<GradHess> g;
    for (double y : m.labels) g.push_back(grad_hess(0.0, y));
    Hyperparams p;
    p.max_depth = trial % 5;
    p.min_child_weight = 3;
    const auto rows = iota(m.num_rows());
    const std::vector<std::size_t> feats{0, 1, 2, 3, 4};
    const auto t = grow_tree(rows, cols, g, p, feats);
    EXPECT_NO_THROW(t.validate(5));
    EXPECT_LE(t.depth(), static_cast<std::size_t>(p.max_depth));
    EXPECT_EQ(t.num_leaves(), (t.nodes.size() + 1) / 2);
    // Every leaf receives at least min_child_weight rows.
    std::vector<int> counts(t.nodes.size(), 0);
    for (std::size_t i = 0; i < m.num_rows(); ++i) {
      std::size_t id = 0;
      while (!t.nodes[id].is_leaf()) {
        const auto& n = t.nodes[id];
        id = static_cast<std::size_t>(m.at(i, static_cast<std::size_t>(n.feature)) < n.threshold
                                          ? n.left
                                          : n.right);
      }
      ++counts[id];
    }
    for (std::size_t id = 0; id < t.nodes.size(); ++id) {
      if (t.nodes[id].is_leaf() && t.nodes.size() > 1) EXPECT_GE(counts[id], 3);
    }
  }
}

TEST(Predict, BoundaryRoutesRight) {
  RegressionTree t;
  t.nodes = {{0, 1.5, 1, 2, 0.0}, {-1, 0, -1, -1, -1.0}, {-1, 0, -1, -1, 1.0}};
  EXPECT_EQ(t.predict(std::vector<double>{1.0}), -1.0);
  EXPECT_EQ(t.predict(std::vector<double>{2.0}), 1.0);
  EXPECT_EQ(t.predict(std::vector<double>{1.5}), 1.0);
}

TEST(Predict, WidthMismatchIsSchemaError) {
  Ensemble e;
  e.feature_names = {"a", "b"};
  try {
    predict_row(e, std::vector<double>{1.0});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kSchema);
  }
}

TEST(Train, ConstantLabels) {
  const auto m = one_feature({1, 2, 3, 4, 5}, {4, 4, 4, 4, 4});
  const auto r = train(m, all_train(5), Hyperparams{});
  for (double p : predict(r.model, m)) EXPECT_EQ(p, 4.0);
  for (const auto& t : r.model.trees) EXPECT_EQ(t.max_abs_leaf(), 0.0);
}

TEST(Train, SingleRowFitsExactly) {
  const auto m = one_feature({1}, {5});
  Hyperparams p;
  p.lambda = 0;
  p.eta = 1;
  p.n_rounds = 3;
  const auto r = train(m, all_train(1), p);
  EXPECT_EQ(predict(r.model, m)[0], 5.0);
}

TEST(Train, LearnsStep) {
  std::vector<double> x, y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(i);
    y.push_back(i < 50 ? -2.0 : 2.0);
  }
  const auto m = one_feature(x, y);
  Hyperparams p;
  p.n_rounds = 50;
  const auto r = train(m, all_train(100), p);
  EXPECT_LT(r.report.train_rmse.back(), 1e-3);
}

TEST(Train, MonotoneTrainRmse) {
  std::mt19937_64 gen(21);
  const auto m = random_matrix(gen, 200, 4);
  Hyperparams p;
  p.lambda = 0;
  p.gamma = 0;
  p.min_child_weight = 0;
  p.n_rounds = 40;
  const auto r = train(m, all_train(m.num_rows()), p);
  for (std::size_t i = 1; i < r.report.rounds(); ++i) {
    EXPECT_LE(r.report.train_rmse[i], r.report.train_rmse[i - 1] + 1e-9);
  }
}

TEST(Train, InvalidParams) {
  const auto m = one_feature({1, 2}, {1, 2});
  for (auto mutate : std::vector<void (*)(Hyperparams&)>{
           [](Hyperparams& p) { p.eta = 0; }, [](Hyperparams& p) { p.subsample = 1.5; },
           [](Hyperparams& p) { p.max_depth = -1; }, [](Hyperparams& p) { p.lambda = -1; },
           [](Hyperparams& p) { p.n_rounds = -2; }}) {
    Hyperparams p;
    mutate(p);
    EXPECT_THROW(train(m, all_train(2), p), Error);
  }
}

TEST(Train, PredictionsWithinLabelRange) {
  std::mt19937_64 gen(31);
  const auto m = random_matrix(gen, 300, 5);
  Hyperparams p;
  p.n_rounds = 30;
  p.lambda = 1;
  const auto r = train(m, all_train(m.num_rows()), p);
  const auto [lo, hi] = std::minmax_element(m.labels.begin(), m.labels.end());
  double bound = std::max(std::abs(*lo), std::abs(*hi)) * 2 + std::abs(r.model.base_score);
  for (double v : predict(r.model, m)) EXPECT_LE(std::abs(v), bound);
  for (const auto& t : r.model.trees) EXPECT_TRUE(std::isfinite(t.max_abs_leaf()));
}

TEST(Train, ZeroRoundsContinuationIsIdentity) {
  std::mt19937_64 gen(1);
  const auto m = random_matrix(gen, 50, 3);
  Hyperparams p;
  p.n_rounds = 5;
  const auto r = train(m, all_train(50), p);
  const auto c = continue_training(r.model, m, all_train(50), 0, p);
  EXPECT_EQ(c.model, r.model);
}

TEST(Train, WarmStartEquivalence) {
  std::mt19937_64 gen(2);
  const auto m = random_matrix(gen, 120, 4);
  const auto split = preprocess::make_split(m.num_rows(), preprocess::SplitMode::kChronological);
  Hyperparams p;
  p.subsample = 0.8;
  p.colsample_bytree = 0.75;
  p.seed = 42;
  p.n_rounds = 30;
  const auto full = train(m, split, p);
  p.n_rounds = 20;
  const auto first = train(m, split, p);
  const auto cont = continue_training(first.model, m, split, 10, p);
  ASSERT_EQ(cont.model.trees.size(), 30u);
  const auto a = predict(full.model, m);
  const auto b = predict(cont.model, m);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Train, ContinueRejectsFeatureMismatch) {
  std::mt19937_64 gen(3);
  const auto m = random_matrix(gen, 40, 3);
  const auto r = train(m, all_train(40), Hyperparams{});
  auto other = m;
  other.feature_names[1] = "renamed";
  EXPECT_THROW(continue_training(r.model, other, all_train(40), 1, Hyperparams{}), Error);
}

TEST(Train, RowOrderInvariantWithoutSubsampling) {
  std::mt19937_64 gen(5);
  const auto m = random_matrix(gen, 80, 3, false);
  std::vector<std::size_t> perm = iota(80);
  std::shuffle(perm.begin(), perm.end(), gen);
  FeatureMatrix shuffled = m;
  for (std::size_t i = 0; i < 80; ++i) {
    for (std::size_t j = 0; j < 3; ++j) shuffled.values[i * 3 + j] = m.at(perm[i], j);
    shuffled.labels[i] = m.labels[perm[i]];
  }
  Hyperparams p;
  p.n_rounds = 10;
  const auto a = train(m, all_train(80), p);
  const auto b = train(shuffled, all_train(80), p);
  // Structure can differ where two features induce the same partition of a
  // node, so compare fitted values row by row.
  const auto pa = predict(a.model, m);
  const auto pb = predict(b.model, shuffled);
  for (std::size_t i = 0; i < 80; ++i) EXPECT_NEAR(pb[i], pa[perm[i]], 1e-9);
}

TEST(Train, ThreadCountDoesNotChangeModel) {
  std::mt19937_64 gen(6);
  const auto m = random_matrix(gen, 9000, 6);
  Hyperparams p;
  p.n_rounds = 3;
  p.subsample = 0.9;
  p.seed = 3;
  const auto one = train(m, all_train(m.num_rows()), p, ExecOptions{1});
  const auto four = train(m, all_train(m.num_rows()), p, ExecOptions{4});
  EXPECT_EQ(one.model, four.model);
}

TEST(Train, EarlyStoppingKeepsBestIteration) {
  std::mt19937_64 gen(7);
  const auto m = random_matrix(gen, 300, 4);
  const auto split = preprocess::make_split(m.num_rows(), preprocess::SplitMode::kRandom, 1);
  Hyperparams p;
  p.n_rounds = 400;
  p.eta = 0.5;
  p.max_depth = 8;
  p.lambda = 0;
  p.min_child_weight = 0;
  p.early_stopping_rounds = 10;
  const auto r = train(m, split, p);
  ASSERT_TRUE(r.report.best_iteration);
  const auto& v = r.report.val_rmse;
  const auto argmin = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  EXPECT_EQ(*r.report.best_iteration, argmin);
  EXPECT_EQ(r.model.trees.size(), argmin + 1);
  EXPECT_LT(r.report.rounds(), 400u);
  std::vector<double> pred = predict(r.model, m);
  std::vector<double> vp, vt;
  for (auto i : split.val_idx) {
    vp.push_back(pred[i]);
    vt.push_back(m.labels[i]);
  }
  EXPECT_NEAR(eval::rmse(vp, vt), v[argmin], 1e-12);
}

TEST(Train, SeedChangesSubsampledModel) {
  std::mt19937_64 gen(9);
  const auto m = random_matrix(gen, 100, 4);
  Hyperparams p;
  p.n_rounds = 5;
  p.subsample = 0.5;
  const auto a = train(m, all_train(100), p);
  const auto b = train(m, all_train(100), p);
  p.seed = 77;
  const auto c = train(m, all_train(100), p);
  EXPECT_EQ(a.model, b.model);
  EXPECT_NE(a.model, c.model);
}

TEST(TreeValidate, RejectsBrokenStructure) {
  RegressionTree t;
  t.nodes = {{0, 1.0, 1, 5, 0.0}, {-1, 0, -1, -1, 1.0}};
  EXPECT_THROW(t.validate(1), Error);
  t.nodes = {{0, 1.0, 1, 1, 0.0}, {-1, 0, -1, -1, 1.0}};
  EXPECT_THROW(t.validate(1), Error);
  t.nodes = {{3, 1.0, 1, 2, 0.0}, {-1, 0, -1, -1, 1.0}, {-1, 0, -1, -1, 1.0}};
  EXPECT_THROW(t.validate(2), Error);
}

}  // namespace
}  // namespace aqcal::gbdt
