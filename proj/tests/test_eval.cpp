#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "vibtac/eval.hpp"
#include "vibtac/io.hpp"

using namespace vibtac;

namespace {

LabeledFeatures blobs(std::size_t k, std::size_t per_class, std::size_t d, double sep, std::uint64_t seed) {
  SplitMix64 rng(seed);
  LabeledFeatures out;
  out.x = Matrix(k * per_class, d);
  for (std::size_t i = 0; i < k * per_class; ++i) {
    const std::size_t c = i % k;
    out.labels.push_back(static_cast<int>(c));
    out.levels.push_back(0);
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = rng.gaussian() + (j == c % d ? sep : 0.0);
  }
  return out;
}

SweepConfig small_sweep() {
  SweepConfig cfg;
  cfg.task = "gap";
  cfg.models = preset_tasks().gap;
  cfg.rig = default_rig();
  cfg.rig.trials_per_class = 20;
  cfg.levels = {0, 4};
  cfg.folds = 5;
  cfg.grid = {{1.0, 10.0}, {1e-3, 1e-2}};
  return cfg;
}

}  // namespace

TEST(Folds, TenPerClassPerFold) {
  std::vector<int> labels;
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 100; ++i) labels.push_back(c);
  const auto f = stratified_kfold(labels, 10, 7);
  for (int fold = 0; fold < 10; ++fold) {
    std::vector<int> count(5, 0);
    for (std::size_t r : f.test_rows(fold)) ++count[labels[r]];
    for (int c : count) EXPECT_EQ(c, 10);
  }
}

TEST(Folds, BalancedPartitionForUnevenClasses) {
  std::vector<int> labels;
  const int sizes[] = {23, 31, 10, 47};
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < sizes[c]; ++i) labels.push_back(c * 3 + 1);
  const auto f = stratified_kfold(labels, 10, 3);
  std::vector<int> seen(labels.size(), 0);
  for (int fold = 0; fold < 10; ++fold) {
    for (std::size_t r : f.test_rows(fold)) ++seen[r];
    EXPECT_EQ(f.test_rows(fold).size() + f.train_rows(fold).size(), labels.size());
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  for (int c = 0; c < 4; ++c) {
    std::vector<int> per_fold(10, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c * 3 + 1) ++per_fold[f.fold[i]];
    const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
    EXPECT_LE(*hi - *lo, 1);
  }
}

TEST(Folds, DeterministicAndSeedDependent) {
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) labels[i] = static_cast<int>(i % 4);
  EXPECT_EQ(stratified_kfold(labels, 10, 1).fold, stratified_kfold(labels, 10, 1).fold);
  EXPECT_NE(stratified_kfold(labels, 10, 1).fold, stratified_kfold(labels, 10, 2).fold);
}

TEST(Folds, RejectsSmallClasses) {
  std::vector<int> labels = {0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  EXPECT_THROW(stratified_kfold(labels, 10, 1), ClassTooSmall);
  EXPECT_THROW(stratified_kfold(labels, labels.size(), 1), ClassTooSmall);
  EXPECT_THROW(stratified_kfold(labels, 1, 1), InvalidArgument);
}

TEST(GridSearch, SinglePoint) {
  const auto data = blobs(3, 20, 3, 3.0, 1);
  const auto folds = stratified_kfold(data.labels, 5, 1);
  const auto r = grid_search(data, {{3.0}, {0.2}}, folds);
  EXPECT_EQ(r.best_c, 3.0);
  EXPECT_EQ(r.best_gamma, 0.2);
  EXPECT_EQ(r.accuracy.size(), 1u);
  EXPECT_EQ(r.accuracy[0][0], r.best_accuracy);
}

TEST(GridSearch, SeparableBlobsReachPerfectAccuracy) {
  const auto data = blobs(3, 20, 3, 12.0, 2);
  const auto folds = stratified_kfold(data.labels, 5, 2);
  const auto r = grid_search(data, {{1.0, 10.0}, {0.01, 0.1}}, folds);
  EXPECT_EQ(r.best_accuracy, 1.0);
}

TEST(GridSearch, TiesPreferSmallerCThenGamma) {
  const auto data = blobs(3, 20, 3, 12.0, 3);
  const auto folds = stratified_kfold(data.labels, 5, 3);
  const auto r = grid_search(data, {{100.0, 10.0}, {0.1, 0.05}}, folds);
  ASSERT_EQ(r.best_accuracy, 1.0);
  EXPECT_EQ(r.best_c, 10.0);
  EXPECT_EQ(r.best_gamma, 0.05);
}

TEST(GridSearch, AccuracyTableMatchesCrossValidation) {
  const auto data = blobs(4, 15, 4, 1.5, 4);
  const auto folds = stratified_kfold(data.labels, 5, 4);
  EvalOptions opt;
  opt.warm_start = false;
  const SvmGrid grid{{0.5, 5.0}, {0.1, 1.0}};
  const auto r = grid_search(data, grid, folds, opt);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t g = 0; g < 2; ++g) {
      const auto cv = cross_val_report(data, {grid.c_values[c], grid.gamma_values[g]}, folds, opt);
      EXPECT_DOUBLE_EQ(r.accuracy[c][g], cv.mean_accuracy);
    }
  EXPECT_THROW(grid_search(data, {{}, {1.0}}, folds), InvalidArgument);
}

TEST(GridSearch, IndependentOfJobs) {
  const auto data = blobs(4, 15, 4, 1.0, 5);
  const auto folds = stratified_kfold(data.labels, 5, 5);
  EvalOptions one, many;
  many.jobs = 4;
  const auto a = grid_search(data, default_grid(), folds, one);
  const auto b = grid_search(data, default_grid(), folds, many);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.best_c, b.best_c);
  EXPECT_EQ(a.best_gamma, b.best_gamma);
}

TEST(CrossVal, SeparableGivesDiagonalConfusion) {
  const auto data = blobs(3, 20, 3, 12.0, 6);
  const auto folds = stratified_kfold(data.labels, 5, 6);
  const auto r = cross_val_report(data, {10.0, 0.05}, folds);
  EXPECT_EQ(r.mean_accuracy, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.confusion[i][j], i == j ? 20u : 0u);
}

TEST(CrossVal, ShuffledLabelsNearChance) {
  auto data = blobs(5, 100, 5, 3.0, 7);
  shuffle_in_place(data.labels, 99);
  const auto folds = stratified_kfold(data.labels, 10, 7);
  const auto r = cross_val_report(data, {1.0, 0.1}, folds);
  EXPECT_GE(r.mean_accuracy, 0.10);
  EXPECT_LE(r.mean_accuracy, 0.35);
}

TEST(CrossVal, InvariantsAndNoLeakage) {
  auto data = blobs(4, 20, 3, 1.0, 8);
  const auto folds = stratified_kfold(data.labels, 5, 8);
  const auto r = cross_val_report(data, {1.0, 0.5}, folds);
  for (std::size_t i = 0; i < 4; ++i) {
    std::size_t row = 0;
    for (auto v : r.confusion[i]) row += v;
    EXPECT_EQ(row, 20u);
  }
  for (double a : r.fold_accuracies) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  ASSERT_EQ(r.traces.size(), 5u);
  for (int f = 0; f < 5; ++f) {
    EXPECT_EQ(r.traces[f].fit_checksum, checksum_rows(data, folds.train_rows(f)));
    EXPECT_EQ(r.traces[f].train_rows, folds.train_rows(f).size());
  }
  // perturbing fold 0's test rows leaves fold 0's fit inputs untouched
  LabeledFeatures changed = data;
  for (std::size_t row : folds.test_rows(0)) changed.x(row, 0) += 100.0;
  const auto r2 = cross_val_report(changed, {1.0, 0.5}, folds);
  EXPECT_EQ(r2.traces[0].fit_checksum, r.traces[0].fit_checksum);
  for (int f = 1; f < 5; ++f) EXPECT_NE(r2.traces[f].fit_checksum, r.traces[f].fit_checksum);
}

TEST(CrossVal, PresetDatasetRowSums) {
  const auto traces = generate_dataset(preset_tasks().grit, default_rig(), 4);
  const auto data = to_labeled(extract_all(traces, 1));
  const auto folds = stratified_kfold(data.labels, 10, 7);
  const auto r = cross_val_report(data, {10.0, 1e-3}, folds);
  for (const auto& row : r.confusion) {
    std::size_t s = 0;
    for (auto v : row) s += v;
    EXPECT_EQ(s, 100u);
  }
}

TEST(Sweep, StructureAndTest) {
  const auto cfg = small_sweep();
  const auto report = level_sweep(cfg);
  ASSERT_EQ(report.levels.size(), 2u);
  EXPECT_EQ(report.levels[0].level, 0);
  EXPECT_EQ(report.levels[1].level, 4);
  EXPECT_GT(report.levels[1].cv.mean_accuracy, report.levels[0].cv.mean_accuracy);
  ASSERT_EQ(report.t_tests.size(), 1u);
  EXPECT_EQ(report.t_tests[0].a, "level0");
  EXPECT_EQ(report.t_tests[0].b, "level4");
  for (const auto& l : report.levels) {
    EXPECT_EQ(l.projection.rows(), 100u);
    EXPECT_EQ(l.projection.cols(), 3u);
    EXPECT_GE(l.j_value, 0.0);
    EXPECT_EQ(l.cv.fold_accuracies.size(), 5u);
  }
}

TEST(Sweep, BitIdenticalAcrossRunsAndJobs) {
  auto cfg = small_sweep();
  const std::string a = to_json(level_sweep(cfg)).dump();
  const std::string b = to_json(level_sweep(cfg)).dump();
  cfg.options.jobs = 3;
  const std::string c = to_json(level_sweep(cfg)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Sweep, NoTestWithoutLevelZero) {
  auto cfg = small_sweep();
  cfg.levels = {4};
  EXPECT_TRUE(level_sweep(cfg).t_tests.empty());
  cfg.levels = {};
  EXPECT_THROW(level_sweep(cfg), InvalidArgument);
}

TEST(Digest, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a("", 0), 0xCBF29CE484222325ULL);
  EXPECT_EQ(fnv1a("a", 1), 0xAF63DC4C8601EC8CULL);
  EXPECT_EQ(fnv1a("foobar", 6), 0x85944171F73967E8ULL);
}
