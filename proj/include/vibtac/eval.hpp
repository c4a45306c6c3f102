#pragma once

// Evaluation protocol: stratified k-fold assignment, exhaustive (C, gamma)
// search on shared folds, per-fold reports with confusion matrices, and the
// sweep over vibration levels.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vibtac/dataset.hpp"
#include "vibtac/discriminant.hpp"
#include "vibtac/parallel.hpp"
#include "vibtac/rng.hpp"
#include "vibtac/signal.hpp"
#include "vibtac/simulator.hpp"
#include "vibtac/stats.hpp"
#include "vibtac/svm.hpp"

namespace vibtac {

struct FoldAssignment {
  std::vector<int> fold;  // fold id per sample
  std::size_t k = 10;
  std::uint64_t seed = 0;

  std::vector<std::size_t> train_rows(int f) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) rows.push_back(i);
    return rows;
  }
  std::vector<std::size_t> test_rows(int f) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) rows.push_back(i);
    return rows;
  }
};

// Within each class, rows are shuffled by seed and dealt round-robin.
inline FoldAssignment stratified_kfold(const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("stratified_kfold: k must be at least 2");
  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  out.fold.assign(labels.size(), -1);
  const auto ids = class_ids(labels);
  for (std::size_t c = 0; c < ids.size(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == ids[c]) members.push_back(i);
    if (members.size() < k) {
      throw ClassTooSmall("stratified_kfold: class " + std::to_string(ids[c]) + " has " +
                          std::to_string(members.size()) + " samples, fewer than k = " + std::to_string(k));
    }
    shuffle_in_place(members, derive_seed(seed, {static_cast<std::uint64_t>(c)}));
    for (std::size_t pos = 0; pos < members.size(); ++pos) out.fold[members[pos]] = static_cast<int>(pos % k);
  }
  return out;
}

struct SvmGrid {
  std::vector<double> c_values;
  std::vector<double> gamma_values;
};

inline SvmGrid default_grid() {
  return {{1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4}, {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1}};
}

struct EvalOptions {
  bool standardize = true;
  double tol = 1e-3;
  std::size_t max_passes = 0;
  unsigned jobs = 1;
  // Grid search starts each C from the solution at the previous (smaller) C,
  // which is feasible for the larger box.
  bool warm_start = true;
};

struct GridSearchResult {
  double best_c = 0.0;
  double best_gamma = 0.0;
  double best_accuracy = 0.0;
  std::vector<std::vector<double>> accuracy;  // [c index][gamma index]
};

namespace detail {

struct FoldData {
  Matrix train_sq;  // train x train squared distances
  Matrix test_sq;   // test x train
  std::vector<int> train_labels;
  std::vector<int> test_labels;
};

inline FoldData prepare_fold(const LabeledFeatures& data, const FoldAssignment& folds, int f, bool standardize) {
  LabeledFeatures train = subset(data, folds.train_rows(f));
  LabeledFeatures test = subset(data, folds.test_rows(f));
  if (standardize) {
    const Standardizer s = Standardizer::fit(train.x);
    train.x = s.apply(train.x);
    test.x = s.apply(test.x);
  }
  FoldData fd;
  fd.train_sq = squared_distance_matrix(train.x, train.x);
  fd.test_sq = squared_distance_matrix(test.x, train.x);
  fd.train_labels = std::move(train.labels);
  fd.test_labels = std::move(test.labels);
  return fd;
}

inline void validate_folds(const LabeledFeatures& data, const FoldAssignment& folds) {
  if (folds.fold.size() != data.size()) throw DimensionMismatch("fold assignment length differs from dataset");
  for (int f : folds.fold)
    if (f < 0 || static_cast<std::size_t>(f) >= folds.k) throw InvalidArgument("fold id out of range");
}

}  // namespace detail

// Mean CV accuracy at every grid point; ties go to the smaller C, then the
// smaller gamma.
inline GridSearchResult grid_search(const LabeledFeatures& data, const SvmGrid& grid, const FoldAssignment& folds,
                                    const EvalOptions& opt = {}) {
  if (grid.c_values.empty() || grid.gamma_values.empty()) throw InvalidArgument("grid_search: empty grid");
  detail::validate_folds(data, folds);
  const auto ids = class_ids(data.labels);
  const std::size_t nf = folds.k, nc = grid.c_values.size(), ng = grid.gamma_values.size();

  // C is visited in ascending order so warm starts move to a larger box.
  std::vector<std::size_t> c_order(nc);
  std::iota(c_order.begin(), c_order.end(), 0);
  std::stable_sort(c_order.begin(), c_order.end(),
                   [&](std::size_t a, std::size_t b) { return grid.c_values[a] < grid.c_values[b]; });

  std::vector<detail::FoldData> fold_data(nf);
  parallel_for(nf, opt.jobs, [&](std::size_t f) {
    fold_data[f] = detail::prepare_fold(data, folds, static_cast<int>(f), opt.standardize);
  });

  // correct[(f * ng + g) * nc + c]
  std::vector<std::size_t> correct(nf * ng * nc, 0);
  parallel_for(nf * ng, opt.jobs, [&](std::size_t item) {
    const std::size_t f = item / ng, g = item % ng;
    const auto& fd = fold_data[f];
    const double gamma = grid.gamma_values[g];
    const Matrix gram = rbf_gram(fd.train_sq, gamma);
    const Matrix test_k = rbf_gram(fd.test_sq, gamma);
    const std::size_t nt = fd.test_labels.size();
    // decisions[c][class][test row]
    std::vector<std::vector<std::vector<double>>> decisions(nc, std::vector<std::vector<double>>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto y = one_vs_rest_labels(fd.train_labels, ids[k]);
      std::vector<double> warm;
      for (std::size_t ci : c_order) {
        SvmHyperParams hp{grid.c_values[ci], gamma, opt.tol, opt.max_passes};
        validate(hp);
        const DualSolution sol = solve_dual_gram(gram, y, hp, opt.warm_start && !warm.empty() ? &warm : nullptr);
        warm = sol.alpha;
        auto& dec = decisions[ci][k];
        dec.assign(nt, sol.bias);
        for (std::size_t t = 0; t < nt; ++t) {
          const auto kr = test_k.row(t);
          double s = 0.0;
          for (std::size_t i = 0; i < sol.alpha.size(); ++i)
            if (sol.alpha[i] > 0.0) s += sol.alpha[i] * y[i] * kr[i];
          dec[t] += s;
        }
      }
    }
    std::vector<double> f_values(ids.size());
    for (std::size_t ci = 0; ci < nc; ++ci) {
      std::size_t hits = 0;
      for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t k = 0; k < ids.size(); ++k) f_values[k] = decisions[ci][k][t];
        hits += pick_class(ids, f_values) == fd.test_labels[t];
      }
      correct[(f * ng + g) * nc + ci] = hits;
    }
  });

  GridSearchResult out;
  out.accuracy.assign(nc, std::vector<double>(ng, 0.0));
  std::vector<std::vector<std::size_t>> totals(nc, std::vector<std::size_t>(ng, 0));
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t g = 0; g < ng; ++g)
      for (std::size_t c = 0; c < nc; ++c) totals[c][g] += correct[(f * ng + g) * nc + c];
  const double n = static_cast<double>(data.size());
  std::size_t best_hits = 0;
  bool have_best = false;
  std::size_t best_c = 0, best_g = 0;
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t g = 0; g < ng; ++g) {
      out.accuracy[c][g] = static_cast<double>(totals[c][g]) / n;
      const bool better =
          !have_best || totals[c][g] > best_hits ||
          (totals[c][g] == best_hits &&
           (grid.c_values[c] < grid.c_values[best_c] ||
            (grid.c_values[c] == grid.c_values[best_c] && grid.gamma_values[g] < grid.gamma_values[best_g])));
      if (better) {
        have_best = true;
        best_hits = totals[c][g];
        best_c = c;
        best_g = g;
      }
    }
  out.best_c = grid.c_values[best_c];
  out.best_gamma = grid.gamma_values[best_g];
  out.best_accuracy = static_cast<double>(best_hits) / n;
  return out;
}

// FNV-1a over raw bytes; used for fit-input audit trails and config digests.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xCBF29CE484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t checksum_rows(const LabeledFeatures& data, const std::vector<std::size_t>& rows) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t r : rows) {
    const auto row = data.x.row(r);
    h = fnv1a(row.data(), row.size() * sizeof(double), h);
    h = fnv1a(&data.labels[r], sizeof(int), h);
  }
  return h;
}

struct FoldTrace {
  std::uint64_t fit_checksum = 0;  // over the rows used to fit scaling and models
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

struct CrossValReport {
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
  std::vector<int> class_ids;
  std::vector<std::vector<std::size_t>> confusion;  // [true class][predicted class]
  std::vector<FoldTrace> traces;
  std::size_t non_converged = 0;  // binary problems stopped at max_passes
};

inline CrossValReport cross_val_report(const LabeledFeatures& data, const SvmHyperParams& hp,
                                       const FoldAssignment& folds, const EvalOptions& opt = {}) {
  detail::validate_folds(data, folds);
  validate(hp);
  CrossValReport out;
  out.class_ids = class_ids(data.labels);
  const std::size_t k = out.class_ids.size();
  out.confusion.assign(k, std::vector<std::size_t>(k, 0));
  out.fold_accuracies.assign(folds.k, 0.0);
  out.traces.assign(folds.k, {});
  auto index_of = [&](int label) {
    return static_cast<std::size_t>(std::lower_bound(out.class_ids.begin(), out.class_ids.end(), label) -
                                    out.class_ids.begin());
  };

  std::vector<std::vector<int>> predictions(folds.k);
  std::vector<std::size_t> non_converged(folds.k, 0);
  parallel_for(folds.k, opt.jobs, [&](std::size_t f) {
    const auto train_idx = folds.train_rows(static_cast<int>(f));
    const auto test_idx = folds.test_rows(static_cast<int>(f));
    const LabeledFeatures train = subset(data, train_idx);
    const TrainedClassifier clf = train_classifier(train, hp, opt.standardize);
    for (const auto& m : clf.ovr.models) non_converged[f] += !m.converged;
    out.traces[f] = {checksum_rows(data, train_idx), train_idx.size(), test_idx.size()};
    for (std::size_t r : test_idx) predictions[f].push_back(clf.predict(data.x.row(r)));
  });

  std::size_t total_correct = 0;
  for (std::size_t f = 0; f < folds.k; ++f) {
    const auto test_idx = folds.test_rows(static_cast<int>(f));
    std::size_t hits = 0;
    for (std::size_t t = 0; t < test_idx.size(); ++t) {
      const int truth = data.labels[test_idx[t]];
      const int pred = predictions[f][t];
      ++out.confusion[index_of(truth)][index_of(pred)];
      hits += truth == pred;
    }
    out.fold_accuracies[f] = test_idx.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(test_idx.size());
    total_correct += hits;
    out.non_converged += non_converged[f];
  }
  out.mean_accuracy = static_cast<double>(total_correct) / static_cast<double>(data.size());
  return out;
}

// ---- level sweep ---------------------------------------------------------------

struct SweepConfig {
  std::string task = "grit";
  std::vector<ContactClassModel> models;
  std::vector<int> levels = {0, 1, 2, 3, 4, 5, 6};
  RigConfig rig;
  SvmGrid grid = default_grid();
  double ridge_scale = kDefaultRidgeScale;
  std::size_t d_prime = kDefaultProjectionDim;
  std::size_t folds = 10;
  std::uint64_t fold_seed = 7;
  EvalOptions options;
};

struct LevelResult {
  int level = 0;
  double intensity_db = 0.0;
  double j_value = 0.0;
  std::vector<double> fisher_eigenvalues;
  double ridge = 0.0;
  double grid_accuracy = 0.0;
  double best_c = 0.0;
  double best_gamma = 0.0;
  CrossValReport cv;
  Matrix projection;  // N x d_prime, rows aligned with labels
  std::vector<int> labels;
  double pdc_mean = 0.0;
  double pdc_std = 0.0;
};

struct TTestEntry {
  std::string a;
  std::string b;
  TTestResult result;
};

struct EvalReport {
  std::string task;
  std::vector<LevelResult> levels;
  std::vector<TTestEntry> t_tests;
  std::uint64_t rig_seed = 0;
  std::uint64_t fold_seed = 0;
  std::string config_digest;

  const LevelResult* best_level() const {
    const LevelResult* best = nullptr;
    for (const auto& l : levels)
      if (best == nullptr || l.cv.mean_accuracy > best->cv.mean_accuracy) best = &l;
    return best;
  }
  const LevelResult* find_level(int level) const {
    for (const auto& l : levels)
      if (l.level == level) return &l;
    return nullptr;
  }
};

inline std::vector<FeatureVector> extract_all(const TraceDataset& traces, unsigned jobs) {
  std::vector<FeatureVector> out(traces.traces.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = extract_features(traces.traces[i]); });
  return out;
}

inline LevelResult evaluate_level(const SweepConfig& cfg, int level) {
  const unsigned jobs = cfg.options.jobs;
  const TraceDataset traces = generate_dataset(cfg.models, cfg.rig, level, jobs);
  const LabeledFeatures data = to_labeled(extract_all(traces, jobs));

  LevelResult r;
  r.level = level;
  r.intensity_db = level_intensity_db(level);
  {
    double s = 0.0, s2 = 0.0;
    for (const auto& t : traces.traces) {
      s += t.pdc;
      s2 += t.pdc * t.pdc;
    }
    const double n = static_cast<double>(traces.traces.size());
    r.pdc_mean = s / n;
    r.pdc_std = std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1.0)));
  }

  const ScatterPair scatter = scatter_matrices(data);
  r.ridge = default_ridge(scatter, cfg.ridge_scale);
  const FisherProjection proj = fisher_projection(scatter, r.ridge, cfg.d_prime);
  r.j_value = proj.j_value;
  r.fisher_eigenvalues = proj.eigenvalues;
  r.projection = project(data.x, proj);
  r.labels = data.labels;

  const FoldAssignment folds = stratified_kfold(data.labels, cfg.folds, cfg.fold_seed);
  const GridSearchResult gs = grid_search(data, cfg.grid, folds, cfg.options);
  r.grid_accuracy = gs.best_accuracy;
  r.best_c = gs.best_c;
  r.best_gamma = gs.best_gamma;
  SvmHyperParams hp{gs.best_c, gs.best_gamma, cfg.options.tol, cfg.options.max_passes};
  r.cv = cross_val_report(data, hp, folds, cfg.options);
  return r;
}

inline std::string level_name(int level) { return "level" + std::to_string(level); }

// Welch test of level 0 against the best level, when both are present.
inline void add_level_tests(EvalReport& report) {
  report.t_tests.clear();
  const LevelResult* base = report.find_level(0);
  const LevelResult* best = report.best_level();
  if (base != nullptr && best != nullptr && best != base) {
    report.t_tests.push_back({level_name(0), level_name(best->level),
                              welch_t_test(base->cv.fold_accuracies, best->cv.fold_accuracies)});
  }
}

inline EvalReport level_sweep(const SweepConfig& cfg) {
  if (cfg.levels.empty()) throw InvalidArgument("level_sweep: no levels requested");
  EvalReport report;
  report.task = cfg.task;
  report.rig_seed = cfg.rig.seed;
  report.fold_seed = cfg.fold_seed;
  for (int level : cfg.levels) report.levels.push_back(evaluate_level(cfg, level));
  add_level_tests(report);
  return report;
}

}  // namespace vibtac
