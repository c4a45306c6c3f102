#pragma once

// C-SVC with an RBF kernel trained by sequential minimal optimization, and a
// one-vs-rest wrapper for multiclass problems.
//
// The dual is solved in its minimisation form
//   min_a  1/2 a^T Q a - e^T a,  Q_ij = y_i y_j K(x_i, x_j)
//   s.t.   y^T a = 0,  0 <= a_i <= C
// Working pairs follow the maximal-violating-pair rule for i and the largest
// second-order objective decrease for j. The stopping rule
// max_{I_up} -y G - min_{I_low} -y G < tol bounds every KKT residual of the
// decision function by tol.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vibtac/dataset.hpp"
#include "vibtac/errors.hpp"
#include "vibtac/numerics.hpp"

namespace vibtac {

struct SvmHyperParams {
  double c = 1.0;
  double gamma = 1.0;
  double tol = 1e-3;
  std::size_t max_passes = 0;  // SMO pair updates; 0 picks max(10^7, 100 n)
};

inline void validate(const SvmHyperParams& hp) {
  if (!(hp.c > 0.0) || !std::isfinite(hp.c)) throw InvalidArgument("SVM: C must be positive and finite");
  if (!(hp.gamma > 0.0) || !std::isfinite(hp.gamma))
    throw InvalidArgument("SVM: gamma must be positive and finite");
  if (!(hp.tol > 0.0)) throw InvalidArgument("SVM: tol must be positive");
}

inline double squared_distance(std::span<const double> x, std::span<const double> z) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - z[i];
    s += d * d;
  }
  return s;
}

inline double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  if (x.size() != z.size()) throw DimensionMismatch("rbf_kernel: vectors differ in length");
  return std::exp(-gamma * squared_distance(x, z));
}

struct BinarySvmModel {
  Matrix support_vectors;    // one row per support vector
  std::vector<double> alphas;
  std::vector<int> labels;   // +1 / -1 per support vector
  double bias = 0.0;
  double c = 1.0;
  double gamma = 1.0;
  std::size_t dim = 0;
  bool converged = true;
  std::size_t iterations = 0;
  double dual_objective = 0.0;  // sum a - 1/2 a^T Q a
};

struct BinaryPrediction {
  double decision_value = 0.0;
  int label = 1;
};

inline double decision_value(const BinarySvmModel& model, std::span<const double> x) {
  if (x.size() != model.dim) throw DimensionMismatch("predict: feature dimension differs from model");
  double f = model.bias;
  for (std::size_t i = 0; i < model.alphas.size(); ++i) {
    f += model.alphas[i] * model.labels[i] *
         std::exp(-model.gamma * squared_distance(model.support_vectors.row(i), x));
  }
  return f;
}

inline BinaryPrediction predict_binary(const BinarySvmModel& model, std::span<const double> x) {
  const double f = decision_value(model, x);
  return {f, f >= 0.0 ? 1 : -1};
}

// ---- SMO solver --------------------------------------------------------------

struct DualSolution {
  std::vector<double> alpha;
  std::vector<double> gradient;  // Q a - e
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  double dual_objective = 0.0;
};

inline constexpr std::size_t kFullGramLimit = 4000;

namespace detail {

inline constexpr double kTau = 1e-12;

// Kernel rows from a precomputed Gram matrix.
class GramKernel {
 public:
  explicit GramKernel(const Matrix& gram) : gram_(gram) {}
  std::size_t size() const { return gram_.rows(); }
  double diag(std::size_t i) const { return gram_(i, i); }
  std::span<const double> row(std::size_t i) { return gram_.row(i); }

 private:
  const Matrix& gram_;
};

// Kernel rows computed on demand; keeps the two most recent rows.
class StreamedKernel {
 public:
  StreamedKernel(const Matrix& x, double gamma) : x_(x), gamma_(gamma) {
    for (auto& r : rows_) r.resize(x.rows());
  }
  std::size_t size() const { return x_.rows(); }
  double diag(std::size_t) const { return 1.0; }
  std::span<const double> row(std::size_t i) {
    for (int s = 0; s < 2; ++s)
      if (index_[s] == i) {
        last_ = s;
        return rows_[s];
      }
    const int slot = 1 - last_;
    for (std::size_t j = 0; j < x_.rows(); ++j)
      rows_[slot][j] = std::exp(-gamma_ * squared_distance(x_.row(i), x_.row(j)));
    index_[slot] = i;
    last_ = slot;
    return rows_[slot];
  }

 private:
  const Matrix& x_;
  double gamma_;
  std::vector<double> rows_[2];
  std::size_t index_[2] = {SIZE_MAX, SIZE_MAX};
  int last_ = 1;
};

template <typename Kernel>
DualSolution solve_dual(Kernel& kernel, std::span<const int> y, double c, double tol,
                        std::size_t max_iter, const std::vector<double>* warm_alpha) {
  const std::size_t n = kernel.size();
  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  sol.gradient.assign(n, -1.0);
  auto& a = sol.alpha;
  auto& g = sol.gradient;

  if (warm_alpha != nullptr) {
    for (std::size_t i = 0; i < n; ++i) a[i] = std::min((*warm_alpha)[i], c);
    for (std::size_t s = 0; s < n; ++s) {
      if (a[s] == 0.0) continue;
      const auto ks = kernel.row(s);
      for (std::size_t t = 0; t < n; ++t) g[t] += y[t] * y[s] * ks[t] * a[s];
    }
  }

  std::vector<double> row_i(n), row_j(n);
  const double inf = std::numeric_limits<double>::infinity();
  std::size_t iter = 0;
  sol.converged = false;
  for (;;) {
    // i: maximal violator in I_up
    double gmax = -inf;
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (a[t] < c && -g[t] >= gmax) {
          gmax = -g[t];
          i = t;
        }
      } else if (a[t] > 0.0 && g[t] >= gmax) {
        gmax = g[t];
        i = t;
      }
    }
    if (i == n) {
      sol.converged = true;
      break;
    }
    {
      const auto ki = kernel.row(i);
      std::copy(ki.begin(), ki.end(), row_i.begin());
    }
    const double kii = kernel.diag(i);
    // j: largest objective decrease among I_low
    double gmax2 = -inf;
    double best = inf;
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      double grad_diff;
      if (y[t] == 1) {
        if (!(a[t] > 0.0)) continue;
        gmax2 = std::max(gmax2, g[t]);
        grad_diff = gmax + g[t];
      } else {
        if (!(a[t] < c)) continue;
        gmax2 = std::max(gmax2, -g[t]);
        grad_diff = gmax - g[t];
      }
      if (grad_diff > 0.0) {
        double quad = kii + kernel.diag(t) - 2.0 * row_i[t];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    if (gmax + gmax2 < tol) {
      sol.converged = true;
      break;
    }
    if (j == n || iter >= max_iter) break;
    ++iter;

    {
      const auto kj = kernel.row(j);
      std::copy(kj.begin(), kj.end(), row_j.begin());
    }
    const double kjj = kernel.diag(j);
    const double qij = y[i] * y[j] * row_i[j];
    const double old_ai = a[i], old_aj = a[j];
    if (y[i] != y[j]) {
      double quad = kii + kjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = c - diff;
        }
      } else if (a[j] > c) {
        a[j] = c;
        a[i] = c + diff;
      }
    } else {
      double quad = kii + kjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = sum - c;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > c) {
        if (a[j] > c) {
          a[j] = c;
          a[i] = sum - c;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }
    const double dai = a[i] - old_ai, daj = a[j] - old_aj;
    const double yi_dai = y[i] * dai, yj_daj = y[j] * daj;
    for (std::size_t t = 0; t < n; ++t) g[t] += y[t] * (row_i[t] * yi_dai + row_j[t] * yj_daj);
  }
  sol.iterations = iter;

  // bias: mean of y G over free vectors, else midpoint of the feasible interval
  double ub = inf, lb = -inf, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * g[t];
    if (a[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  sol.bias = -rho;

  double obj = 0.0;  // 1/2 a^T Q a - e^T a = 1/2 sum a_i (G_i - 1)
  for (std::size_t t = 0; t < n; ++t) obj += a[t] * (g[t] - 1.0);
  sol.dual_objective = -0.5 * obj;
  return sol;
}

inline std::size_t max_iterations(const SvmHyperParams& hp, std::size_t n) {
  return hp.max_passes > 0 ? hp.max_passes : std::max<std::size_t>(10'000'000, 100 * n);
}

inline void check_binary_labels(std::span<const int> y) {
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw InvalidArgument("train_binary: labels must be +1 or -1");
  }
  if (!pos || !neg) throw SingleClassInput("train_binary: both labels must be present");
}

inline BinarySvmModel model_from_solution(const Matrix& x, std::span<const int> y, const DualSolution& sol,
                                          const SvmHyperParams& hp) {
  BinarySvmModel m;
  m.c = hp.c;
  m.gamma = hp.gamma;
  m.dim = x.cols();
  m.bias = sol.bias;
  m.converged = sol.converged;
  m.iterations = sol.iterations;
  m.dual_objective = sol.dual_objective;
  std::size_t count = 0;
  for (double v : sol.alpha) count += v > 0.0;
  m.support_vectors = Matrix(count, x.cols());
  std::size_t r = 0;
  for (std::size_t i = 0; i < sol.alpha.size(); ++i) {
    if (!(sol.alpha[i] > 0.0)) continue;
    const auto src = x.row(i);
    std::copy(src.begin(), src.end(), m.support_vectors.row(r).begin());
    m.alphas.push_back(sol.alpha[i]);
    m.labels.push_back(y[i]);
    ++r;
  }
  return m;
}

}  // namespace detail

inline Matrix squared_distance_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("distance matrix: dimensions differ");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = squared_distance(a.row(i), b.row(j));
  return out;
}

// Gram matrix of the training rows, symmetric by construction.
inline Matrix rbf_gram(const Matrix& sq_dist, double gamma) {
  Matrix k(sq_dist.rows(), sq_dist.cols());
  for (std::size_t i = 0; i < k.data().size(); ++i) k.data()[i] = std::exp(-gamma * sq_dist.data()[i]);
  return k;
}

inline DualSolution solve_dual_gram(const Matrix& gram, std::span<const int> y, const SvmHyperParams& hp,
                                    const std::vector<double>* warm_alpha = nullptr) {
  detail::GramKernel kernel(gram);
  return detail::solve_dual(kernel, y, hp.c, hp.tol, detail::max_iterations(hp, gram.rows()), warm_alpha);
}

inline BinarySvmModel train_binary(const Matrix& x, std::span<const int> y, const SvmHyperParams& hp) {
  validate(hp);
  if (x.rows() != y.size()) throw DimensionMismatch("train_binary: label count differs from rows");
  detail::check_binary_labels(y);
  DualSolution sol;
  if (x.rows() <= kFullGramLimit) {
    const Matrix gram = rbf_gram(squared_distance_matrix(x, x), hp.gamma);
    sol = solve_dual_gram(gram, y, hp);
  } else {
    detail::StreamedKernel kernel(x, hp.gamma);
    sol = detail::solve_dual(kernel, y, hp.c, hp.tol, detail::max_iterations(hp, x.rows()), nullptr);
  }
  return detail::model_from_solution(x, y, sol, hp);
}

// ---- one-vs-rest -------------------------------------------------------------

struct OvrSvmModel {
  std::vector<int> class_ids;  // ascending
  std::vector<BinarySvmModel> models;
};

inline std::vector<int> one_vs_rest_labels(const std::vector<int>& labels, int positive) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == positive ? 1 : -1;
  return y;
}

inline OvrSvmModel train_ovr(const Matrix& x, const std::vector<int>& labels, const SvmHyperParams& hp) {
  validate(hp);
  if (x.rows() != labels.size()) throw DimensionMismatch("train_ovr: label count differs from rows");
  OvrSvmModel out;
  out.class_ids = class_ids(labels);
  if (out.class_ids.size() < 2) throw SingleClassInput("train_ovr: need at least two classes");
  if (x.rows() <= kFullGramLimit) {
    const Matrix gram = rbf_gram(squared_distance_matrix(x, x), hp.gamma);
    for (int cls : out.class_ids) {
      const auto y = one_vs_rest_labels(labels, cls);
      out.models.push_back(detail::model_from_solution(x, y, solve_dual_gram(gram, y, hp), hp));
    }
  } else {
    for (int cls : out.class_ids) out.models.push_back(train_binary(x, one_vs_rest_labels(labels, cls), hp));
  }
  return out;
}

// Argmax of the per-class decision values; ties go to the smaller class id.
inline int pick_class(const std::vector<int>& ids, std::span<const double> decisions) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < decisions.size(); ++k)
    if (decisions[k] > decisions[best]) best = k;
  return ids[best];
}

inline int predict_ovr(const OvrSvmModel& model, std::span<const double> x) {
  std::vector<double> f(model.models.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = decision_value(model.models[k], x);
  return pick_class(model.class_ids, f);
}

// ---- per-dimension z-scoring ---------------------------------------------------

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // population std, 1 where a feature is constant

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const std::size_t d = x.cols();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto r = x.row(i);
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (double& m : s.mean) m /= static_cast<double>(std::max<std::size_t>(x.rows(), 1));
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto r = x.row(i);
      for (std::size_t j = 0; j < d; ++j) s.scale[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    }
    for (double& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(std::max<std::size_t>(x.rows(), 1)));
      if (!(v > 0.0)) v = 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DimensionMismatch("Standardizer: dimension differs");
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) / scale[j];
    }
    return out;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != mean.size()) throw DimensionMismatch("Standardizer: dimension differs");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
    return out;
  }
};

// A one-vs-rest model together with the scaling fitted on its training data.
struct TrainedClassifier {
  SvmHyperParams hyper;
  bool standardize = true;
  Standardizer scaler;
  OvrSvmModel ovr;

  int predict(std::span<const double> x) const {
    if (standardize) return predict_ovr(ovr, scaler.apply(x));
    return predict_ovr(ovr, x);
  }
};

inline TrainedClassifier train_classifier(const LabeledFeatures& data, const SvmHyperParams& hp,
                                          bool standardize) {
  TrainedClassifier out;
  out.hyper = hp;
  out.standardize = standardize;
  if (standardize) {
    out.scaler = Standardizer::fit(data.x);
    out.ovr = train_ovr(out.scaler.apply(data.x), data.labels, hp);
  } else {
    out.ovr = train_ovr(data.x, data.labels, hp);
  }
  return out;
}

// ---- serialisation -------------------------------------------------------------

inline constexpr const char* kModelFormat = "vibtac-svm-model";
inline constexpr int kModelVersion = 1;

inline nlohmann::json to_json(const TrainedClassifier& clf) {
  nlohmann::json models = nlohmann::json::array();
  for (std::size_t k = 0; k < clf.ovr.models.size(); ++k) {
    const auto& m = clf.ovr.models[k];
    nlohmann::json sv = nlohmann::json::array();
    for (std::size_t r = 0; r < m.support_vectors.rows(); ++r) {
      const auto row = m.support_vectors.row(r);
      sv.push_back(std::vector<double>(row.begin(), row.end()));
    }
    models.push_back({{"class_id", clf.ovr.class_ids[k]},
                      {"bias", m.bias},
                      {"converged", m.converged},
                      {"iterations", m.iterations},
                      {"alphas", m.alphas},
                      {"labels", m.labels},
                      {"support_vectors", sv}});
  }
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"hyperparameters",
           {{"c", clf.hyper.c}, {"gamma", clf.hyper.gamma}, {"tol", clf.hyper.tol}, {"max_passes", clf.hyper.max_passes}}},
          {"dim", clf.ovr.models.empty() ? clf.scaler.mean.size() : clf.ovr.models[0].dim},
          {"standardize", clf.standardize},
          {"scaler", {{"mean", clf.scaler.mean}, {"scale", clf.scaler.scale}}},
          {"models", models}};
}

inline TrainedClassifier classifier_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw IoError("model file: unexpected format tag");
    if (j.at("version").get<int>() != kModelVersion) throw IoError("model file: unsupported version");
    TrainedClassifier clf;
    const auto& hp = j.at("hyperparameters");
    clf.hyper.c = hp.at("c").get<double>();
    clf.hyper.gamma = hp.at("gamma").get<double>();
    clf.hyper.tol = hp.at("tol").get<double>();
    clf.hyper.max_passes = hp.at("max_passes").get<std::size_t>();
    const std::size_t dim = j.at("dim").get<std::size_t>();
    clf.standardize = j.at("standardize").get<bool>();
    clf.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    clf.scaler.scale = j.at("scaler").at("scale").get<std::vector<double>>();
    for (const auto& mj : j.at("models")) {
      BinarySvmModel m;
      m.c = clf.hyper.c;
      m.gamma = clf.hyper.gamma;
      m.dim = dim;
      m.bias = mj.at("bias").get<double>();
      m.converged = mj.at("converged").get<bool>();
      m.iterations = mj.at("iterations").get<std::size_t>();
      m.alphas = mj.at("alphas").get<std::vector<double>>();
      m.labels = mj.at("labels").get<std::vector<int>>();
      const auto sv = mj.at("support_vectors").get<std::vector<std::vector<double>>>();
      if (sv.size() != m.alphas.size() || m.labels.size() != m.alphas.size())
        throw IoError("model file: support vector arrays differ in length");
      m.support_vectors = Matrix(sv.size(), dim);
      for (std::size_t r = 0; r < sv.size(); ++r) {
        if (sv[r].size() != dim) throw IoError("model file: support vector has wrong dimension");
        std::copy(sv[r].begin(), sv[r].end(), m.support_vectors.row(r).begin());
      }
      clf.ovr.class_ids.push_back(mj.at("class_id").get<int>());
      clf.ovr.models.push_back(std::move(m));
    }
    return clf;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
}

}  // namespace vibtac
