#pragma once

// Subcommands of the vibtac command-line tool. Kept in a header so tests can
// drive the exact code path the executable runs.
//
// Exit codes: 0 success, 2 config/validation, 3 IO, 4 numerical failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vibtac/discriminant.hpp"
#include "vibtac/eval.hpp"
#include "vibtac/experiment.hpp"
#include "vibtac/io.hpp"
#include "vibtac/simulator.hpp"
#include "vibtac/svm.hpp"

namespace vibtac {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3, kExitNumerical = 4 };

struct CommonOptions {
  std::string config_path;
  std::string task;
  std::vector<int> levels;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out;
  bool no_standardize = false;
};

struct Session {
  ExperimentConfig cfg;
  std::filesystem::path out_dir;
  std::string digest;
  unsigned jobs = 1;

  std::string stamp() const {
    return "vibtac config_digest=" + digest + " rig_seed=" + std::to_string(cfg.sweep.rig.seed) +
           " fold_seed=" + std::to_string(cfg.sweep.fold_seed);
  }
};

inline Session open_session(const CommonOptions& o) {
  Session s;
  s.cfg = o.config_path.empty() ? default_experiment() : load_experiment(o.config_path);
  if (!o.task.empty()) {
    if (o.task != "grit" && o.task != "gap") throw ConfigError("--task: expected grit or gap");
    s.cfg.task = o.task;
    apply_task(s.cfg, {});
  }
  if (!o.levels.empty()) s.cfg.sweep.levels = o.levels;
  if (o.seed) s.cfg.sweep.rig.seed = *o.seed;
  if (!o.out.empty()) s.cfg.output_dir = o.out;
  if (o.no_standardize) s.cfg.sweep.options.standardize = false;
  if (o.jobs == 0) throw ConfigError("--jobs must be at least 1");
  validate_experiment(s.cfg);
  s.jobs = o.jobs;
  s.cfg.sweep.options.jobs = o.jobs;
  s.digest = config_digest(s.cfg);
  s.out_dir = s.cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(s.out_dir, ec);
  if (ec || !std::filesystem::is_directory(s.out_dir))
    throw IoError("cannot create output directory '" + s.out_dir.string() + "'");
  return s;
}

// Output names are plain file names; nothing leaves the output directory.
inline std::filesystem::path output_path(const Session& s, const std::string& name) {
  if (name.find('/') != std::string::npos || name.find('\\') != std::string::npos || name == ".." || name.empty())
    throw IoError("refusing output name '" + name + "'");
  return s.out_dir / name;
}

class Manifest {
 public:
  Manifest(const Session& s, std::string command) : session_(s), command_(std::move(command)) {}

  void add(const std::string& name) { files_.push_back(name); }
  void add_input(const std::filesystem::path& p, const std::string& content) {
    inputs_.push_back({{"file", p.filename().string()}, {"fnv1a", hex64(fnv1a(content.data(), content.size()))}});
  }

  void write(const std::string& status, const std::string& error = {}) const {
    nlohmann::json j = {{"format", "vibtac-manifest"},
                        {"version", 1},
                        {"command", command_},
                        {"status", status},
                        {"config_digest", session_.digest},
                        {"seeds", {{"rig", session_.cfg.sweep.rig.seed}, {"folds", session_.cfg.sweep.fold_seed}}},
                        {"config", resolved_json(session_.cfg)},
                        {"inputs", inputs_.empty() ? nlohmann::json::array() : nlohmann::json(inputs_)},
                        {"files", files_}};
    if (!error.empty()) j["error"] = error;
    write_text_file(output_path(session_, "manifest_" + command_ + ".json"), j.dump(2) + "\n");
  }

 private:
  const Session& session_;
  std::string command_;
  std::vector<std::string> files_;
  std::vector<nlohmann::json> inputs_;
};

template <typename Writer>
void emit(const Session& s, Manifest& m, const std::string& name, Writer&& writer) {
  std::ostringstream ss;
  writer(ss);
  write_text_file(output_path(s, name), ss.str());
  m.add(name);
}

// Runs body; on failure the manifest lists what was written and is marked partial.
template <typename Body>
void with_manifest(const Session& s, const std::string& command, Body&& body) {
  Manifest m(s, command);
  try {
    body(m);
  } catch (const std::exception& e) {
    try {
      m.write("partial", e.what());
    } catch (...) {
    }
    throw;
  }
  m.write("complete");
}

inline std::string stem_of(const std::filesystem::path& p) { return p.stem().string(); }

inline std::vector<FeatureVector> load_features(const std::filesystem::path& p, std::string* content) {
  *content = read_text_file(p);
  std::istringstream in(*content);
  try {
    return read_feature_csv(in);
  } catch (const IoError& e) {
    throw IoError(p.filename().string() + ": " + e.what());
  }
}

// ---- commands --------------------------------------------------------------------

inline void cmd_simulate(const Session& s) {
  with_manifest(s, "simulate", [&](Manifest& m) {
    for (int level : s.cfg.sweep.levels) {
      const TraceDataset data = generate_dataset(s.cfg.sweep.models, s.cfg.sweep.rig, level, s.jobs);
      const std::string name = "traces_" + s.cfg.task + "_level" + std::to_string(level) + ".csv";
      emit(s, m, name, [&](std::ostream& os) { write_trace_csv(os, data, s.stamp()); });
      std::cout << name << ": " << data.traces.size() << " traces\n";
    }
  });
}

inline void cmd_features(const Session& s, const std::filesystem::path& in) {
  with_manifest(s, "features", [&](Manifest& m) {
    const std::string content = read_text_file(in);
    m.add_input(in, content);
    std::istringstream is(content);
    TraceDataset traces;
    try {
      traces = read_trace_csv(is);
    } catch (const IoError& e) {
      throw IoError(in.filename().string() + ": " + e.what());
    }
    const auto features = extract_all(traces, s.jobs);
    std::string stem = stem_of(in);
    const std::string name =
        (stem.rfind("traces_", 0) == 0 ? "features_" + stem.substr(7) : stem + "_features") + ".csv";
    emit(s, m, name, [&](std::ostream& os) { write_feature_csv(os, features, s.stamp()); });
    std::cout << name << ": " << features.size() << " rows x " << kFeatureCount << " features\n";
  });
}

inline void cmd_fisher(const Session& s, const std::filesystem::path& in) {
  with_manifest(s, "fisher", [&](Manifest& m) {
    std::string content;
    const LabeledFeatures data = to_labeled(load_features(in, &content));
    m.add_input(in, content);
    const ScatterPair scatter = scatter_matrices(data);
    const double ridge = default_ridge(scatter, s.cfg.sweep.ridge_scale);
    const FisherProjection proj = fisher_projection(scatter, ridge, s.cfg.sweep.d_prime);
    const Matrix points = project(data.x, proj);
    const std::string stem = stem_of(in);
    emit(s, m, "fisher_" + stem + ".json", [&](std::ostream& os) {
      nlohmann::json j = {{"format", "vibtac-fisher"},
                          {"version", 1},
                          {"config_digest", s.digest},
                          {"input", in.filename().string()},
                          {"samples", data.size()},
                          {"class_ids", scatter.class_ids},
                          {"n_per_class", scatter.n_per_class},
                          {"ridge", ridge},
                          {"d_prime", proj.d_prime},
                          {"j_value", proj.j_value},
                          {"eigenvalues", proj.eigenvalues}};
      os << j.dump(2) << '\n';
    });
    emit(s, m, "projection_" + stem + ".csv",
         [&](std::ostream& os) { write_projection_csv(os, points, data.labels, s.stamp()); });
    std::cout << "J(W*) = " << format_double(proj.j_value) << " (ridge " << format_double(ridge) << ")\n";
  });
}

inline void cmd_train(const Session& s, const std::filesystem::path& in, const SvmHyperParams& hp) {
  with_manifest(s, "train", [&](Manifest& m) {
    std::string content;
    const LabeledFeatures data = to_labeled(load_features(in, &content));
    m.add_input(in, content);
    const TrainedClassifier clf = train_classifier(data, hp, s.cfg.sweep.options.standardize);
    emit(s, m, "model_" + stem_of(in) + ".json", [&](std::ostream& os) {
      nlohmann::json j = to_json(clf);
      j["config_digest"] = s.digest;
      os << j.dump(2) << '\n';
    });
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) hits += clf.predict(data.x.row(i)) == data.labels[i];
    std::cout << "training accuracy " << format_double(static_cast<double>(hits) / data.size()) << "\n";
  });
}

inline void cmd_evaluate(const Session& s, const std::filesystem::path& in, const std::string& model_path) {
  with_manifest(s, "evaluate", [&](Manifest& m) {
    std::string content;
    const LabeledFeatures data = to_labeled(load_features(in, &content));
    m.add_input(in, content);
    nlohmann::json j = {{"format", "vibtac-evaluation"},
                        {"version", 1},
                        {"config_digest", s.digest},
                        {"input", in.filename().string()}};
    if (!model_path.empty()) {
      const std::string model_text = read_text_file(model_path);
      m.add_input(model_path, model_text);
      nlohmann::json mj;
      try {
        mj = nlohmann::json::parse(model_text);
      } catch (const nlohmann::json::parse_error& e) {
        throw IoError("model file: " + std::string(e.what()));
      }
      const TrainedClassifier clf = classifier_from_json(mj);
      if (data.dim() != (clf.ovr.models.empty() ? 0 : clf.ovr.models.front().dim))
        throw DimensionMismatch("evaluate: feature dimension differs from the model");
      std::vector<int> ids = clf.ovr.class_ids;
      std::sort(ids.begin(), ids.end());
      std::vector<std::vector<std::size_t>> confusion(ids.size(), std::vector<std::size_t>(ids.size(), 0));
      std::size_t hits = 0, unknown = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const int pred = clf.predict(data.x.row(i));
        hits += pred == data.labels[i];
        const auto t = std::find(ids.begin(), ids.end(), data.labels[i]);
        const auto p = std::find(ids.begin(), ids.end(), pred);
        if (t == ids.end()) {
          ++unknown;
          continue;
        }
        ++confusion[t - ids.begin()][p - ids.begin()];
      }
      const double acc = data.size() ? static_cast<double>(hits) / data.size() : 0.0;
      j["mode"] = "model";
      j["accuracy"] = acc;
      j["class_ids"] = ids;
      j["confusion"] = confusion;
      j["unknown_labels"] = unknown;
      std::cout << "accuracy " << format_double(acc) << "\n";
    } else {
      const FoldAssignment folds = stratified_kfold(data.labels, s.cfg.sweep.folds, s.cfg.sweep.fold_seed);
      const GridSearchResult gs = grid_search(data, s.cfg.sweep.grid, folds, s.cfg.sweep.options);
      SvmHyperParams hp{gs.best_c, gs.best_gamma, s.cfg.sweep.options.tol, s.cfg.sweep.options.max_passes};
      const CrossValReport cv = cross_val_report(data, hp, folds, s.cfg.sweep.options);
      j["mode"] = "cross_validation";
      j["notes"] = {"Hyperparameters are chosen on the same folds that produce the reported accuracy (no nested "
                    "cross-validation), so accuracies are optimistically biased."};
      j["best_c"] = gs.best_c;
      j["best_gamma"] = gs.best_gamma;
      j["grid_accuracy"] = gs.accuracy;
      j["cross_validation"] = to_json(cv);
      std::cout << "cv accuracy " << format_double(cv.mean_accuracy) << " at C=" << format_double(gs.best_c)
                << " gamma=" << format_double(gs.best_gamma) << "\n";
    }
    emit(s, m, "evaluation_" + stem_of(in) + ".json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  });
}

inline void cmd_experiment(const Session& s) {
  with_manifest(s, "experiment", [&](Manifest& m) {
    EvalReport report;
    report.task = s.cfg.task;
    report.rig_seed = s.cfg.sweep.rig.seed;
    report.fold_seed = s.cfg.sweep.fold_seed;
    report.config_digest = s.digest;
    for (int level : s.cfg.sweep.levels) {
      report.levels.push_back(evaluate_level(s.cfg.sweep, level));
      const LevelResult& r = report.levels.back();
      const std::string suffix = "_level" + std::to_string(level) + ".csv";
      emit(s, m, "confusion" + suffix, [&](std::ostream& os) { write_confusion_csv(os, r.cv, s.stamp()); });
      emit(s, m, "projection" + suffix,
           [&](std::ostream& os) { write_projection_csv(os, r.projection, r.labels, s.stamp()); });
      std::cout << level_name(level) << ": accuracy " << format_double(r.cv.mean_accuracy) << ", J "
                << format_double(r.j_value) << "\n";
    }
    add_level_tests(report);
    emit(s, m, "report.json", [&](std::ostream& os) { os << to_json(report).dump(2) << '\n'; });
    emit(s, m, "accuracy_vs_level.csv", [&](std::ostream& os) { write_accuracy_csv(os, report, s.stamp()); });
    emit(s, m, "j_vs_level.csv", [&](std::ostream& os) { write_j_csv(os, report, s.stamp()); });
  });
}

// ---- entry point -----------------------------------------------------------------

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return kExitConfig;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kExitIo;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  return kExitFailure;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Vibration-injection tactile perception: simulation, features and evaluation"};
  app.require_subcommand(1);
  CommonOptions common;
  std::string in_path, model_path;
  SvmHyperParams hp;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Experiment config file (JSON)");
    sub->add_option("--task", common.task, "Built-in task")->check(CLI::IsMember({"grit", "gap"}));
    sub->add_option("--levels", common.levels, "Vibration levels (0-6)")->expected(1, -1);
    sub->add_option("--seed", common.seed, "Rig seed");
    sub->add_option("--jobs", common.jobs, "Worker threads; results do not depend on it");
    sub->add_option("--out", common.out, "Output directory");
  };
  auto* simulate = app.add_subcommand("simulate", "Write one trace CSV per level");
  auto* features = app.add_subcommand("features", "Trace CSV to 515-column feature CSV");
  auto* fisher = app.add_subcommand("fisher", "Fisher separation J(W*) and 3-D projection");
  auto* train = app.add_subcommand("train", "Train a one-vs-rest RBF SVM");
  auto* evaluate = app.add_subcommand("evaluate", "Score a model, or cross-validate with grid search");
  auto* experiment = app.add_subcommand("experiment", "Full level sweep with report and plot data");
  for (auto* sub : {simulate, features, fisher, train, evaluate, experiment}) add_common(sub);
  for (auto* sub : {features, fisher, train, evaluate})
    sub->add_option("--in", in_path, "Input CSV")->required();
  train->add_option("--c", hp.c, "Soft-margin penalty")->required();
  train->add_option("--gamma", hp.gamma, "RBF width")->required();
  train->add_flag("--no-standardize", common.no_standardize, "Skip per-feature z-scoring");
  evaluate->add_option("--model", model_path, "Model JSON from train");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    Session s = open_session(common);
    if (*simulate) cmd_simulate(s);
    if (*features) cmd_features(s, in_path);
    if (*fisher) cmd_fisher(s, in_path);
    if (*train) {
      hp.tol = s.cfg.sweep.options.tol;
      hp.max_passes = s.cfg.sweep.options.max_passes;
      validate(hp);
      cmd_train(s, in_path, hp);
    }
    if (*evaluate) cmd_evaluate(s, in_path, model_path);
    if (*experiment) cmd_experiment(s);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace vibtac
