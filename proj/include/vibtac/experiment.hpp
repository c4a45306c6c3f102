#pragma once

// Experiment configuration file.
//
// {
//   "format": "vibtac-config", "version": 1,
//   "task": "grit" | "gap" | "custom",
//   "models_file": "models.json",          custom only: {"models": [...5 models...]}
//   "levels": [0, 1, 2, 3, 4, 5, 6],
//   "rig": { ...RigConfig overrides... },
//   "ridge_scale": 1e-3, "d_prime": 3, "folds": 10,
//   "svm": {"c_grid": [...], "gamma_grid": [...], "tol": 1e-3, "max_passes": 0,
//           "standardize": true, "warm_start": true},
//   "seeds": {"rig": 1, "folds": 7},
//   "output_dir": "out"
// }
//
// Every key is optional except the header. Relative models_file paths resolve
// against the config file's directory.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vibtac/eval.hpp"
#include "vibtac/io.hpp"
#include "vibtac/simulator.hpp"

namespace vibtac {

inline constexpr const char* kConfigFormat = "vibtac-config";
inline constexpr int kConfigVersion = 1;

struct ExperimentConfig {
  std::string task = "grit";
  std::string models_file;
  SweepConfig sweep;
  std::string output_dir = "out";
};

inline void validate_levels(const std::vector<int>& levels) {
  if (levels.empty()) throw ConfigError("levels: at least one level is required");
  for (int l : levels)
    if (l < 0 || l > 6) throw ConfigError("levels: level " + std::to_string(l) + " outside 0..6");
  for (std::size_t i = 0; i < levels.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (levels[i] == levels[j]) throw ConfigError("levels: level " + std::to_string(levels[i]) + " repeated");
}

inline std::vector<ContactClassModel> load_models_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) throw ConfigError("models_file: '" + p.string() + "' not found");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("models_file: " + std::string(e.what()));
  }
  detail::require_known_keys(doc, {"format", "version", "models"}, "models_file");
  auto models = models_from_json(doc.at("models"), "models_file.models");
  if (models.size() != kClassesPerTask)
    throw ConfigError("models_file: expected " + std::to_string(kClassesPerTask) + " contact models, found " +
                      std::to_string(models.size()));
  return models;
}

inline void apply_task(ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  if (cfg.task == "grit") {
    cfg.sweep.models = preset_tasks().grit;
  } else if (cfg.task == "gap") {
    cfg.sweep.models = preset_tasks().gap;
  } else if (cfg.task == "custom") {
    if (cfg.models_file.empty()) throw ConfigError("task 'custom' requires models_file");
    std::filesystem::path p = cfg.models_file;
    if (p.is_relative()) p = base_dir / p;
    cfg.sweep.models = load_models_file(p);
  } else {
    throw ConfigError("task: expected grit, gap or custom, got '" + cfg.task + "'");
  }
  cfg.sweep.task = cfg.task;
}

inline ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.sweep.rig = default_rig();
  apply_task(cfg, {});
  return cfg;
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  using detail::get_as;
  using detail::read_optional;
  const std::string w = "config";
  detail::require_known_keys(j,
                             {"format", "version", "task", "models_file", "levels", "rig", "ridge_scale",
                              "d_prime", "folds", "svm", "seeds", "output_dir"},
                             w);
  if (!j.contains("format") || j.at("format") != kConfigFormat)
    throw ConfigError("config: format must be \"" + std::string(kConfigFormat) + "\"");
  if (!j.contains("version") || j.at("version") != kConfigVersion)
    throw ConfigError("config: unsupported version (expected " + std::to_string(kConfigVersion) + ")");

  ExperimentConfig cfg;
  cfg.sweep.rig = default_rig();
  read_optional(j, "task", cfg.task, w);
  read_optional(j, "models_file", cfg.models_file, w);
  read_optional(j, "levels", cfg.sweep.levels, w);
  read_optional(j, "ridge_scale", cfg.sweep.ridge_scale, w);
  read_optional(j, "d_prime", cfg.sweep.d_prime, w);
  read_optional(j, "folds", cfg.sweep.folds, w);
  read_optional(j, "output_dir", cfg.output_dir, w);
  if (j.contains("rig")) cfg.sweep.rig = rig_from_json(j.at("rig"), cfg.sweep.rig, w + ".rig");
  if (j.contains("svm")) {
    const auto& s = j.at("svm");
    const std::string sw = w + ".svm";
    detail::require_known_keys(s, {"c_grid", "gamma_grid", "tol", "max_passes", "standardize", "warm_start"}, sw);
    read_optional(s, "c_grid", cfg.sweep.grid.c_values, sw);
    read_optional(s, "gamma_grid", cfg.sweep.grid.gamma_values, sw);
    read_optional(s, "tol", cfg.sweep.options.tol, sw);
    read_optional(s, "max_passes", cfg.sweep.options.max_passes, sw);
    read_optional(s, "standardize", cfg.sweep.options.standardize, sw);
    read_optional(s, "warm_start", cfg.sweep.options.warm_start, sw);
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    detail::require_known_keys(s, {"rig", "folds"}, w + ".seeds");
    read_optional(s, "rig", cfg.sweep.rig.seed, w + ".seeds");
    read_optional(s, "folds", cfg.sweep.fold_seed, w + ".seeds");
  }
  apply_task(cfg, base_dir);
  return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) throw ConfigError("config file '" + p.string() + "' not found");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + p.string() + "': " + e.what());
  }
  return experiment_from_json(doc, p.parent_path());
}

inline void validate_experiment(const ExperimentConfig& cfg) {
  validate_levels(cfg.sweep.levels);
  validate_rig(cfg.sweep.rig);
  if (cfg.sweep.models.size() != kClassesPerTask) throw ConfigError("task needs exactly 5 contact models");
  for (const auto& m : cfg.sweep.models) validate_model(m);
  if (!(cfg.sweep.ridge_scale >= 0.0) || !std::isfinite(cfg.sweep.ridge_scale))
    throw ConfigError("ridge_scale must be a finite value >= 0");
  if (cfg.sweep.d_prime < 1 || cfg.sweep.d_prime > kFeatureCount) throw ConfigError("d_prime must be in 1..515");
  if (cfg.sweep.folds < 2) throw ConfigError("folds must be at least 2");
  const auto positive = [](const std::vector<double>& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("svm.") + name + " must not be empty");
    for (double x : v)
      if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string("svm.") + name + " entries must be > 0");
  };
  positive(cfg.sweep.grid.c_values, "c_grid");
  positive(cfg.sweep.grid.gamma_values, "gamma_grid");
  if (!(cfg.sweep.options.tol > 0.0)) throw ConfigError("svm.tol must be > 0");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

// Resolved settings that determine results. The output directory and the
// worker count are excluded: neither changes any number.
inline nlohmann::json resolved_json(const ExperimentConfig& cfg) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : cfg.sweep.models) models.push_back(to_json(m));
  return {{"task", cfg.task},
          {"models", models},
          {"levels", cfg.sweep.levels},
          {"rig", to_json(cfg.sweep.rig)},
          {"ridge_scale", cfg.sweep.ridge_scale},
          {"d_prime", cfg.sweep.d_prime},
          {"folds", cfg.sweep.folds},
          {"svm",
           {{"c_grid", cfg.sweep.grid.c_values},
            {"gamma_grid", cfg.sweep.grid.gamma_values},
            {"tol", cfg.sweep.options.tol},
            {"max_passes", cfg.sweep.options.max_passes},
            {"standardize", cfg.sweep.options.standardize},
            {"warm_start", cfg.sweep.options.warm_start}}},
          {"seeds", {{"rig", cfg.sweep.rig.seed}, {"folds", cfg.sweep.fold_seed}}}};
}

inline std::string config_digest(const ExperimentConfig& cfg) {
  const std::string canonical = resolved_json(cfg).dump();
  return hex64(fnv1a(canonical.data(), canonical.size()));
}

}  // namespace vibtac
