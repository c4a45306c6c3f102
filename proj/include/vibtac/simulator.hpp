#pragma once

// Desk-scale stand-in for the vibration-injection rig. Drive noise is low-passed
// at 1100 Hz, shaped by a modal plant (a class-independent body path plus the
// contact modes of the touched object), mixed with robot hum, decimated to the
// sensor rate, corrupted with sensor noise and quantised to the pressure
// resolution.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vibtac/errors.hpp"
#include "vibtac/parallel.hpp"
#include "vibtac/preset_data.hpp"
#include "vibtac/rng.hpp"
#include "vibtac/signal.hpp"

namespace vibtac {

struct Mode {
  double frequency = 0.0;  // Hz
  double damping = 0.0;    // zeta
  double gain = 0.0;       // peak gain of the band-pass resonance
  friend bool operator==(const Mode&, const Mode&) = default;
};

struct ContactClassModel {
  int class_id = 0;
  std::string name;
  std::vector<Mode> modes;
  double contact_coupling = 1.0;
  double pdc_mean = 0.0;  // kPa
  double pdc_std = 0.0;   // kPa
  friend bool operator==(const ContactClassModel&, const ContactClassModel&) = default;
};

struct HumConfig {
  bool enabled = true;
  double fundamental = 50.0;  // Hz
  int harmonics = 3;          // overtones above the fundamental
  double amplitude = 0.0;     // Pa-equivalent at the plant input, fundamental
  double amplitude_jitter = 0.0;  // log-normal sigma of the per-trial amplitude
  friend bool operator==(const HumConfig&, const HumConfig&) = default;
};

struct RigConfig {
  double sim_rate = 22000.0;
  double sensor_rate = kSensorRate;
  double trial_duration = 0.5;
  int trials_per_class = 100;
  double quant_step = kQuantStep;
  HumConfig hum;
  double sensor_noise_std = 1.5 * kQuantStep;
  std::uint64_t seed = 1;
  // calibration of the simulated rig
  double drive_gain = 1.0;         // Pa-equivalent per drive unit
  double settle_time = 0.05;       // s simulated and discarded before each trial
  double anti_alias_cutoff = 1050.0;
  std::vector<Mode> body_modes;    // contact-independent propagation path
  friend bool operator==(const RigConfig&, const RigConfig&) = default;

  std::size_t decimation() const {
    return static_cast<std::size_t>(std::llround(sim_rate / sensor_rate));
  }
  std::size_t trace_length() const {
    return static_cast<std::size_t>(std::llround(trial_duration * sensor_rate));
  }
};

inline void validate_rig(const RigConfig& rig) {
  if (!(rig.sensor_rate > 0.0) || !(rig.sim_rate > 0.0))
    throw ConfigError("rig: rates must be positive");
  const double ratio = rig.sim_rate / rig.sensor_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
    throw ConfigError("rig: sim_rate must be an integer multiple of sensor_rate");
  const double len = rig.trial_duration * rig.sensor_rate;
  if (!(rig.trial_duration > 0.0) || std::abs(len - std::round(len)) > 1e-9)
    throw ConfigError("rig: trial_duration * sensor_rate must be integral");
  if (rig.trials_per_class < 1) throw ConfigError("rig: trials_per_class must be >= 1");
  if (!(rig.quant_step > 0.0)) throw ConfigError("rig: quant_step must be positive");
  if (rig.sensor_noise_std < 0.0) throw ConfigError("rig: sensor_noise_std must be >= 0");
  if (rig.settle_time < 0.0) throw ConfigError("rig: settle_time must be >= 0");
  if (rig.hum.harmonics < 0) throw ConfigError("rig: hum.harmonics must be >= 0");
  if (rig.hum.amplitude < 0.0 || rig.hum.amplitude_jitter < 0.0)
    throw ConfigError("rig: hum amplitude and jitter must be >= 0");
  if (!(rig.anti_alias_cutoff < rig.sensor_rate / 2.0))
    throw ConfigError("rig: anti_alias_cutoff must be below the sensor Nyquist frequency");
}

inline void validate_model(const ContactClassModel& m) {
  const std::string who = "contact model " + std::to_string(m.class_id);
  if (m.modes.size() < 2) throw ConfigError(who + ": needs at least 2 modes");
  for (std::size_t i = 0; i < m.modes.size(); ++i) {
    const Mode& md = m.modes[i];
    if (!(md.frequency >= 10.0 && md.frequency <= 1040.0))
      throw ConfigError(who + ": mode frequency outside [10, 1040] Hz");
    if (!(md.damping > 0.0 && md.damping <= 0.5))
      throw ConfigError(who + ": damping ratio outside (0, 0.5]");
    if (!std::isfinite(md.gain)) throw ConfigError(who + ": non-finite mode gain");
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(m.modes[j].frequency - md.frequency) < 10.0)
        throw ConfigError(who + ": mode frequencies closer than 10 Hz");
    }
  }
  if (!(m.contact_coupling >= 0.0) || !std::isfinite(m.contact_coupling))
    throw ConfigError(who + ": contact_coupling must be finite and >= 0");
  if (!(m.pdc_std >= 0.0)) throw ConfigError(who + ": pdc_std must be >= 0");
}

// y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1] - a2 y[n-2]
struct Resonator {
  double b0 = 0.0, b1 = 0.0, a1 = 0.0, a2 = 0.0;
  double pole_radius = 0.0;
};

// Impulse-invariant discretisation of g * 2 zeta w s / (s^2 + 2 zeta w s + w^2),
// a band-pass resonance with peak gain g at w.
inline Resonator make_resonator(const Mode& mode, double sample_rate) {
  if (!(mode.frequency > 0.0 && mode.frequency < sample_rate / 2.0))
    throw InvalidArgument("resonator frequency must lie in (0, Nyquist)");
  if (!(mode.damping < 1.0)) throw InvalidArgument("resonator damping must be below 1");
  const double t = 1.0 / sample_rate;
  const double wn = 2.0 * std::numbers::pi * mode.frequency;
  const double sigma = mode.damping * wn;
  const double wd = wn * std::sqrt(1.0 - mode.damping * mode.damping);
  const double r = std::exp(-sigma * t);
  if (!(r < 1.0)) {
    throw UnstableMode("mode at " + std::to_string(mode.frequency) +
                       " Hz maps to pole radius >= 1 (damping " + std::to_string(mode.damping) + ")");
  }
  const double theta = wd * t;
  const double k = 2.0 * sigma * mode.gain * t;
  Resonator res;
  res.b0 = k;
  res.b1 = -k * r * (std::cos(theta) + (sigma / wd) * std::sin(theta));
  res.a1 = -2.0 * r * std::cos(theta);
  res.a2 = r * r;
  res.pole_radius = r;
  return res;
}

// Parallel bank of band-pass resonators (modal superposition) times a gain.
class Plant {
 public:
  Plant() = default;
  Plant(std::vector<Resonator> sections, double gain) : sections_(std::move(sections)), gain_(gain) {}

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(x.size(), 0.0);
    if (gain_ == 0.0) return y;
    for (const Resonator& s : sections_) {
      double x1 = 0.0, y1 = 0.0, y2 = 0.0;
      for (std::size_t n = 0; n < x.size(); ++n) {
        const double out = s.b0 * x[n] + s.b1 * x1 - s.a1 * y1 - s.a2 * y2;
        x1 = x[n];
        y2 = y1;
        y1 = out;
        y[n] += out;
      }
    }
    for (double& v : y) v *= gain_;
    return y;
  }

  const std::vector<Resonator>& sections() const { return sections_; }
  double gain() const { return gain_; }

 private:
  std::vector<Resonator> sections_;
  double gain_ = 0.0;
};

inline Plant build_plant(const ContactClassModel& model, double sim_rate) {
  std::vector<Resonator> sections;
  sections.reserve(model.modes.size());
  for (const Mode& m : model.modes) sections.push_back(make_resonator(m, sim_rate));
  return Plant(std::move(sections), model.contact_coupling);
}

inline Plant build_body_plant(const RigConfig& rig) {
  std::vector<Resonator> sections;
  for (const Mode& m : rig.body_modes) sections.push_back(make_resonator(m, rig.sim_rate));
  return Plant(std::move(sections), sections.empty() ? 0.0 : 1.0);
}

namespace detail {
enum class Stream : std::uint64_t { Excitation = 1, Hum = 2, SensorNoise = 3, Pdc = 4 };
inline std::uint64_t stream_seed(std::uint64_t trial_seed, Stream s) {
  return derive_seed(trial_seed, {static_cast<std::uint64_t>(s)});
}
}  // namespace detail

// Rig-level state shared by every trial (filter taps, body path).
class TrialSimulator {
 public:
  explicit TrialSimulator(RigConfig rig) : rig_(std::move(rig)) {
    validate_rig(rig_);
    excitation_taps_ = design_lowpass(kExcitationCutoff, rig_.sim_rate);
    anti_alias_taps_ = design_lowpass(rig_.anti_alias_cutoff, rig_.sim_rate);
    body_ = build_body_plant(rig_);
  }

  const RigConfig& rig() const { return rig_; }

  SensorTrace simulate(const ContactClassModel& model, const Plant& contact, int level,
                       std::uint64_t seed) const {
    const double intensity = level_intensity_db(level);
    const std::size_t factor = rig_.decimation();
    const std::size_t length = rig_.trace_length();
    const std::size_t settle =
        static_cast<std::size_t>(std::llround(rig_.settle_time * rig_.sensor_rate)) * factor;
    const std::size_t tail = anti_alias_taps_.size();
    const std::size_t n_sim = settle + length * factor + tail;

    ExcitationSignal drive = gen_gaussian_noise(intensity, n_sim, rig_.sim_rate,
                                                detail::stream_seed(seed, detail::Stream::Excitation));
    drive = lowpass_fir(drive, kExcitationCutoff);
    std::vector<double> input = std::move(drive.samples);
    for (double& v : input) v *= rig_.drive_gain;

    if (rig_.hum.enabled && rig_.hum.amplitude > 0.0) {
      SplitMix64 rng(detail::stream_seed(seed, detail::Stream::Hum));
      const double jitter = std::exp(rig_.hum.amplitude_jitter * rng.gaussian());
      for (int h = 1; h <= rig_.hum.harmonics + 1; ++h) {
        const double freq = rig_.hum.fundamental * h;
        if (freq >= rig_.sim_rate / 2.0) break;
        const double amp = rig_.hum.amplitude * jitter / h;
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        const double w = 2.0 * std::numbers::pi * freq / rig_.sim_rate;
        for (std::size_t n = 0; n < n_sim; ++n) input[n] += amp * std::sin(w * static_cast<double>(n) + phase);
      }
    }

    std::vector<double> response = body_.apply(input);
    const std::vector<double> through_contact = contact.apply(input);
    for (std::size_t n = 0; n < n_sim; ++n) response[n] += through_contact[n];

    SensorTrace trace;
    trace.samples = fir_decimate(response, anti_alias_taps_, factor, settle, length);
    trace.duration = rig_.trial_duration;
    trace.label = model.class_id;
    trace.level = level;

    SplitMix64 noise(detail::stream_seed(seed, detail::Stream::SensorNoise));
    for (double& v : trace.samples) {
      if (rig_.sensor_noise_std > 0.0) v += rig_.sensor_noise_std * noise.gaussian();
      v = std::round(v / rig_.quant_step) * rig_.quant_step;
      if (v == 0.0) v = 0.0;  // no negative zeros in output files
    }
    SplitMix64 pdc(detail::stream_seed(seed, detail::Stream::Pdc));
    trace.pdc = model.pdc_mean + model.pdc_std * pdc.gaussian();
    return trace;
  }

 private:
  RigConfig rig_;
  std::vector<double> excitation_taps_;
  std::vector<double> anti_alias_taps_;
  Plant body_;
};

inline SensorTrace simulate_trial(const ContactClassModel& model, int level, const RigConfig& rig,
                                  std::uint64_t seed) {
  level_intensity_db(level);
  TrialSimulator sim(rig);
  return sim.simulate(model, build_plant(model, rig.sim_rate), level, seed);
}

struct TraceDataset {
  std::vector<SensorTrace> traces;
};

inline std::uint64_t trial_seed(std::uint64_t rig_seed, int level, std::size_t class_index,
                                std::size_t trial) {
  return derive_seed(rig_seed, {static_cast<std::uint64_t>(level), class_index, trial});
}

inline constexpr std::size_t kClassesPerTask = 5;

// trials_per_class traces for each model, shuffled into a seed-determined order.
inline TraceDataset generate_dataset(const std::vector<ContactClassModel>& models,
                                     const RigConfig& rig, int level, unsigned jobs = 1) {
  if (models.size() != kClassesPerTask)
    throw InvalidArgument("generate_dataset: expected exactly 5 contact models");
  level_intensity_db(level);
  for (const auto& m : models) validate_model(m);
  const TrialSimulator sim(rig);
  std::vector<Plant> plants;
  for (const auto& m : models) plants.push_back(build_plant(m, rig.sim_rate));

  const std::size_t per_class = static_cast<std::size_t>(rig.trials_per_class);
  std::vector<std::pair<std::size_t, std::size_t>> jobs_list;
  for (std::size_t c = 0; c < models.size(); ++c)
    for (std::size_t t = 0; t < per_class; ++t) jobs_list.emplace_back(c, t);
  shuffle_in_place(jobs_list, derive_seed(rig.seed, {static_cast<std::uint64_t>(level), 0xC1A55ULL}));

  TraceDataset out;
  out.traces.resize(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
    const auto [c, t] = jobs_list[i];
    out.traces[i] = sim.simulate(models[c], plants[c], level, trial_seed(rig.seed, level, c, t));
  });
  return out;
}

// ---- JSON schema for models and rig settings -------------------------------

namespace detail {
inline void require_known_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                               const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get_as<T>(j, key, where);
}
}  // namespace detail

inline nlohmann::json to_json(const Mode& m) {
  return {{"frequency", m.frequency}, {"damping", m.damping}, {"gain", m.gain}};
}

inline Mode mode_from_json(const nlohmann::json& j, const std::string& where) {
  detail::require_known_keys(j, {"frequency", "damping", "gain"}, where);
  return {detail::get_as<double>(j, "frequency", where), detail::get_as<double>(j, "damping", where),
          detail::get_as<double>(j, "gain", where)};
}

inline std::vector<Mode> modes_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of modes");
  std::vector<Mode> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(mode_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline nlohmann::json to_json(const ContactClassModel& m) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& md : m.modes) modes.push_back(to_json(md));
  return {{"class_id", m.class_id},       {"name", m.name},         {"modes", modes},
          {"contact_coupling", m.contact_coupling}, {"pdc_mean", m.pdc_mean}, {"pdc_std", m.pdc_std}};
}

inline ContactClassModel model_from_json(const nlohmann::json& j, const std::string& where) {
  detail::require_known_keys(j, {"class_id", "name", "modes", "contact_coupling", "pdc_mean", "pdc_std"},
                             where);
  ContactClassModel m;
  m.class_id = detail::get_as<int>(j, "class_id", where);
  detail::read_optional(j, "name", m.name, where);
  m.modes = modes_from_json(j.at("modes"), where + ".modes");
  m.contact_coupling = detail::get_as<double>(j, "contact_coupling", where);
  m.pdc_mean = detail::get_as<double>(j, "pdc_mean", where);
  m.pdc_std = detail::get_as<double>(j, "pdc_std", where);
  validate_model(m);
  return m;
}

inline std::vector<ContactClassModel> models_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of contact models");
  std::vector<ContactClassModel> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(model_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline nlohmann::json to_json(const RigConfig& r) {
  nlohmann::json body = nlohmann::json::array();
  for (const auto& m : r.body_modes) body.push_back(to_json(m));
  return {{"sim_rate", r.sim_rate},
          {"sensor_rate", r.sensor_rate},
          {"trial_duration", r.trial_duration},
          {"trials_per_class", r.trials_per_class},
          {"quant_step", r.quant_step},
          {"hum",
           {{"enabled", r.hum.enabled},
            {"fundamental", r.hum.fundamental},
            {"harmonics", r.hum.harmonics},
            {"amplitude", r.hum.amplitude},
            {"amplitude_jitter", r.hum.amplitude_jitter}}},
          {"sensor_noise_std", r.sensor_noise_std},
          {"seed", r.seed},
          {"drive_gain", r.drive_gain},
          {"settle_time", r.settle_time},
          {"anti_alias_cutoff", r.anti_alias_cutoff},
          {"body_modes", body}};
}

// Applies the keys present in j on top of base.
inline RigConfig rig_from_json(const nlohmann::json& j, RigConfig base, const std::string& where) {
  detail::require_known_keys(j,
                             {"sim_rate", "sensor_rate", "trial_duration", "trials_per_class",
                              "quant_step", "hum", "sensor_noise_std", "seed", "drive_gain",
                              "settle_time", "anti_alias_cutoff", "body_modes"},
                             where);
  detail::read_optional(j, "sim_rate", base.sim_rate, where);
  detail::read_optional(j, "sensor_rate", base.sensor_rate, where);
  detail::read_optional(j, "trial_duration", base.trial_duration, where);
  detail::read_optional(j, "trials_per_class", base.trials_per_class, where);
  detail::read_optional(j, "quant_step", base.quant_step, where);
  detail::read_optional(j, "sensor_noise_std", base.sensor_noise_std, where);
  detail::read_optional(j, "seed", base.seed, where);
  detail::read_optional(j, "drive_gain", base.drive_gain, where);
  detail::read_optional(j, "settle_time", base.settle_time, where);
  detail::read_optional(j, "anti_alias_cutoff", base.anti_alias_cutoff, where);
  if (j.contains("hum")) {
    const auto& h = j.at("hum");
    const std::string hw = where + ".hum";
    detail::require_known_keys(h, {"enabled", "fundamental", "harmonics", "amplitude", "amplitude_jitter"}, hw);
    detail::read_optional(h, "enabled", base.hum.enabled, hw);
    detail::read_optional(h, "fundamental", base.hum.fundamental, hw);
    detail::read_optional(h, "harmonics", base.hum.harmonics, hw);
    detail::read_optional(h, "amplitude", base.hum.amplitude, hw);
    detail::read_optional(h, "amplitude_jitter", base.hum.amplitude_jitter, hw);
  }
  if (j.contains("body_modes")) base.body_modes = modes_from_json(j.at("body_modes"), where + ".body_modes");
  validate_rig(base);
  return base;
}

// ---- built-in presets -------------------------------------------------------

struct PresetTasks {
  std::vector<ContactClassModel> grit;
  std::vector<ContactClassModel> gap;
};

namespace detail {
inline const nlohmann::json& preset_document() {
  static const nlohmann::json doc = nlohmann::json::parse(kPresetJson);
  return doc;
}
}  // namespace detail

// Calibrated rig defaults (drive gain, hum, body path) from config/presets.json.
inline RigConfig default_rig() {
  return rig_from_json(detail::preset_document().at("rig"), RigConfig{}, "presets.rig");
}

inline PresetTasks preset_tasks() {
  const auto& doc = detail::preset_document();
  return {models_from_json(doc.at("grit"), "presets.grit"), models_from_json(doc.at("gap"), "presets.gap")};
}

}  // namespace vibtac
