#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "vibtac/fft.hpp"
#include "vibtac/simulator.hpp"

using namespace vibtac;

namespace {

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

RigConfig quiet_rig() {
  RigConfig rig = default_rig();
  rig.hum.enabled = false;
  rig.sensor_noise_std = 0.0;
  return rig;
}

ContactClassModel single_mode_model() {
  ContactClassModel m;
  m.class_id = 0;
  m.modes = {{100.0, 0.1, 1.0}, {900.0, 0.1, 0.0}};
  m.contact_coupling = 1.0;
  m.pdc_mean = 10.0;
  m.pdc_std = 1.0;
  return m;
}

}  // namespace

TEST(Plant, SingleModePeakNearNaturalFrequency) {
  const double rate = 22000.0;
  const std::size_t n = 11000;  // 2 Hz bins
  const Plant plant = build_plant(single_mode_model(), rate);
  const FftPlan fft(n);
  std::vector<double> mean_power(n / 2 + 1, 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto drive = gen_gaussian_noise(0.0, n + 4000, rate, 100 + trial).samples;
    const auto full = plant.apply(drive);
    const std::vector<double> tail(full.begin() + 4000, full.end());
    const auto spec = fft.forward_real(tail);
    for (std::size_t k = 0; k < mean_power.size(); ++k) mean_power[k] += std::norm(spec[k]);
  }
  const auto peak = std::max_element(mean_power.begin() + 1, mean_power.end()) - mean_power.begin();
  const double freq = static_cast<double>(peak) * rate / static_cast<double>(n);
  EXPECT_NEAR(freq, 100.0, 4.0);
}

TEST(Plant, ZeroCouplingSilencesOutput) {
  ContactClassModel m = single_mode_model();
  m.contact_coupling = 0.0;
  const auto drive = gen_gaussian_noise(0.0, 5000, 22000, 1).samples;
  for (double v : build_plant(m, 22000).apply(drive)) EXPECT_EQ(v, 0.0);
}

TEST(Plant, Deterministic) {
  const auto drive = gen_gaussian_noise(0.0, 3000, 22000, 2).samples;
  const Plant a = build_plant(single_mode_model(), 22000);
  const Plant b = build_plant(single_mode_model(), 22000);
  EXPECT_EQ(a.apply(drive), b.apply(drive));
}

TEST(Plant, ResonatorPeakGainMatchesModeGain) {
  // steady-state response to a tone at the natural frequency has amplitude ~ gain
  const Resonator r = make_resonator({200.0, 0.05, 2.5}, 22000);
  const Plant p({r}, 1.0);
  std::vector<double> x(44000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * 200.0 * i / 22000.0);
  const auto y = p.apply(x);
  double peak = 0.0;
  for (std::size_t i = 22000; i < y.size(); ++i) peak = std::max(peak, std::abs(y[i]));
  EXPECT_NEAR(peak, 2.5, 0.05);
}

TEST(Plant, UnstableModeRejected) {
  EXPECT_THROW(make_resonator({100.0, 0.0, 1.0}, 22000), UnstableMode);
  EXPECT_THROW(make_resonator({100.0, -0.1, 1.0}, 22000), UnstableMode);
  EXPECT_THROW(make_resonator({12000.0, 0.1, 1.0}, 22000), InvalidArgument);
}

TEST(Plant, PresetImpulseResponsesDecay) {
  const RigConfig rig = default_rig();
  const auto presets = preset_tasks();
  std::vector<Plant> plants = {build_body_plant(rig)};
  for (const auto& m : presets.grit) plants.push_back(build_plant(m, rig.sim_rate));
  for (const auto& m : presets.gap) plants.push_back(build_plant(m, rig.sim_rate));
  const std::size_t n = static_cast<std::size_t>(0.5 * rig.sim_rate);
  for (const Plant& p : plants) {
    for (const Resonator& r : p.sections()) EXPECT_LT(r.pole_radius, 1.0);
    std::vector<double> impulse(n + 200, 0.0);
    impulse[0] = 1.0;
    const auto h = p.apply(impulse);
    double peak = 0.0;
    for (double v : h) peak = std::max(peak, std::abs(v));
    ASSERT_GT(peak, 0.0);
    for (std::size_t i = n; i < h.size(); ++i) EXPECT_LT(std::abs(h[i]), 1e-6 * peak);
  }
}

TEST(Trial, SilentWithoutSources) {
  const RigConfig rig = quiet_rig();
  const auto trace = simulate_trial(preset_tasks().grit[0], 0, rig, 5);
  ASSERT_EQ(trace.samples.size(), 1100u);
  for (double v : trace.samples) EXPECT_EQ(v, 0.0);
}

TEST(Trial, LevelSixOverLevelTwoRmsRatio) {
  const RigConfig rig = quiet_rig();
  const auto model = preset_tasks().gap[2];
  double ratio_sum = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double hi = rms(simulate_trial(model, 6, rig, 1000 + t).samples);
    const double lo = rms(simulate_trial(model, 2, rig, 1000 + t).samples);
    ratio_sum += hi / lo;
  }
  EXPECT_NEAR(ratio_sum / 20.0 / std::pow(10.0, 16.0 / 20.0), 1.0, 0.10);
}

TEST(Trial, HumDominatesLowBandAtLevelZero) {
  RigConfig rig = default_rig();
  rig.sensor_noise_std = 0.0;
  ASSERT_TRUE(rig.hum.enabled);
  std::vector<double> mean_mag(551, 0.0);
  for (int t = 0; t < 20; ++t) {
    const auto spec = power_spectrum(simulate_trial(preset_tasks().grit[1], 0, rig, 300 + t));
    for (std::size_t k = 0; k < spec.size(); ++k) mean_mag[k] += spec[k] * spec[k];
  }
  double low = 0.0, high = 0.0;
  for (std::size_t k = 1; k < mean_mag.size(); ++k) (bin_frequency(k) < 200.0 ? low : high) += mean_mag[k];
  EXPECT_GT(low, high);
  const auto peak = std::max_element(mean_mag.begin() + 1, mean_mag.end()) - mean_mag.begin();
  EXPECT_LT(bin_frequency(static_cast<std::size_t>(peak)), 200.0);
}

TEST(Trial, QuantisedAndSized) {
  const RigConfig rig = default_rig();
  for (int level : {0, 3, 6}) {
    const auto trace = simulate_trial(preset_tasks().gap[4], level, rig, 77);
    ASSERT_EQ(trace.samples.size(), 1100u);
    EXPECT_DOUBLE_EQ(trace.duration, 0.5);
    for (double v : trace.samples) {
      const double q = v / 0.37;
      EXPECT_NEAR(q, std::round(q), 1e-9);
    }
  }
}

TEST(Trial, RmsNondecreasingInLevel) {
  const RigConfig rig = quiet_rig();
  const auto presets = preset_tasks();
  for (const auto* set : {&presets.grit, &presets.gap}) {
    for (const auto& model : *set) {
      double prev = -1.0;
      for (int level = 0; level <= 6; ++level) {
        double sum = 0.0;
        for (int t = 0; t < 3; ++t) sum += rms(simulate_trial(model, level, rig, 50 + t).samples);
        EXPECT_GE(sum, prev) << "class " << model.class_id << " level " << level;
        prev = sum;
      }
    }
  }
}

TEST(Trial, RejectsBadLevel) {
  EXPECT_THROW(simulate_trial(preset_tasks().grit[0], 7, default_rig(), 1), InvalidArgument);
}

TEST(Dataset, DefaultRigShape) {
  const RigConfig rig = default_rig();
  const auto data = generate_dataset(preset_tasks().grit, rig, 4);
  ASSERT_EQ(data.traces.size(), 500u);
  std::vector<int> counts(5, 0);
  for (const auto& t : data.traces) {
    ++counts.at(static_cast<std::size_t>(t.label));
    EXPECT_EQ(t.level, 4);
    EXPECT_EQ(t.samples.size(), 1100u);
  }
  for (int c : counts) EXPECT_EQ(c, 100);
  // order is shuffled, not grouped by class
  int changes = 0;
  for (std::size_t i = 1; i < data.traces.size(); ++i) changes += data.traces[i].label != data.traces[i - 1].label;
  EXPECT_GT(changes, 200);
}

TEST(Dataset, DeterministicAcrossRunsAndJobs) {
  RigConfig rig = default_rig();
  rig.trials_per_class = 10;
  const auto a = generate_dataset(preset_tasks().gap, rig, 3, 1);
  const auto b = generate_dataset(preset_tasks().gap, rig, 3, 4);
  ASSERT_EQ(a.traces.size(), b.traces.size());
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    EXPECT_EQ(a.traces[i].samples, b.traces[i].samples);
    EXPECT_EQ(a.traces[i].pdc, b.traces[i].pdc);
    EXPECT_EQ(a.traces[i].label, b.traces[i].label);
  }
  rig.seed = 2;
  const auto c = generate_dataset(preset_tasks().gap, rig, 3, 1);
  EXPECT_NE(a.traces[0].samples, c.traces[0].samples);
}

TEST(Dataset, PdcMeansWithinStandardError) {
  const RigConfig rig = default_rig();
  const auto presets = preset_tasks();
  for (const auto* set : {&presets.grit, &presets.gap}) {
    const auto data = generate_dataset(*set, rig, 2);
    for (const auto& model : *set) {
      double s = 0.0;
      int n = 0;
      for (const auto& t : data.traces)
        if (t.label == model.class_id) {
          s += t.pdc;
          ++n;
        }
      EXPECT_LT(std::abs(s / n - model.pdc_mean), 3.0 * model.pdc_std / std::sqrt(100.0));
    }
  }
}

TEST(Dataset, RequiresFiveModels) {
  auto models = preset_tasks().grit;
  models.pop_back();
  EXPECT_THROW(generate_dataset(models, default_rig(), 1), InvalidArgument);
}

TEST(Presets, PressureValues) {
  const auto presets = preset_tasks();
  ASSERT_EQ(presets.grit.size(), 5u);
  ASSERT_EQ(presets.gap.size(), 5u);
  for (const auto& m : presets.grit) {
    EXPECT_DOUBLE_EQ(m.pdc_mean, 10.06);
    EXPECT_DOUBLE_EQ(m.pdc_std, 0.77);
  }
  for (const auto& m : presets.gap) {
    EXPECT_DOUBLE_EQ(m.pdc_mean, 14.36);
    EXPECT_DOUBLE_EQ(m.pdc_std, 1.51);
  }
}

TEST(Presets, ModesInBandAndStructured) {
  const auto presets = preset_tasks();
  for (const auto* set : {&presets.grit, &presets.gap})
    for (std::size_t c = 0; c < set->size(); ++c) {
      EXPECT_EQ((*set)[c].class_id, static_cast<int>(c));
      EXPECT_NO_THROW(validate_model((*set)[c]));
      for (const auto& md : (*set)[c].modes) {
        EXPECT_GE(md.frequency, 10.0);
        EXPECT_LT(md.frequency, 1040.0);
      }
    }
  // grit classes share frequencies and differ in gains; gap classes differ in frequencies
  for (std::size_t c = 1; c < 5; ++c) {
    for (std::size_t i = 0; i < presets.grit[0].modes.size(); ++i)
      EXPECT_EQ(presets.grit[c].modes[i].frequency, presets.grit[0].modes[i].frequency);
    EXPECT_NE(presets.grit[c].modes, presets.grit[0].modes);
    EXPECT_NE(presets.gap[c].modes[0].frequency, presets.gap[0].modes[0].frequency);
  }
}

TEST(Validation, RejectsBadModelsAndRigs) {
  ContactClassModel m = single_mode_model();
  m.modes.pop_back();
  EXPECT_THROW(validate_model(m), ConfigError);
  m = single_mode_model();
  m.modes[1].frequency = 105.0;
  EXPECT_THROW(validate_model(m), ConfigError);
  m = single_mode_model();
  m.modes[0].damping = 0.6;
  EXPECT_THROW(validate_model(m), ConfigError);
  m = single_mode_model();
  m.modes[0].frequency = 1500.0;
  EXPECT_THROW(validate_model(m), ConfigError);

  RigConfig rig = default_rig();
  rig.sim_rate = 23000.0;
  EXPECT_THROW(validate_rig(rig), ConfigError);
  rig = default_rig();
  rig.trial_duration = 0.50025;
  EXPECT_THROW(validate_rig(rig), ConfigError);
}

TEST(Json, ModelRoundTripAndUnknownKeys) {
  const auto m = preset_tasks().gap[3];
  EXPECT_EQ(model_from_json(to_json(m), "m"), m);
  auto j = to_json(m);
  j["colour"] = "red";
  EXPECT_THROW(model_from_json(j, "m"), ConfigError);
}

TEST(Json, RigOverridesApplyOnTopOfBase) {
  const RigConfig base = default_rig();
  EXPECT_EQ(rig_from_json(to_json(base), RigConfig{}, "rig"), base);
  const RigConfig r = rig_from_json({{"trials_per_class", 20}, {"hum", {{"enabled", false}}}}, base, "rig");
  EXPECT_EQ(r.trials_per_class, 20);
  EXPECT_FALSE(r.hum.enabled);
  EXPECT_EQ(r.hum.fundamental, base.hum.fundamental);
  EXPECT_THROW(rig_from_json({{"hum", {{"loud", true}}}}, base, "rig"), ConfigError);
  EXPECT_THROW(rig_from_json({{"sim_rate", "fast"}}, base, "rig"), ConfigError);
}

TEST(PreliminaryExperiment, ContactChangesSpectrum) {
  RigConfig rig = default_rig();
  const auto contact = preset_tasks().grit[2];
  ContactClassModel none = contact;
  none.contact_coupling = 0.0;
  auto mean_and_std = [&](const ContactClassModel& m) {
    std::vector<std::vector<double>> rows;
    for (int t = 0; t < 40; ++t) rows.push_back(extract_features(simulate_trial(m, 6, rig, 900 + t)).values);
    std::vector<double> mean(515, 0.0), sd(515, 0.0);
    for (const auto& r : rows)
      for (std::size_t i = 0; i < 515; ++i) mean[i] += r[i] / rows.size();
    for (const auto& r : rows)
      for (std::size_t i = 0; i < 515; ++i) sd[i] += (r[i] - mean[i]) * (r[i] - mean[i]) / (rows.size() - 1.0);
    double avg_sd = 0.0;
    for (double v : sd) avg_sd += std::sqrt(v) / 515.0;
    return std::pair{mean, avg_sd};
  };
  const auto [m1, s1] = mean_and_std(contact);
  const auto [m0, s0] = mean_and_std(none);
  double dist = 0.0;
  for (std::size_t i = 0; i < 515; ++i) dist += (m1[i] - m0[i]) * (m1[i] - m0[i]);
  dist = std::sqrt(dist);
  EXPECT_GT(dist, 5.0 * 0.5 * (s0 + s1));
}
