// Copyright 2026 The ghzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ghzsim/config.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ghzsim/errors.h"

using namespace ghzsim;

namespace {

std::string config_error(const std::string &yaml) {
    try {
        parse_config(yaml);
    } catch (const ConfigError &e) {
        return e.what();
    }
    return "accepted";
}

}  // namespace

TEST(config, defaults_hold_experimental_parameters) {
    ExperimentConfig c = default_config();
    EXPECT_NO_THROW(c.validate());
    EXPECT_DOUBLE_EQ(c.run.sources[0].pair_rate, 1.125e7);
    EXPECT_DOUBLE_EQ(c.run.sources[1].arm_efficiency, 0.04);
    EXPECT_DOUBLE_EQ(c.run.sources[0].werner_p, 0.93);
    EXPECT_DOUBLE_EQ(c.run.xi.xi, 0.80);
    EXPECT_DOUBLE_EQ(c.run.jitter_sigma, 400e-12);
    EXPECT_DOUBLE_EQ(c.analysis.window, 2.5e-9);
    EXPECT_DOUBLE_EQ(c.analysis.fig2_duration, 600);
    EXPECT_EQ(c.analysis.hom_delays.size(), 13u);
    EXPECT_EQ(c.analysis.hom_delays[6], 0.0);
    EXPECT_NEAR(c.analysis.hom_delays[12], 10 * c.run.sources[0].coherence_time, 1e-12);
}

TEST(config, emit_parse_emit_is_fixed_point) {
    std::string once = emit_config(default_config());
    std::string twice = emit_config(parse_config(once));
    EXPECT_EQ(once, twice);

    ExperimentConfig c = default_config();
    c.run.seed = 0xFFFFFFFFFFFFFFFFULL;
    c.run.mode = SimulationMode::kFourfold;
    c.run.sources[1].bell_phase = 0.1;
    c.run.sources[0].coherence_time = 1.234567e-10;
    c.run.analyzers = AnalyzerSetting{std::vector<PhotonAnalyzer>(4, PhotonAnalyzer{0.3, std::nullopt, 1.1})};
    c.analysis.tomography_shots = 12345;
    c.output_dir = "results dir";
    std::string a = emit_config(c);
    ExperimentConfig back = parse_config(a);
    EXPECT_EQ(emit_config(back), a);
    EXPECT_EQ(back.run.seed, c.run.seed);
    EXPECT_EQ(back.run.mode, SimulationMode::kFourfold);
    EXPECT_EQ(back.output_dir, "results dir");
    EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(config, partial_config_overrides_defaults) {
    ExperimentConfig c = parse_config(R"(
run:
  duration_s: 2.5
  seed: 99
  pbs: false
indistinguishability:
  xi: 1
analysis:
  window_ps: 3000
  hom_delays_ps: [-100, 0, 100]
)");
    EXPECT_DOUBLE_EQ(c.run.duration, 2.5);
    EXPECT_EQ(c.run.seed, 99u);
    EXPECT_FALSE(c.run.pbs);
    EXPECT_DOUBLE_EQ(c.run.xi.xi, 1);
    EXPECT_DOUBLE_EQ(c.analysis.window, 3e-9);
    EXPECT_DOUBLE_EQ(c.run.fourfold_window, 3e-9);
    ASSERT_EQ(c.analysis.hom_delays.size(), 3u);
    EXPECT_DOUBLE_EQ(c.analysis.hom_delays[0], -100e-12);
    EXPECT_DOUBLE_EQ(c.run.sources[0].werner_p, 0.93);
}

TEST(config, analyzers_in_degrees) {
    ExperimentConfig c = parse_config(R"(
analyzers:
  - {pol_deg: 45}
  - {qwp_deg: 45, hwp_deg: 22.5, pol_deg: 0}
  - {pol_deg: 90}
  - {pol_deg: -45}
)");
    ASSERT_TRUE(c.run.analyzers.has_value());
    const auto &p = c.run.analyzers->photons;
    EXPECT_NEAR(p[0].pol, std::numbers::pi / 4, 1e-15);
    EXPECT_NEAR(*p[1].hwp, std::numbers::pi / 8, 1e-15);
    EXPECT_FALSE(p[0].qwp.has_value());
    EXPECT_NEAR(std::remainder(p[3].pol + std::numbers::pi / 4, std::numbers::pi), 0, 1e-15);
    EXPECT_NE(config_error("analyzers:\n  - {pol_deg: 0}\n"), "accepted");
}

TEST(config, unknown_keys_rejected_with_line) {
    std::string e = config_error("run:\n  seed: 3\n  bogus: 1\n");
    EXPECT_NE(e.find("line 3"), std::string::npos) << e;
    EXPECT_NE(e.find("bogus"), std::string::npos) << e;
    EXPECT_NE(config_error("extra: 1\n"), "accepted");
    EXPECT_NE(config_error("sources:\n  - {pair_rate_hz: 1, color: red}\n  - {}\n"), "accepted");
    EXPECT_NE(config_error("analysis:\n  windows_ps: 1\n"), "accepted");
}

TEST(config, invalid_values_rejected) {
    EXPECT_NE(config_error("run:\n  duration_s: 0\n"), "accepted");
    EXPECT_NE(config_error("run:\n  duration_s: abc\n"), "accepted");
    EXPECT_NE(config_error("run:\n  mode: turbo\n"), "accepted");
    EXPECT_NE(config_error("sources:\n  - {}\n"), "accepted");
    EXPECT_NE(config_error("sources:\n  - {werner_p: 2}\n  - {}\n"), "accepted");
    EXPECT_NE(config_error("indistinguishability:\n  xi: 1.5\n"), "accepted");
    EXPECT_NE(config_error("analysis:\n  hom_delays_ps: [0]\n"), "accepted");
    EXPECT_NE(config_error("analysis:\n  bootstrap_resamples: 10\n"), "accepted");
    EXPECT_NE(config_error("run: [1, 2\n"), "accepted");
    EXPECT_EQ(config_error("analysis:\n  bootstrap_resamples: 0\n"), "accepted");
    EXPECT_EQ(config_error(""), "accepted");
}

TEST(config, hash_tracks_content) {
    ExperimentConfig a = default_config();
    ExperimentConfig b = default_config();
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.run.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(config, load_missing_file) {
    EXPECT_THROW(load_config("/nonexistent/ghzsim.yaml"), ConfigError);
}
