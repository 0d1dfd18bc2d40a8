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

#ifndef GHZSIM_CONFIG_H
#define GHZSIM_CONFIG_H

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ghzsim/timetag.h"

namespace ghzsim {

struct AnalysisOptions {
    double window = 2.5e-9;  // s, two- and fourfold coincidence window
    double bin_width = 50e-12;
    double span = 20e-9;                // s, cross-correlation half range
    double background_exclude = 10e-9;  // s, bins beyond this set the flat level
    double g_ss = 2;
    double g_ii = 2;
    double fig2_duration = 600;  // s per basis
    std::vector<double> hom_delays;
    double hom_duration = 10000;  // s per delay
    bool hom_calibrate = true;
    double hom_target_visibility = 0.799;
    double hom_calibration_duration = 100000;  // s per setting
    double tomography_duration = 600;          // s per setting
    uint64_t tomography_shots = 0;             // > 0: sample counts from the model state instead
    int bootstrap_resamples = 100;
    int mle_max_iter = 5000;
    double mle_tol = 1e-10;
    double mle_dilution = 0.5;

    void validate() const;
};

struct ExperimentConfig {
    RunConfig run;
    AnalysisOptions analysis;
    std::string output_dir = "out";

    void validate() const;
};

/// Experimental parameters, with HOM delays of 0, +-0.25, +-0.5, +-1, +-2, +-4 and +-10 coherence times.
ExperimentConfig default_config();

/// Parses YAML text; unknown keys and invalid values raise ConfigError with the line.
ExperimentConfig parse_config(std::string_view yaml);
ExperimentConfig load_config(const std::filesystem::path &path);
/// Emits every field; parse_config(emit_config(c)) reproduces c.
std::string emit_config(const ExperimentConfig &cfg);

/// FNV-1a of the emitted config.
uint64_t config_hash(const ExperimentConfig &cfg);

}  // namespace ghzsim

#endif
