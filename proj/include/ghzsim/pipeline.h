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

#ifndef GHZSIM_PIPELINE_H
#define GHZSIM_PIPELINE_H

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ghzsim/coincidence.h"
#include "ghzsim/config.h"
#include "ghzsim/tomography.h"

namespace ghzsim {

/// Seed of run `index` within a named batch of runs.
enum class Batch : uint64_t { kFig2 = 1, kHomPeak, kHomDip, kCalibration, kTomography, kBootstrap };
uint64_t batch_seed(uint64_t seed, Batch batch, uint64_t index);

/// Streams a run through a fourfold counter without holding its tags.
uint64_t fourfold_count(const RunConfig &run, double window);

/// Runs of a batch: fourfold mode, the given analyzers and duration.
RunConfig batch_run(const ExperimentConfig &cfg, const AnalyzerSetting &analyzers, double duration, uint64_t seed);

/// Four-photon state the detection model samples interfering pairs from.
DensityMatrix model_state(const RunConfig &run);

struct Fig2Result {
    std::array<uint64_t, 16> counts{};
    double duration = 0;
};

/// The 16 H/V combinations, one run each.
Fig2Result run_fig2(const ExperimentConfig &cfg);

/// Analyzers for the HOM scan: all at 45 degrees, photon 4 at -45 for the dip.
AnalyzerSetting hom_analyzers(HomKind kind);

struct HomCalibration {
    double visibility_at_unit_xi;
    double stderr_value;
    /// Target visibility over the unit-xi visibility; above 1 it is not reachable.
    double xi;
    bool feasible;
};

struct HomResult {
    double xi = 0;
    std::optional<HomCalibration> calibration;
    std::vector<HomPoint> peak;
    std::vector<HomPoint> dip;
    HomFit peak_fit{};
    HomFit dip_fit{};
};

/// Sets xi from a zero-delay run at xi = 1 so that the raw visibility hits the target.
HomCalibration calibrate_xi(const ExperimentConfig &cfg);

/// Peak and dip scans over analysis.hom_delays, calibrating xi first when enabled.
HomResult run_hom(const ExperimentConfig &cfg);

struct TomographyResult {
    std::vector<CountRecord> records;
    Reconstruction reconstruction;
    std::optional<BootstrapResult> bootstrap;
};

/// 256 fourfold runs, or model-state samples when analysis.tomography_shots > 0.
std::vector<CountRecord> tomography_counts(const ExperimentConfig &cfg);

/// MLE plus optional bootstrap with the configured options.
TomographyResult reconstruct(std::span<const CountRecord> records, const ExperimentConfig &cfg);

TomographyResult run_tomography(const ExperimentConfig &cfg);

}  // namespace ghzsim

#endif
