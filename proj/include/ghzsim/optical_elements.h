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

#ifndef GHZSIM_OPTICAL_ELEMENTS_H
#define GHZSIM_OPTICAL_ELEMENTS_H

#include <optional>
#include <span>
#include <vector>

#include "ghzsim/quantum_state.h"
#include "json.hpp"

namespace ghzsim {

/// Maps any angle onto [0, pi).
double normalize_angle(double radians);

double deg_to_rad(double degrees);
double rad_to_deg(double radians);

/// Fast-axis-from-H Jones matrices. The slow axis picks up the retardance,
/// so hwp_operator(0) maps |V> to -|V> and qwp_operator(0) maps |V> to i|V>.
Operator hwp_operator(double theta);
Operator qwp_operator(double theta);
/// |theta><theta| with |theta> = cos(theta)|H> + sin(theta)|V>.
Operator polarizer_projector(double theta);

enum class PlateKind { kHalf, kQuarter };

struct WaveplateSetting {
    PlateKind kind;
    double angle;  // radians in [0, pi)

    static WaveplateSetting half(double radians);
    static WaveplateSetting quarter(double radians);
    Operator jones() const;
};

/// Optional QWP, then optional HWP, then a polarizer, in propagation order.
struct PhotonAnalyzer {
    std::optional<double> qwp;  // radians
    std::optional<double> hwp;  // radians
    double pol = 0;             // radians

    static PhotonAnalyzer polarizer(double radians) {
        return PhotonAnalyzer{std::nullopt, std::nullopt, radians};
    }
    bool operator==(const PhotonAnalyzer &) const = default;
};

struct AnalyzerSetting {
    std::vector<PhotonAnalyzer> photons;

    bool operator==(const AnalyzerSetting &) const = default;
};

/// Kraus filter of one analyzer arm: P(pol) * HWP(hwp) * QWP(qwp).
Operator analyzer_kraus(const PhotonAnalyzer &a);
/// The arm's POVM element K^dagger K (a rank-1 projector).
Operator analyzer_effect(const PhotonAnalyzer &a);
/// Per-photon Kraus filters; their tensor product is a valid filter.
std::vector<Operator> analyzer_channel(const AnalyzerSetting &setting);
/// Tensor product of the per-photon filters.
Operator analyzer_filter(const AnalyzerSetting &setting);

/// Projector onto span{|H>_a|H>_b, |V>_a|V>_b} (identity elsewhere) on n photons.
/// Photon indices are 0-based, photon 1 is index 0.
Operator pbs_projector(size_t num_photons, size_t mode_a, size_t mode_b);

/// Post-selection on one photon per PBS output port.
///
/// Photons `mode_a` and `mode_b` enter the two inputs of a PBS that transmits
/// H and reflects V; keeping only events with one photon in each output
/// leaves the same-polarization terms. `coherence` in [0, 1] scales the
/// HH/VV cross terms to model partially distinguishable photons; 1 is the
/// ideal projector. Output modes keep the labels of the input photons.
ChannelOutcome pbs_postselect(const DensityMatrix &rho, size_t mode_a, size_t mode_b, double coherence = 1.0);

/// JSON list of {qwp?, hwp?, pol} objects in degrees.
nlohmann::json to_json(const AnalyzerSetting &setting);
AnalyzerSetting analyzer_from_json(const nlohmann::json &j);

}  // namespace ghzsim

#endif
