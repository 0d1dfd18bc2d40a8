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

#ifndef GHZSIM_SOURCE_MODEL_H
#define GHZSIM_SOURCE_MODEL_H

#include "ghzsim/quantum_state.h"

namespace ghzsim {

/// Spectral width of the signal and idler photons (Doppler broadening).
inline constexpr double kDopplerLinewidthHz = 540e6;

/// Intensity decay time 1/(2 pi dnu) of a Lorentzian line of FWHM `linewidth_hz`.
double coherence_time_from_linewidth(double linewidth_hz);

/// One polarization-entangled pair source. All quantities are SI.
struct SourceParams {
    double pair_rate = 1.125e7;  // pairs/s
    double arm_efficiency = 0.04;
    double dark_rate = 500;  // counts/s per detector; not a measured value
    double werner_p = 0.93;
    double coherence_time = coherence_time_from_linewidth(kDopplerLinewidthHz);  // s
    double bell_phase = 0;  // rad

    /// Throws InputError when an invariant is violated.
    void validate() const;
    bool operator==(const SourceParams &) const = default;
};

/// Isotropic (Werner) admixture: p |Phi><Phi| + (1 - p) I/4.
struct PairNoiseModel {
    double p = 1;
};

/// Overlap between photons from the two sources.
struct Indistinguishability {
    double xi = 1;
};

enum class HomShape { kExponential, kGaussian };

/// p |Phi(phase)><Phi(phase)| + (1 - p) I/4 with |Phi(phase)> = (|HH> + e^{i phase}|VV>)/sqrt(2).
DensityMatrix pair_state(PairNoiseModel noise, double phase = 0);

/// Probability that signal and idler both pass linear polarizers at the given angles.
double fringe_probability(const DensityMatrix &pair, double theta_signal, double theta_idler);

/// Density of the idler delay after the signal: (1/tc) exp(-tau/tc) for tau >= 0.
double temporal_waveform(double tau, const SourceParams &params);

/// Two-photon interference weight at relative delay `dt`:
/// xi exp(-2|dt|/tc), or xi exp(-2 dt^2/tc^2) for the Gaussian variant.
double hom_envelope(double dt, Indistinguishability xi, double tc, HomShape shape = HomShape::kExponential);

struct DerivedRates {
    double pair_rate;
    double arm_efficiency;
};

/// Inverts singles = eta R and pairs = eta^2 R for (R, eta).
DerivedRates derive_rates(double singles, double pairs);

/// CDF of the measured idler-minus-signal delay: exponential waveform
/// convolved with zero-mean Gaussian timing noise of width `sigma`.
double pair_delay_cdf(double x, double tc, double sigma);

}  // namespace ghzsim

#endif
