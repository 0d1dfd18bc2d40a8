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

#include "ghzsim/source_model.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ghzsim/errors.h"

namespace ghzsim {

double coherence_time_from_linewidth(double linewidth_hz) {
    if (!(linewidth_hz > 0)) {
        throw InputError("linewidth must be positive");
    }
    return 1.0 / (2 * std::numbers::pi * linewidth_hz);
}

void SourceParams::validate() const {
    if (!(pair_rate >= 0) || !(dark_rate >= 0)) {
        throw InputError("source rates must be nonnegative");
    }
    if (!(arm_efficiency >= 0 && arm_efficiency <= 1)) {
        throw InputError("arm_efficiency must lie in [0, 1]");
    }
    if (!(werner_p >= 0 && werner_p <= 1)) {
        throw InputError("werner_p must lie in [0, 1]");
    }
    if (!(coherence_time > 0) || !std::isfinite(coherence_time)) {
        throw InputError("coherence_time must be positive");
    }
    if (!std::isfinite(bell_phase)) {
        throw InputError("bell_phase must be finite");
    }
}

DensityMatrix pair_state(PairNoiseModel noise, double phase) {
    if (!(noise.p >= 0 && noise.p <= 1)) {
        throw InputError("Werner parameter must lie in [0, 1]");
    }
    CVector phi = CVector::Zero(4);
    phi(0) = M_SQRT1_2;
    phi(3) = M_SQRT1_2 * std::exp(Complex(0, phase));
    CMatrix m = noise.p * (phi * phi.adjoint()) + (1 - noise.p) * CMatrix::Identity(4, 4) / 4.0;
    return DensityMatrix::from_matrix_normalized(std::move(m));
}

double fringe_probability(const DensityMatrix &pair, double theta_signal, double theta_idler) {
    if (pair.dim() != 4) {
        throw InputError("fringe_probability needs a two-photon state");
    }
    CVector s(2);
    s << std::cos(theta_signal), std::sin(theta_signal);
    CVector i(2);
    i << std::cos(theta_idler), std::sin(theta_idler);
    CVector v(4);
    v << s(0) * i(0), s(0) * i(1), s(1) * i(0), s(1) * i(1);
    return std::max(0.0, v.dot(pair.matrix() * v).real());
}

double temporal_waveform(double tau, const SourceParams &params) {
    if (tau < 0) {
        return 0;
    }
    double tc = params.coherence_time;
    return std::exp(-tau / tc) / tc;
}

double hom_envelope(double dt, Indistinguishability xi, double tc, HomShape shape) {
    if (!(tc > 0)) {
        throw InputError("coherence time must be positive");
    }
    if (!(xi.xi >= 0 && xi.xi <= 1)) {
        throw InputError("indistinguishability must lie in [0, 1]");
    }
    double x = dt / tc;
    if (shape == HomShape::kGaussian) {
        return xi.xi * std::exp(-2 * x * x);
    }
    return xi.xi * std::exp(-2 * std::abs(x));
}

DerivedRates derive_rates(double singles, double pairs) {
    if (!(pairs > 0) || !(singles > 0)) {
        throw InputError("rates must be positive");
    }
    if (pairs > singles) {
        throw InputError("pair rate cannot exceed singles rate");
    }
    return DerivedRates{singles * singles / pairs, pairs / singles};
}

double pair_delay_cdf(double x, double tc, double sigma) {
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    if (sigma <= 0) {
        return x <= 0 ? 0.0 : 1.0 - std::exp(-x / tc);
    }
    double z = x / sigma;
    // Evaluate exp(-x/tc + s^2/2tc^2) Phi(z - s/tc) in log space to avoid overflow.
    double a = sigma / tc;
    double arg = z - a;
    double tail;
    if (arg < -30) {
        tail = 0;  // both factors cancel to below double precision
    } else {
        double log_tail = -x / tc + 0.5 * a * a + std::log(std::max(phi(arg), 1e-300));
        tail = std::exp(log_tail);
    }
    return std::clamp(phi(z) - tail, 0.0, 1.0);
}

}  // namespace ghzsim
