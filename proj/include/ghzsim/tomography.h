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

#ifndef GHZSIM_TOMOGRAPHY_H
#define GHZSIM_TOMOGRAPHY_H

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghzsim/optical_elements.h"
#include "ghzsim/quantum_state.h"
#include "json.hpp"

namespace ghzsim {

/// Single-photon projection: H, V, D = (H+V)/sqrt2, L = (H+iV)/sqrt2.
enum class Basis : uint8_t { kH, kV, kD, kL };

inline constexpr size_t kTomographyPhotons = 4;

/// Waveplate and polarizer angles realizing |b><b|.
PhotonAnalyzer basis_analyzer(Basis b);
/// Ideal single-photon state of the basis.
Ket basis_ket(Basis b);

struct TomographySetting {
    std::array<Basis, kTomographyPhotons> bases{};

    /// Four letters from {H, V, D, L}, photon 1 first.
    std::string label() const;
    /// Throws InputError on anything but four letters from {H, V, D, L}.
    static TomographySetting parse(std::string_view label);
    AnalyzerSetting analyzers() const;
    /// Composed POVM element of the four analyzers.
    Operator effect() const;

    bool operator==(const TomographySetting &) const = default;
};

struct CountRecord {
    TomographySetting setting;
    uint64_t count = 0;
    double duration = 1;  // s
};

struct Reconstruction {
    DensityMatrix rho = DensityMatrix::maximally_mixed(16);
    double log_likelihood = 0;
    int iterations = 0;
    double fidelity_ghz = 0;
    /// Bootstrap standard error; 0 until one has been run.
    double fidelity_err = 0;
    bool converged = false;
};

/// {H, V, D, L}^4 with photon 1 most significant: HHHH, HHHV, HHHD, ...
std::vector<TomographySetting> standard_settings();

/// count ~ Binomial(shots, tr(Pi_s rho)); duration is 1 s per setting.
std::vector<CountRecord> simulate_counts(const DensityMatrix &rho, std::span<const TomographySetting> settings,
                                         uint64_t shots_per_setting, uint64_t seed);

struct LinearInversion {
    Operator rho;  // Hermitian, unit trace
    double min_eigenvalue;
    bool physical() const {
        return min_eigenvalue >= 0;
    }
};

/// Least-squares inversion of count rates; throws NumericalError when the
/// settings do not span the operator space.
LinearInversion linear_inversion(std::span<const CountRecord> records);

struct MleOptions {
    int max_iter = 5000;
    double tol = 1e-10;  // relative log-likelihood gain
    double dilution = 0.5;
    /// Called after every accepted step with (iteration, log-likelihood).
    std::function<void(int, double)> on_iteration;
};

/// Diluted R rho R maximum-likelihood reconstruction.
///
/// Expected counts are N d_s tr(Pi_s rho) with d_s the setting's duration
/// and N a free intensity, so the likelihood only sees the normalized
/// probabilities d_s p_s / sum_t d_t p_t. The iteration runs on the
/// equivalent complete POVM G^{-1/2} d_s Pi_s G^{-1/2}, G = sum_s d_s Pi_s.
Reconstruction mle_reconstruct(std::span<const CountRecord> records, const MleOptions &opts = {});

/// sum_s n_s ln(d_s p_s / sum_t d_t p_t), probabilities floored at 1e-12.
double log_likelihood(const DensityMatrix &rho, std::span<const CountRecord> records);

struct BootstrapResult {
    double mean;
    double stderr_value;
};

/// Poisson-resamples every count, reconstructs, and reports the GHZ fidelity spread.
BootstrapResult bootstrap_fidelity(std::span<const CountRecord> records, int n_resamples, uint64_t seed,
                                   const MleOptions &opts = {});

/// Relabels photons in every setting: photon q becomes photon perm[q].
std::vector<CountRecord> permute_records(std::span<const CountRecord> records, std::span<const size_t> perm);

/// CSV with header "setting,count,duration_s".
void write_counts_csv(std::span<const CountRecord> records, std::ostream &out);
/// Throws FormatError naming the offending row.
std::vector<CountRecord> read_counts_csv(std::istream &in);
/// CSV with header "row,col,re,im".
void write_matrix_csv(const DensityMatrix &rho, std::ostream &out);

nlohmann::json to_json(const Reconstruction &r);

}  // namespace ghzsim

#endif
