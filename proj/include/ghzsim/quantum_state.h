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

#ifndef GHZSIM_QUANTUM_STATE_H
#define GHZSIM_QUANTUM_STATE_H

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace ghzsim {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Largest register the dense representation accepts (2^8 amplitudes).
inline constexpr size_t kMaxQubits = 8;

/// Pure polarization state of n photons.
///
/// Basis index convention: photon 1 is the most significant bit and
/// H -> 0, V -> 1, so "HV" is index 1 and "VH" is index 2.
class Ket {
   public:
    /// Normalizes `amplitudes`. Throws InputError for zero norm or a
    /// dimension that is not a power of two.
    explicit Ket(CVector amplitudes);

    size_t dim() const {
        return static_cast<size_t>(amps_.size());
    }
    size_t num_qubits() const;
    const CVector &amplitudes() const {
        return amps_;
    }
    Complex operator[](size_t k) const {
        return amps_(static_cast<Eigen::Index>(k));
    }

   private:
    CVector amps_;
};

/// Square complex matrix with no intrinsic constraints.
class Operator {
   public:
    explicit Operator(CMatrix m);
    static Operator identity(size_t dim);

    size_t dim() const {
        return static_cast<size_t>(m_.rows());
    }
    const CMatrix &matrix() const {
        return m_;
    }
    Operator adjoint() const {
        return Operator(m_.adjoint());
    }
    Operator operator*(const Operator &other) const;
    Operator operator+(const Operator &other) const;

    bool is_hermitian(double tol) const;
    bool is_unitary(double tol) const;

   private:
    CMatrix m_;
};

/// Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
   public:
    /// Validates all three invariants; throws InputError on violation.
    static DensityMatrix from_matrix(CMatrix m);
    /// Symmetrizes and trace-normalizes `m` first, then validates.
    static DensityMatrix from_matrix_normalized(CMatrix m);
    static DensityMatrix maximally_mixed(size_t dim);

    size_t dim() const {
        return static_cast<size_t>(m_.rows());
    }
    size_t num_qubits() const;
    const CMatrix &matrix() const {
        return m_;
    }
    Complex operator()(size_t r, size_t c) const {
        return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }

    double purity() const;
    double min_eigenvalue() const;

   private:
    explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {
    }
    CMatrix m_;
};

Ket ket_basis(std::string_view label, size_t n);
Ket ghz_ket(size_t n);
/// (|HH> + |VV>)/sqrt(2).
Ket bell_phi_plus();

Ket tensor(const Ket &a, const Ket &b);
Operator tensor(const Operator &a, const Operator &b);
DensityMatrix tensor(const DensityMatrix &a, const DensityMatrix &b);
/// Left-to-right Kronecker product of a nonempty list.
Operator tensor_all(std::span<const Operator> ops);

DensityMatrix density_from_ket(const Ket &psi);

struct ChannelOutcome {
    /// Renormalized post-channel state; empty for a null outcome.
    std::optional<DensityMatrix> state;
    double weight = 0;
};

/// Applies sum_k K rho K^dagger. The weight is the trace before
/// renormalization, i.e. the event probability for a filtering channel.
ChannelOutcome apply_channel(const DensityMatrix &rho, std::span<const Operator> kraus);

/// <psi|rho|psi>.
double fidelity_pure(const Ket &psi, const DensityMatrix &rho);

/// Re tr(rho M). Throws InputError when M is not Hermitian.
double expectation(const DensityMatrix &rho, const Operator &m);

/// tr|rho - sigma| / 2.
double trace_distance(const DensityMatrix &rho, const DensityMatrix &sigma);

/// Relabels qubits: qubit q of the input becomes qubit perm[q] of the output.
DensityMatrix permute_qubits(const DensityMatrix &rho, std::span<const size_t> perm);

nlohmann::json to_json(const DensityMatrix &rho);
/// Inverse of to_json; throws InputError on malformed objects.
DensityMatrix density_from_json(const nlohmann::json &j);

}  // namespace ghzsim

#endif
