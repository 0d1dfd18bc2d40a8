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

#include "ghzsim/quantum_state.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "ghzsim/errors.h"
#include "ghzsim/tolerances.h"

namespace ghzsim {

namespace {

size_t log2_exact(size_t dim) {
    if (dim == 0 || !std::has_single_bit(dim)) {
        throw InputError("dimension " + std::to_string(dim) + " is not a power of 2");
    }
    size_t n = static_cast<size_t>(std::countr_zero(dim));
    if (n > kMaxQubits) {
        throw InputError("at most " + std::to_string(kMaxQubits) + " qubits are supported");
    }
    return n;
}

CMatrix kron(const CMatrix &a, const CMatrix &b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); i++) {
        for (Eigen::Index j = 0; j < a.cols(); j++) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

}  // namespace

Ket::Ket(CVector amplitudes) : amps_(std::move(amplitudes)) {
    log2_exact(static_cast<size_t>(amps_.size()));
    double norm = amps_.norm();
    if (!(norm > 0) || !std::isfinite(norm)) {
        throw InputError("ket has zero or non-finite norm");
    }
    amps_ /= norm;
}

size_t Ket::num_qubits() const {
    return log2_exact(dim());
}

Operator::Operator(CMatrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols()) {
        throw InputError("operator must be a nonempty square matrix");
    }
}

Operator Operator::identity(size_t dim) {
    auto d = static_cast<Eigen::Index>(dim);
    return Operator(CMatrix::Identity(d, d));
}

Operator Operator::operator*(const Operator &other) const {
    if (dim() != other.dim()) {
        throw InputError("operator dimension mismatch");
    }
    return Operator(m_ * other.m_);
}

Operator Operator::operator+(const Operator &other) const {
    if (dim() != other.dim()) {
        throw InputError("operator dimension mismatch");
    }
    return Operator(m_ + other.m_);
}

bool Operator::is_hermitian(double tol) const {
    return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool Operator::is_unitary(double tol) const {
    auto d = m_.rows();
    return (m_.adjoint() * m_ - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() <= tol;
}

DensityMatrix DensityMatrix::from_matrix(CMatrix m) {
    if (m.rows() != m.cols()) {
        throw InputError("density matrix must be square");
    }
    log2_exact(static_cast<size_t>(m.rows()));
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol::kAlgebraic) {
        throw InputError("density matrix is not Hermitian");
    }
    Complex tr = m.trace();
    if (std::abs(tr - 1.0) > tol::kAlgebraic) {
        throw InputError("density matrix trace " + std::to_string(tr.real()) + " != 1");
    }
    CMatrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < tol::kPsd) {
        throw InputError("density matrix has eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));
    }
    return DensityMatrix(std::move(h));
}

DensityMatrix DensityMatrix::from_matrix_normalized(CMatrix m) {
    if (m.rows() != m.cols()) {
        throw InputError("density matrix must be square");
    }
    CMatrix h = 0.5 * (m + m.adjoint());
    double tr = h.trace().real();
    if (!(tr > 0)) {
        throw InputError("matrix has nonpositive trace");
    }
    return from_matrix(h / tr);
}

DensityMatrix DensityMatrix::maximally_mixed(size_t dim) {
    log2_exact(dim);
    auto d = static_cast<Eigen::Index>(dim);
    return DensityMatrix(CMatrix::Identity(d, d) / static_cast<double>(dim));
}

size_t DensityMatrix::num_qubits() const {
    return log2_exact(dim());
}

double DensityMatrix::purity() const {
    return (m_ * m_).trace().real();
}

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Ket ket_basis(std::string_view label, size_t n) {
    if (n < 1 || label.size() != n) {
        throw InputError("basis label length must equal the photon count (>= 1)");
    }
    if (n > kMaxQubits) {
        throw InputError("too many photons");
    }
    size_t index = 0;
    for (char c : label) {
        index <<= 1;
        if (c == 'V') {
            index |= 1;
        } else if (c != 'H') {
            throw InputError(std::string("invalid polarization character '") + c + "'");
        }
    }
    CVector amps = CVector::Zero(static_cast<Eigen::Index>(size_t{1} << n));
    amps(static_cast<Eigen::Index>(index)) = 1.0;
    return Ket(std::move(amps));
}

Ket ghz_ket(size_t n) {
    if (n < 2) {
        throw InputError("GHZ state needs at least 2 photons");
    }
    if (n > kMaxQubits) {
        throw InputError("too many photons");
    }
    CVector amps = CVector::Zero(static_cast<Eigen::Index>(size_t{1} << n));
    amps(0) = M_SQRT1_2;
    amps(amps.size() - 1) = M_SQRT1_2;
    return Ket(std::move(amps));
}

Ket bell_phi_plus() {
    return ghz_ket(2);
}

Ket tensor(const Ket &a, const Ket &b) {
    CVector out(a.amplitudes().size() * b.amplitudes().size());
    for (Eigen::Index i = 0; i < a.amplitudes().size(); i++) {
        out.segment(i * b.amplitudes().size(), b.amplitudes().size()) = a.amplitudes()(i) * b.amplitudes();
    }
    return Ket(std::move(out));
}

Operator tensor(const Operator &a, const Operator &b) {
    return Operator(kron(a.matrix(), b.matrix()));
}

DensityMatrix tensor(const DensityMatrix &a, const DensityMatrix &b) {
    return DensityMatrix::from_matrix_normalized(kron(a.matrix(), b.matrix()));
}

Operator tensor_all(std::span<const Operator> ops) {
    if (ops.empty()) {
        throw InputError("tensor_all needs at least one operator");
    }
    CMatrix acc = ops[0].matrix();
    for (size_t k = 1; k < ops.size(); k++) {
        acc = kron(acc, ops[k].matrix());
    }
    return Operator(std::move(acc));
}

DensityMatrix density_from_ket(const Ket &psi) {
    return DensityMatrix::from_matrix_normalized(psi.amplitudes() * psi.amplitudes().adjoint());
}

ChannelOutcome apply_channel(const DensityMatrix &rho, std::span<const Operator> kraus) {
    if (kraus.empty()) {
        throw InputError("channel needs at least one Kraus operator");
    }
    auto d = static_cast<Eigen::Index>(rho.dim());
    CMatrix completeness = CMatrix::Zero(d, d);
    CMatrix out = CMatrix::Zero(d, d);
    for (const auto &k : kraus) {
        if (k.dim() != rho.dim()) {
            throw InputError("Kraus operator dimension mismatch");
        }
        completeness += k.matrix().adjoint() * k.matrix();
        out += k.matrix() * rho.matrix() * k.matrix().adjoint();
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(0.5 * (completeness + completeness.adjoint())),
                                              Eigen::EigenvaluesOnly);
    if (es.eigenvalues().maxCoeff() > 1.0 + tol::kKrausCompleteness) {
        throw InputError("Kraus operators are not trace non-increasing");
    }
    double weight = out.trace().real();
    ChannelOutcome result;
    result.weight = std::max(weight, 0.0);
    if (weight >= tol::kNullOutcome) {
        result.state = DensityMatrix::from_matrix_normalized(out);
    }
    return result;
}

double fidelity_pure(const Ket &psi, const DensityMatrix &rho) {
    if (psi.dim() != rho.dim()) {
        throw InputError("fidelity: dimension mismatch");
    }
    Complex f = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
    return std::clamp(f.real(), 0.0, 1.0);
}

double expectation(const DensityMatrix &rho, const Operator &m) {
    if (m.dim() != rho.dim()) {
        throw InputError("expectation: dimension mismatch");
    }
    if (!m.is_hermitian(tol::kAlgebraic)) {
        throw InputError("expectation: observable is not Hermitian");
    }
    Complex v = (rho.matrix() * m.matrix()).trace();
    return v.real();
}

double trace_distance(const DensityMatrix &rho, const DensityMatrix &sigma) {
    if (rho.dim() != sigma.dim()) {
        throw InputError("trace distance: dimension mismatch");
    }
    CMatrix diff = rho.matrix() - sigma.matrix();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(0.5 * (diff + diff.adjoint())), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

DensityMatrix permute_qubits(const DensityMatrix &rho, std::span<const size_t> perm) {
    size_t n = rho.num_qubits();
    if (perm.size() != n) {
        throw InputError("permutation length must equal qubit count");
    }
    std::vector<bool> seen(n, false);
    for (size_t p : perm) {
        if (p >= n || seen[p]) {
            throw InputError("invalid qubit permutation");
        }
        seen[p] = true;
    }
    // Bit (n-1-q) of an index holds qubit q.
    auto remap = [&](size_t idx) {
        size_t out = 0;
        for (size_t q = 0; q < n; q++) {
            size_t bit = (idx >> (n - 1 - q)) & 1;
            out |= bit << (n - 1 - perm[q]);
        }
        return out;
    };
    size_t d = rho.dim();
    CMatrix out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (size_t r = 0; r < d; r++) {
        for (size_t c = 0; c < d; c++) {
            out(static_cast<Eigen::Index>(remap(r)), static_cast<Eigen::Index>(remap(c))) = rho(r, c);
        }
    }
    return DensityMatrix::from_matrix_normalized(std::move(out));
}

nlohmann::json to_json(const DensityMatrix &rho) {
    std::vector<double> re;
    std::vector<double> im;
    re.reserve(rho.dim() * rho.dim());
    im.reserve(rho.dim() * rho.dim());
    for (size_t r = 0; r < rho.dim(); r++) {
        for (size_t c = 0; c < rho.dim(); c++) {
            re.push_back(rho(r, c).real());
            im.push_back(rho(r, c).imag());
        }
    }
    return nlohmann::json{{"dim", rho.dim()}, {"re", re}, {"im", im}};
}

DensityMatrix density_from_json(const nlohmann::json &j) {
    try {
        auto dim = j.at("dim").get<size_t>();
        auto re = j.at("re").get<std::vector<double>>();
        auto im = j.at("im").get<std::vector<double>>();
        if (re.size() != dim * dim || im.size() != dim * dim) {
            throw InputError("density matrix JSON: entry count does not match dim");
        }
        auto d = static_cast<Eigen::Index>(dim);
        CMatrix m(d, d);
        for (size_t k = 0; k < dim * dim; k++) {
            m(static_cast<Eigen::Index>(k / dim), static_cast<Eigen::Index>(k % dim)) = Complex(re[k], im[k]);
        }
        return DensityMatrix::from_matrix(std::move(m));
    } catch (const nlohmann::json::exception &e) {
        throw InputError(std::string("density matrix JSON: ") + e.what());
    }
}

}  // namespace ghzsim
