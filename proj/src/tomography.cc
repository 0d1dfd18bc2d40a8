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

#include "ghzsim/tomography.h"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "ghzsim/errors.h"
#include "ghzsim/rng.h"
#include "ghzsim/tolerances.h"

namespace ghzsim {

namespace {

constexpr char kBasisLetters[4] = {'H', 'V', 'D', 'L'};
constexpr size_t kDim = 16;

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CVector setting_vector(const TomographySetting &s) {
    Ket k = basis_ket(s.bases[0]);
    for (size_t q = 1; q < kTomographyPhotons; q++) {
        k = tensor(k, basis_ket(s.bases[q]));
    }
    return k.amplitudes();
}

void check_records(std::span<const CountRecord> records) {
    if (records.empty()) {
        throw InputError("no count records");
    }
    for (const auto &r : records) {
        if (!(r.duration > 0)) {
            throw InputError("record durations must be positive");
        }
    }
}

// Rank-1 POVM of the records mapped to a complete measurement.
struct CompletedPovm {
    CMatrix vectors;  // columns v_s with sum_s v_s v_s^dagger = I
    CMatrix g_sqrt;
    CMatrix g_inv_sqrt;
};

CompletedPovm complete_povm(std::span<const CountRecord> records) {
    auto n = static_cast<Eigen::Index>(records.size());
    CMatrix psi(kDim, n);
    for (Eigen::Index s = 0; s < n; s++) {
        psi.col(s) = setting_vector(records[static_cast<size_t>(s)].setting) *
                     std::sqrt(records[static_cast<size_t>(s)].duration);
    }
    CMatrix g = psi * psi.adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(g);
    const Eigen::VectorXd &ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 1e-10 * ev.maxCoeff())) {
        throw NumericalError("measurement settings are not informationally complete");
    }
    CompletedPovm out;
    out.g_sqrt = eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().adjoint();
    out.g_inv_sqrt = eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().adjoint();
    out.vectors = out.g_inv_sqrt * psi;
    return out;
}

Eigen::VectorXd povm_probabilities(const CMatrix &sigma, const CMatrix &v) {
    CMatrix sv = sigma * v;
    return (v.conjugate().cwiseProduct(sv)).colwise().sum().real().transpose();
}

double povm_log_likelihood(const Eigen::VectorXd &p, const Eigen::VectorXd &n) {
    double ll = 0;
    for (Eigen::Index s = 0; s < n.size(); s++) {
        if (n[s] > 0) {
            ll += n[s] * std::log(std::max(p[s], tol::kProbabilityFloor));
        }
    }
    return ll;
}

CMatrix hermitize_unit_trace(const CMatrix &m) {
    CMatrix h = 0.5 * (m + m.adjoint());
    return h / h.trace().real();
}

}  // namespace

PhotonAnalyzer basis_analyzer(Basis b) {
    const double deg = std::numbers::pi / 180;
    switch (b) {
        case Basis::kH:
            return PhotonAnalyzer{0.0, 0.0, 0.0};
        case Basis::kV:
            return PhotonAnalyzer{0.0, 45 * deg, 0.0};
        case Basis::kD:
            return PhotonAnalyzer{45 * deg, 22.5 * deg, 0.0};
        case Basis::kL:
            return PhotonAnalyzer{0.0, 157.5 * deg, 0.0};
    }
    throw InputError("unknown basis");
}

Ket basis_ket(Basis b) {
    const double r = std::numbers::sqrt2 / 2;
    CVector v(2);
    switch (b) {
        case Basis::kH:
            v << 1, 0;
            break;
        case Basis::kV:
            v << 0, 1;
            break;
        case Basis::kD:
            v << r, r;
            break;
        case Basis::kL:
            v << r, Complex(0, r);
            break;
    }
    return Ket(v);
}

std::string TomographySetting::label() const {
    std::string s;
    for (Basis b : bases) {
        s += kBasisLetters[static_cast<size_t>(b)];
    }
    return s;
}

TomographySetting TomographySetting::parse(std::string_view label) {
    if (label.size() != kTomographyPhotons) {
        throw InputError("setting label must have 4 letters: " + std::string(label));
    }
    TomographySetting s;
    for (size_t q = 0; q < kTomographyPhotons; q++) {
        size_t k = 0;
        while (k < 4 && kBasisLetters[k] != label[q]) {
            k++;
        }
        if (k == 4) {
            throw InputError("setting letters must be H, V, D or L: " + std::string(label));
        }
        s.bases[q] = static_cast<Basis>(k);
    }
    return s;
}

AnalyzerSetting TomographySetting::analyzers() const {
    AnalyzerSetting a;
    for (Basis b : bases) {
        a.photons.push_back(basis_analyzer(b));
    }
    return a;
}

Operator TomographySetting::effect() const {
    std::vector<Operator> effects;
    for (Basis b : bases) {
        effects.push_back(analyzer_effect(basis_analyzer(b)));
    }
    return tensor_all(effects);
}

std::vector<TomographySetting> standard_settings() {
    std::vector<TomographySetting> out;
    for (size_t i = 0; i < 256; i++) {
        TomographySetting s;
        for (size_t q = 0; q < kTomographyPhotons; q++) {
            s.bases[q] = static_cast<Basis>((i >> (2 * (kTomographyPhotons - 1 - q))) & 3);
        }
        out.push_back(s);
    }
    return out;
}

std::vector<CountRecord> simulate_counts(const DensityMatrix &rho, std::span<const TomographySetting> settings,
                                         uint64_t shots_per_setting, uint64_t seed) {
    if (rho.dim() != kDim) {
        throw InputError("tomography state must be four photons");
    }
    std::vector<CountRecord> out;
    for (size_t s = 0; s < settings.size(); s++) {
        double p = std::clamp(expectation(rho, settings[s].effect()), 0.0, 1.0);
        CounterRng rng(derive_key(seed, {s}));
        boost::random::binomial_distribution<int64_t, double> dist(static_cast<int64_t>(shots_per_setting), p);
        out.push_back(CountRecord{settings[s], static_cast<uint64_t>(dist(rng)), 1.0});
    }
    return out;
}

LinearInversion linear_inversion(std::span<const CountRecord> records) {
    check_records(records);
    std::array<CMatrix, 4> pauli;
    pauli[0] = CMatrix::Identity(2, 2);
    pauli[1] = CMatrix::Zero(2, 2);
    pauli[1] << 0, 1, 1, 0;
    pauli[2] = CMatrix::Zero(2, 2);
    pauli[2] << 0, Complex(0, -1), Complex(0, 1), 0;
    pauli[3] = CMatrix::Zero(2, 2);
    pauli[3] << 1, 0, 0, -1;
    std::vector<CMatrix> basis;
    for (size_t k = 0; k < kDim * kDim; k++) {
        Operator op(pauli[(k >> 6) & 3]);
        for (int q = 2; q >= 0; q--) {
            op = tensor(op, Operator(pauli[(k >> (2 * q)) & 3]));
        }
        basis.push_back(op.matrix());
    }
    auto n = static_cast<Eigen::Index>(records.size());
    Eigen::MatrixXd a(n, static_cast<Eigen::Index>(basis.size()));
    Eigen::VectorXd y(n);
    for (Eigen::Index s = 0; s < n; s++) {
        const auto &r = records[static_cast<size_t>(s)];
        CVector v = setting_vector(r.setting);
        for (size_t k = 0; k < basis.size(); k++) {
            a(s, static_cast<Eigen::Index>(k)) = (v.adjoint() * basis[k] * v)(0, 0).real();
        }
        y[s] = static_cast<double>(r.count) / r.duration;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < a.cols()) {
        throw NumericalError("settings do not span the operator space (rank " + std::to_string(qr.rank()) + ")");
    }
    Eigen::VectorXd c = qr.solve(y);
    CMatrix x = CMatrix::Zero(kDim, kDim);
    for (size_t k = 0; k < basis.size(); k++) {
        x += c[static_cast<Eigen::Index>(k)] * basis[k];
    }
    double tr = x.trace().real();
    if (!(tr > 0)) {
        throw NumericalError("linear inversion gave nonpositive trace");
    }
    CMatrix h = hermitize_unit_trace(x);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(h, Eigen::EigenvaluesOnly);
    return LinearInversion{Operator(h), eig.eigenvalues().minCoeff()};
}

double log_likelihood(const DensityMatrix &rho, std::span<const CountRecord> records) {
    check_records(records);
    if (rho.dim() != kDim) {
        throw InputError("tomography state must be four photons");
    }
    std::vector<double> q(records.size());
    double total = 0;
    for (size_t s = 0; s < records.size(); s++) {
        CVector v = setting_vector(records[s].setting);
        q[s] = records[s].duration * std::max(0.0, (v.adjoint() * rho.matrix() * v)(0, 0).real());
        total += q[s];
    }
    if (!(total > 0)) {
        throw NumericalError("state has zero probability on every setting");
    }
    double ll = 0;
    for (size_t s = 0; s < records.size(); s++) {
        if (records[s].count > 0) {
            ll += static_cast<double>(records[s].count) * std::log(std::max(q[s] / total, tol::kProbabilityFloor));
        }
    }
    return ll;
}

Reconstruction mle_reconstruct(std::span<const CountRecord> records, const MleOptions &opts) {
    check_records(records);
    if (!(opts.dilution > 0 && opts.dilution <= 1) || opts.max_iter < 0 || !(opts.tol >= 0)) {
        throw InputError("invalid MLE options");
    }
    CompletedPovm povm = complete_povm(records);
    auto n_settings = static_cast<Eigen::Index>(records.size());
    Eigen::VectorXd counts(n_settings);
    double total = 0;
    for (Eigen::Index s = 0; s < n_settings; s++) {
        counts[s] = static_cast<double>(records[static_cast<size_t>(s)].count);
        total += counts[s];
    }
    if (!(total > 0)) {
        throw InputError("records contain no counts");
    }
    Eigen::VectorXd freq = counts / total;

    // Start from I/16 in the physical frame.
    CMatrix sigma = hermitize_unit_trace(povm.g_sqrt * povm.g_sqrt);
    Eigen::VectorXd p = povm_probabilities(sigma, povm.vectors);
    double ll = povm_log_likelihood(p, counts);

    Reconstruction rec;
    int it = 0;
    while (it < opts.max_iter) {
        Eigen::VectorXd ratio(n_settings);
        for (Eigen::Index s = 0; s < n_settings; s++) {
            ratio[s] = freq[s] / std::max(p[s], tol::kProbabilityFloor);
        }
        CMatrix r = povm.vectors * ratio.asDiagonal() * povm.vectors.adjoint();
        CMatrix target = hermitize_unit_trace(r * sigma * r);
        double eps = opts.dilution;
        bool accepted = false;
        CMatrix next;
        Eigen::VectorXd next_p;
        double next_ll = ll;
        for (int halving = 0; halving < 40; halving++) {
            next = hermitize_unit_trace((1 - eps) * sigma + eps * target);
            next_p = povm_probabilities(next, povm.vectors);
            next_ll = povm_log_likelihood(next_p, counts);
            if (next_ll >= ll) {
                accepted = true;
                break;
            }
            eps *= 0.5;
        }
        if (!accepted) {
            rec.converged = true;
            break;
        }
        it++;
        double gain = next_ll - ll;
        sigma = std::move(next);
        p = std::move(next_p);
        ll = next_ll;
        if (opts.on_iteration) {
            opts.on_iteration(it, ll);
        }
        if (gain <= opts.tol * std::max(1.0, std::abs(ll))) {
            rec.converged = true;
            break;
        }
    }
    CMatrix rho = povm.g_inv_sqrt * sigma * povm.g_inv_sqrt;
    rec.rho = DensityMatrix::from_matrix_normalized(rho);
    rec.log_likelihood = ll;
    rec.iterations = it;
    rec.fidelity_ghz = std::clamp(fidelity_pure(ghz_ket(4), rec.rho), 0.0, 1.0);
    return rec;
}

BootstrapResult bootstrap_fidelity(std::span<const CountRecord> records, int n_resamples, uint64_t seed,
                                   const MleOptions &opts) {
    if (n_resamples < 50) {
        throw InputError("bootstrap needs at least 50 resamples");
    }
    check_records(records);
    std::vector<double> f;
    std::vector<CountRecord> resampled(records.begin(), records.end());
    for (int r = 0; r < n_resamples; r++) {
        for (size_t s = 0; s < records.size(); s++) {
            uint64_t n = records[s].count;
            if (n == 0) {
                resampled[s].count = 0;
                continue;
            }
            CounterRng rng(derive_key(seed, {static_cast<uint64_t>(r), s}));
            boost::random::poisson_distribution<int64_t, double> dist(static_cast<double>(n));
            resampled[s].count = static_cast<uint64_t>(dist(rng));
        }
        f.push_back(mle_reconstruct(resampled, opts).fidelity_ghz);
    }
    double mean = 0;
    for (double v : f) {
        mean += v;
    }
    mean /= static_cast<double>(f.size());
    double var = 0;
    for (double v : f) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(f.size() - 1);
    return {mean, std::sqrt(var)};
}

std::vector<CountRecord> permute_records(std::span<const CountRecord> records, std::span<const size_t> perm) {
    if (perm.size() != kTomographyPhotons) {
        throw InputError("permutation must list 4 photons");
    }
    std::vector<CountRecord> out;
    for (const auto &r : records) {
        CountRecord c = r;
        for (size_t q = 0; q < kTomographyPhotons; q++) {
            if (perm[q] >= kTomographyPhotons) {
                throw InputError("permutation index out of range");
            }
            c.setting.bases[perm[q]] = r.setting.bases[q];
        }
        out.push_back(c);
    }
    return out;
}

void write_counts_csv(std::span<const CountRecord> records, std::ostream &out) {
    out << "setting,count,duration_s\r\n";
    for (const auto &r : records) {
        out << r.setting.label() << ',' << r.count << ',' << format_number(r.duration) << "\r\n";
    }
}

std::vector<CountRecord> read_counts_csv(std::istream &in) {
    std::vector<CountRecord> out;
    std::string line;
    uint64_t offset = 0;
    size_t row = 0;
    auto fail = [&](const std::string &why) {
        throw FormatError("counts CSV row " + std::to_string(row) + ": " + why, offset);
    };
    while (std::getline(in, line)) {
        uint64_t next_offset = offset + line.size() + 1;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (row == 0) {
            if (line != "setting,count,duration_s") {
                fail("expected header \"setting,count,duration_s\"");
            }
        } else if (!line.empty()) {
            std::vector<std::string> fields;
            std::stringstream ss(line);
            std::string field;
            while (std::getline(ss, field, ',')) {
                fields.push_back(field);
            }
            if (fields.size() != 3) {
                fail("expected 3 fields");
            }
            CountRecord r;
            try {
                r.setting = TomographySetting::parse(fields[0]);
            } catch (const InputError &e) {
                fail(e.what());
            }
            size_t used = 0;
            try {
                if (fields[1].empty() || fields[1][0] == '-') {
                    fail("count must be a nonnegative integer");
                }
                r.count = std::stoull(fields[1], &used);
                if (used != fields[1].size()) {
                    fail("count must be a nonnegative integer");
                }
                r.duration = std::stod(fields[2], &used);
                if (used != fields[2].size() || !(r.duration > 0) || !std::isfinite(r.duration)) {
                    fail("duration must be a positive number");
                }
            } catch (const std::logic_error &) {
                fail("unparseable number");
            }
            out.push_back(r);
        }
        offset = next_offset;
        row++;
    }
    if (row == 0) {
        fail("empty file");
    }
    return out;
}

void write_matrix_csv(const DensityMatrix &rho, std::ostream &out) {
    out << "row,col,re,im\r\n";
    for (size_t r = 0; r < rho.dim(); r++) {
        for (size_t c = 0; c < rho.dim(); c++) {
            out << r << ',' << c << ',' << format_number(rho(r, c).real()) << ',' << format_number(rho(r, c).imag())
                << "\r\n";
        }
    }
}

nlohmann::json to_json(const Reconstruction &r) {
    nlohmann::json j;
    j["rho"] = to_json(r.rho);
    j["fidelity_ghz"] = r.fidelity_ghz;
    j["fidelity_err"] = r.fidelity_err;
    j["iterations"] = r.iterations;
    j["log_likelihood"] = r.log_likelihood;
    j["converged"] = r.converged;
    return j;
}

}  // namespace ghzsim
