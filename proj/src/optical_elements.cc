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

#include "ghzsim/optical_elements.h"

#include <cmath>
#include <numbers>
#include <string>

#include "ghzsim/errors.h"
#include "ghzsim/tolerances.h"

namespace ghzsim {

double normalize_angle(double radians) {
    double a = std::fmod(radians, std::numbers::pi);
    if (a < 0) {
        a += std::numbers::pi;
    }
    if (a >= std::numbers::pi) {
        a = 0;
    }
    return a;
}

double deg_to_rad(double degrees) {
    return degrees * std::numbers::pi / 180.0;
}

double rad_to_deg(double radians) {
    return radians * 180.0 / std::numbers::pi;
}

Operator hwp_operator(double theta) {
    double c = std::cos(2 * theta);
    double s = std::sin(2 * theta);
    CMatrix m(2, 2);
    m << c, s, s, -c;
    return Operator(m);
}

Operator qwp_operator(double theta) {
    const Complex i(0, 1);
    double c = std::cos(theta);
    double s = std::sin(theta);
    CMatrix m(2, 2);
    m << c * c + i * s * s, (1.0 - i) * s * c, (1.0 - i) * s * c, s * s + i * c * c;
    return Operator(m);
}

Operator polarizer_projector(double theta) {
    CVector v(2);
    v << std::cos(theta), std::sin(theta);
    return Operator(v * v.adjoint());
}

WaveplateSetting WaveplateSetting::half(double radians) {
    return {PlateKind::kHalf, normalize_angle(radians)};
}

WaveplateSetting WaveplateSetting::quarter(double radians) {
    return {PlateKind::kQuarter, normalize_angle(radians)};
}

Operator WaveplateSetting::jones() const {
    return kind == PlateKind::kHalf ? hwp_operator(angle) : qwp_operator(angle);
}

Operator analyzer_kraus(const PhotonAnalyzer &a) {
    Operator k = Operator::identity(2);
    if (a.qwp) {
        k = qwp_operator(*a.qwp) * k;
    }
    if (a.hwp) {
        k = hwp_operator(*a.hwp) * k;
    }
    return polarizer_projector(a.pol) * k;
}

Operator analyzer_effect(const PhotonAnalyzer &a) {
    Operator k = analyzer_kraus(a);
    return k.adjoint() * k;
}

std::vector<Operator> analyzer_channel(const AnalyzerSetting &setting) {
    std::vector<Operator> out;
    out.reserve(setting.photons.size());
    for (const auto &a : setting.photons) {
        out.push_back(analyzer_kraus(a));
    }
    return out;
}

Operator analyzer_filter(const AnalyzerSetting &setting) {
    auto ops = analyzer_channel(setting);
    return tensor_all(ops);
}

namespace {

void check_modes(size_t n, size_t a, size_t b) {
    if (a >= n || b >= n || a == b) {
        throw InputError("PBS modes must be distinct photon indices below " + std::to_string(n));
    }
}

// Diagonal projector selecting basis indices whose bits for photons a and b both equal `value`.
CMatrix same_polarization_projector(size_t n, size_t a, size_t b, size_t value) {
    auto d = static_cast<Eigen::Index>(size_t{1} << n);
    CMatrix p = CMatrix::Zero(d, d);
    for (Eigen::Index k = 0; k < d; k++) {
        auto idx = static_cast<size_t>(k);
        size_t bit_a = (idx >> (n - 1 - a)) & 1;
        size_t bit_b = (idx >> (n - 1 - b)) & 1;
        if (bit_a == value && bit_b == value) {
            p(k, k) = 1.0;
        }
    }
    return p;
}

}  // namespace

Operator pbs_projector(size_t num_photons, size_t mode_a, size_t mode_b) {
    check_modes(num_photons, mode_a, mode_b);
    return Operator(same_polarization_projector(num_photons, mode_a, mode_b, 0) +
                    same_polarization_projector(num_photons, mode_a, mode_b, 1));
}

ChannelOutcome pbs_postselect(const DensityMatrix &rho, size_t mode_a, size_t mode_b, double coherence) {
    size_t n = rho.num_qubits();
    check_modes(n, mode_a, mode_b);
    if (!(coherence >= 0 && coherence <= 1)) {
        throw InputError("PBS coherence must lie in [0, 1]");
    }
    CMatrix hh = same_polarization_projector(n, mode_a, mode_b, 0);
    CMatrix vv = same_polarization_projector(n, mode_a, mode_b, 1);
    const CMatrix &r = rho.matrix();
    CMatrix out = hh * r * hh + vv * r * vv + coherence * (hh * r * vv + vv * r * hh);
    ChannelOutcome result;
    double weight = out.trace().real();
    result.weight = std::max(weight, 0.0);
    if (weight >= tol::kNullOutcome) {
        result.state = DensityMatrix::from_matrix_normalized(out);
    }
    return result;
}

nlohmann::json to_json(const AnalyzerSetting &setting) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &a : setting.photons) {
        nlohmann::json o;
        if (a.qwp) {
            o["qwp"] = rad_to_deg(*a.qwp);
        }
        if (a.hwp) {
            o["hwp"] = rad_to_deg(*a.hwp);
        }
        o["pol"] = rad_to_deg(a.pol);
        arr.push_back(o);
    }
    return arr;
}

AnalyzerSetting analyzer_from_json(const nlohmann::json &j) {
    if (!j.is_array()) {
        throw InputError("analyzer setting must be a JSON list");
    }
    AnalyzerSetting out;
    for (const auto &o : j) {
        if (!o.is_object() || !o.contains("pol")) {
            throw InputError("each analyzer entry needs a 'pol' angle");
        }
        for (const auto &[key, _] : o.items()) {
            if (key != "qwp" && key != "hwp" && key != "pol") {
                throw InputError("unknown analyzer key '" + key + "'");
            }
        }
        try {
            PhotonAnalyzer a;
            if (o.contains("qwp")) {
                a.qwp = normalize_angle(deg_to_rad(o["qwp"].get<double>()));
            }
            if (o.contains("hwp")) {
                a.hwp = normalize_angle(deg_to_rad(o["hwp"].get<double>()));
            }
            a.pol = deg_to_rad(o["pol"].get<double>());
            out.photons.push_back(a);
        } catch (const nlohmann::json::exception &e) {
            throw InputError(std::string("analyzer angle: ") + e.what());
        }
    }
    return out;
}

}  // namespace ghzsim
