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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ghzsim/errors.h"
#include "ghzsim/source_model.h"
#include "test_util.h"

using namespace ghzsim;
using ghzsim::testing::max_abs_diff;
using ghzsim::testing::random_density;

namespace {

const double kPi = std::numbers::pi;

CVector apply(const Operator &op, const char *label) {
    return op.matrix() * ket_basis(label, 1).amplitudes();
}

/// Two-pair input: |Phi+>_12 (x) |Phi+>_34.
DensityMatrix product_input() {
    return density_from_ket(tensor(bell_phi_plus(), bell_phi_plus()));
}

/// Brute force: keep amplitudes whose photons 2 and 3 agree, photon 1 in the top bit.
CMatrix same_polarization_oracle(const CMatrix &rho) {
    CMatrix out = rho;
    for (Eigen::Index r = 0; r < 16; r++) {
        for (Eigen::Index c = 0; c < 16; c++) {
            bool keep_r = ((r >> 2) & 1) == ((r >> 1) & 1);
            bool keep_c = ((c >> 2) & 1) == ((c >> 1) & 1);
            if (!keep_r || !keep_c) {
                out(r, c) = 0;
            }
        }
    }
    return out;
}

}  // namespace

TEST(optical_elements, hwp_examples) {
    CVector v = apply(hwp_operator(0), "V");
    EXPECT_NEAR(v(0).real(), 0, 1e-15);
    EXPECT_NEAR(v(1).real(), -1, 1e-15);
    CVector h = apply(hwp_operator(0), "H");
    EXPECT_NEAR(h(0).real(), 1, 1e-15);

    CVector d = apply(hwp_operator(kPi / 8), "H");
    EXPECT_NEAR(d(0).real(), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(d(1).real(), 1 / std::sqrt(2.0), 1e-15);
}

TEST(optical_elements, qwp_examples) {
    CVector h = apply(qwp_operator(0), "H");
    EXPECT_NEAR(std::abs(h(0) - Complex(1, 0)), 0, 1e-15);
    CVector v = apply(qwp_operator(0), "V");
    EXPECT_NEAR(std::abs(v(1) - Complex(0, 1)), 0, 1e-15);

    CVector circ = apply(qwp_operator(kPi / 4), "H");
    EXPECT_NEAR(std::norm(circ(0)), 0.5, 1e-15);
    EXPECT_NEAR(std::norm(circ(1)), 0.5, 1e-15);
    // Circular: equal weights with a quarter-cycle relative phase.
    EXPECT_NEAR(std::abs(std::arg(circ(1) / circ(0))), kPi / 2, 1e-12);
}

TEST(optical_elements, plates_are_unitary_for_all_angles) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> angle(-2 * kPi, 2 * kPi);
    for (int trial = 0; trial < 200; trial++) {
        double t = angle(rng);
        Operator h = hwp_operator(t);
        Operator q = qwp_operator(t);
        EXPECT_LT(max_abs_diff((h.adjoint() * h).matrix(), CMatrix::Identity(2, 2)), 1e-12);
        EXPECT_LT(max_abs_diff((q.adjoint() * q).matrix(), CMatrix::Identity(2, 2)), 1e-12);
        EXPECT_TRUE(h.is_hermitian(1e-12));
        EXPECT_LT(max_abs_diff((h * h).matrix(), CMatrix::Identity(2, 2)), 1e-12);
    }
}

TEST(optical_elements, waveplate_angle_normalized) {
    EXPECT_NEAR(WaveplateSetting::half(-kPi / 8).angle, 7 * kPi / 8, 1e-15);
    EXPECT_NEAR(WaveplateSetting::quarter(kPi + 0.1).angle, 0.1, 1e-14);
    EXPECT_GE(WaveplateSetting::half(kPi).angle, 0.0);
    EXPECT_LT(WaveplateSetting::half(kPi).angle, kPi);
    EXPECT_LT(max_abs_diff(WaveplateSetting::half(0.3 + kPi).jones().matrix(), hwp_operator(0.3).matrix()), 1e-12);
}

TEST(optical_elements, polarizer_examples) {
    EXPECT_LT(max_abs_diff(polarizer_projector(0).matrix(), density_from_ket(ket_basis("H", 1)).matrix()), 1e-15);
    std::vector<Operator> k{polarizer_projector(kPi / 4)};
    EXPECT_NEAR(apply_channel(density_from_ket(ket_basis("H", 1)), k).weight, 0.5, 1e-12);
    Operator p = polarizer_projector(0.7);
    EXPECT_LT(max_abs_diff((p * p).matrix(), p.matrix()), 1e-15);
}

TEST(optical_elements, pbs_postselect_examples) {
    ChannelOutcome out = pbs_postselect(product_input(), 1, 2);
    ASSERT_TRUE(out.state.has_value());
    EXPECT_NEAR(out.weight, 0.5, 1e-10);
    EXPECT_LT(max_abs_diff(out.state->matrix(), density_from_ket(ghz_ket(4)).matrix()), 1e-12);
    EXPECT_NEAR(fidelity_pure(ghz_ket(4), *out.state), 1.0, 1e-10);

    ChannelOutcome hhhh = pbs_postselect(density_from_ket(ket_basis("HHHH", 4)), 1, 2);
    EXPECT_NEAR(hhhh.weight, 1.0, 1e-12);
    EXPECT_NEAR((*hhhh.state)(0, 0).real(), 1.0, 1e-12);

    ChannelOutcome hvhh = pbs_postselect(density_from_ket(ket_basis("HVHH", 4)), 1, 2);
    EXPECT_FALSE(hvhh.state.has_value());
    EXPECT_LT(hvhh.weight, 1e-12);
}

TEST(optical_elements, pbs_postselect_matches_brute_force) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 20; trial++) {
        DensityMatrix rho = random_density(16, 1 + trial % 16, rng);
        CMatrix kept = same_polarization_oracle(rho.matrix());
        double w = kept.trace().real();
        ChannelOutcome out = pbs_postselect(rho, 1, 2);
        EXPECT_NEAR(out.weight, w, 1e-12);
        EXPECT_LT(max_abs_diff(out.state->matrix(), kept / w), 1e-12);
    }
}

TEST(optical_elements, pbs_complement_sums_to_one) {
    std::mt19937_64 rng(33);
    Operator p = pbs_projector(4, 1, 2);
    std::vector<Operator> complement{Operator(CMatrix::Identity(16, 16) - p.matrix())};
    for (int trial = 0; trial < 20; trial++) {
        DensityMatrix rho = random_density(16, 3, rng);
        double w = pbs_postselect(rho, 1, 2).weight + apply_channel(rho, complement).weight;
        EXPECT_NEAR(w, 1.0, 1e-10);
    }
}

TEST(optical_elements, pbs_commutes_with_outer_photon_rotations) {
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> angle(0, kPi);
    for (int trial = 0; trial < 20; trial++) {
        DensityMatrix rho = random_density(16, 2, rng);
        std::vector<Operator> local{qwp_operator(angle(rng)) * hwp_operator(angle(rng)), Operator::identity(2),
                                    Operator::identity(2), hwp_operator(angle(rng))};
        std::vector<Operator> u{tensor_all(local)};
        ChannelOutcome rotate_then_filter = pbs_postselect(*apply_channel(rho, u).state, 1, 2);
        ChannelOutcome filtered = pbs_postselect(rho, 1, 2);
        ChannelOutcome filter_then_rotate = apply_channel(*filtered.state, u);
        EXPECT_NEAR(rotate_then_filter.weight, filtered.weight, 1e-10);
        EXPECT_LT(max_abs_diff(rotate_then_filter.state->matrix(), filter_then_rotate.state->matrix()), 1e-10);
    }
}

TEST(optical_elements, pbs_coherence_scales_cross_terms) {
    ChannelOutcome out = pbs_postselect(product_input(), 1, 2, 0.8);
    EXPECT_NEAR((*out.state)(0, 15).real(), 0.4, 1e-12);
    EXPECT_NEAR((*out.state)(0, 0).real(), 0.5, 1e-12);
    EXPECT_NEAR(fidelity_pure(ghz_ket(4), *out.state), 0.9, 1e-12);
    EXPECT_THROW(pbs_postselect(product_input(), 1, 2, 1.5), InputError);
    EXPECT_THROW(pbs_postselect(product_input(), 1, 1), InputError);
    EXPECT_THROW(pbs_postselect(product_input(), 1, 4), InputError);
}

TEST(optical_elements, analyzer_channel_examples) {
    AnalyzerSetting hhhh;
    hhhh.photons.assign(4, PhotonAnalyzer::polarizer(0));
    EXPECT_LT(max_abs_diff(analyzer_filter(hhhh).matrix(), density_from_ket(ket_basis("HHHH", 4)).matrix()), 1e-15);

    AnalyzerSetting dddd;
    dddd.photons.assign(4, PhotonAnalyzer::polarizer(kPi / 4));
    Ket d4(CVector::Ones(16));
    EXPECT_LT(max_abs_diff(analyzer_filter(dddd).matrix(), density_from_ket(d4).matrix()), 1e-15);
}

TEST(optical_elements, hv_polarizer_set_is_complete) {
    std::mt19937_64 rng(35);
    DensityMatrix rho = random_density(16, 4, rng);
    double total = 0;
    for (size_t b = 0; b < 16; b++) {
        AnalyzerSetting a;
        for (size_t q = 0; q < 4; q++) {
            a.photons.push_back(PhotonAnalyzer::polarizer(((b >> (3 - q)) & 1) ? kPi / 2 : 0));
        }
        std::vector<Operator> k{analyzer_filter(a)};
        total += apply_channel(rho, k).weight;
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(optical_elements, analyzer_effect_is_rank_one_projector) {
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> angle(0, kPi);
    for (int trial = 0; trial < 50; trial++) {
        PhotonAnalyzer a{angle(rng), angle(rng), angle(rng)};
        Operator e = analyzer_effect(a);
        EXPECT_LT(max_abs_diff((e * e).matrix(), e.matrix()), 1e-12);
        EXPECT_NEAR(e.matrix().trace().real(), 1.0, 1e-12);
    }
}

TEST(optical_elements, analyzer_json_round_trip) {
    AnalyzerSetting a;
    a.photons.push_back(PhotonAnalyzer{deg_to_rad(45), deg_to_rad(22.5), 0});
    a.photons.push_back(PhotonAnalyzer::polarizer(deg_to_rad(90)));
    nlohmann::json j = to_json(a);
    EXPECT_DOUBLE_EQ(j[0]["qwp"].get<double>(), 45);
    EXPECT_DOUBLE_EQ(j[0]["hwp"].get<double>(), 22.5);
    EXPECT_FALSE(j[1].contains("qwp"));
    AnalyzerSetting back = analyzer_from_json(j);
    ASSERT_EQ(back.photons.size(), 2u);
    EXPECT_NEAR(*back.photons[0].qwp, a.photons[0].qwp.value(), 1e-15);
    EXPECT_NEAR(back.photons[1].pol, a.photons[1].pol, 1e-15);
    EXPECT_THROW(analyzer_from_json(nlohmann::json::parse(R"([{"qwp": 1}])")), InputError);
    EXPECT_THROW(analyzer_from_json(nlohmann::json::parse(R"([{"pol": 1, "x": 2}])")), InputError);
    EXPECT_THROW(analyzer_from_json(nlohmann::json::parse(R"({"pol": 1})")), InputError);
}
