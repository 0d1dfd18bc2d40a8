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

#include "ghzsim/coincidence.h"

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ghzsim/errors.h"
#include "ghzsim/source_model.h"
#include "test_util.h"

using namespace ghzsim;
using ghzsim::testing::brute_force_count;
using ghzsim::testing::clustered_stream;
using ghzsim::testing::poisson_stream;

namespace {

const double kPi = std::numbers::pi;

/// Quadratic greedy matcher: every unused tag, in stream order, tries to take
/// the earliest unused later tag of each other listed channel within the window.
TagStream tags(std::initializer_list<std::pair<int, double>> list) {
    TagStream out;
    for (auto [ch, t] : list) {
        out.push_back(TimeTag{static_cast<uint8_t>(ch), static_cast<int64_t>(std::llround(t * 1e12))});
    }
    return out;
}

}  // namespace

TEST(coincidence, twofold_examples) {
    TagStream s = tags({{0, 0}, {1, 1e-9}});
    EXPECT_EQ(count_coincidences(s, {{0, 1}, 2.5e-9}), 1u);
    EXPECT_EQ(count_coincidences(s, {{0, 1}, 0.5e-9}), 0u);
    EXPECT_EQ(count_coincidences(TagStream{}, {{0, 1}, 2.5e-9}), 0u);
}

TEST(coincidence, fourfold_window_is_max_spread) {
    CoincidenceSpec spec{{0, 1, 2, 3}, 2.5e-9};
    EXPECT_EQ(count_coincidences(tags({{1, 0}, {0, 1e-9}, {3, 2e-9}, {2, 2.5e-9}}), spec), 1u);
    EXPECT_EQ(count_coincidences(tags({{1, 0}, {0, 1e-9}, {3, 2e-9}, {2, 2.501e-9}}), spec), 0u);
    // Each tag joins one group only.
    EXPECT_EQ(count_coincidences(tags({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {0, 1e-9}}), spec), 1u);
}

TEST(coincidence, spec_validation) {
    EXPECT_THROW(count_coincidences(TagStream{}, {{0}, 1e-9}), InputError);
    EXPECT_THROW(count_coincidences(TagStream{}, {{0, 0}, 1e-9}), InputError);
    EXPECT_THROW(count_coincidences(TagStream{}, {{0, 1}, 0}), InputError);
    EXPECT_THROW(count_coincidences(TagStream{}, {{0, 1, 2}, 1e-9}), InputError);
    EXPECT_THROW(count_coincidences(TagStream{}, {{0, 7}, 1e-9}), InputError);
}

TEST(coincidence, unsorted_stream_rejected) {
    EXPECT_THROW(count_coincidences(tags({{0, 2e-9}, {1, 1e-9}}), {{0, 1}, 2.5e-9}), InputError);
    CoincidenceCounter c({{0, 1}, 2.5e-9});
    c.feed(tags({{0, 5e-9}}));
    EXPECT_THROW(c.feed(tags({{1, 4e-9}})), InputError);
}

TEST(coincidence, greedy_counter_matches_brute_force) {
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<size_t> cut(1, 500);
    const std::vector<std::vector<uint8_t>> specs{{0, 1}, {1, 0}, {2, 3}, {0, 1, 2, 3}, {3, 1, 0, 2}};
    for (int trial = 0; trial < 100; trial++) {
        TagStream s = clustered_stream(rng, 2000);
        const auto &channels = specs[trial % specs.size()];
        int64_t window = trial % 2 ? 2500 : 6000;
        uint64_t expected = brute_force_count(s, channels, window);
        CoincidenceSpec spec{channels, static_cast<double>(window) * 1e-12};
        EXPECT_EQ(count_coincidences(s, spec), expected) << trial;

        // Same count when fed in arbitrary chunks.
        CoincidenceCounter c(spec);
        for (size_t i = 0; i < s.size();) {
            size_t n = std::min(cut(rng), s.size() - i);
            c.feed(std::span(s).subspan(i, n));
            i += n;
        }
        EXPECT_EQ(c.finish(), expected) << trial;
    }
}

TEST(coincidence, accidental_rate_formula) {
    std::mt19937_64 rng(52);
    const double r = 1e4;
    const double w = 1e-6;
    const double duration = 20;
    std::vector<double> rates{r, r};
    TagStream s = poisson_stream(rates, duration, rng);
    // A pair counts when |t_b - t_a| <= w in either order.
    double expected = 2 * r * r * w * duration;
    auto n = static_cast<double>(count_coincidences(s, {{0, 1}, w}));
    EXPECT_NEAR(n, expected, 4 * std::sqrt(expected));
}

TEST(coincidence, basis_labels_and_analyzers) {
    EXPECT_EQ(basis_label(0), "HHHH");
    EXPECT_EQ(basis_label(1), "HHHV");
    EXPECT_EQ(basis_label(9), "VHHV");
    EXPECT_EQ(basis_label(15), "VVVV");
    EXPECT_THROW(basis_label(16), InputError);
    AnalyzerSetting a = hv_analyzers(9);
    ASSERT_EQ(a.photons.size(), 4u);
    EXPECT_NEAR(a.photons[0].pol, kPi / 2, 1e-15);
    EXPECT_NEAR(a.photons[1].pol, 0, 1e-15);
    EXPECT_NEAR(a.photons[3].pol, kPi / 2, 1e-15);
}

TEST(coincidence, fourfold_by_basis_empty) {
    std::vector<TagStream> runs(16);
    auto counts = fourfold_by_basis(runs, 2.5e-9);
    for (uint64_t c : counts) {
        EXPECT_EQ(c, 0u);
    }
    std::vector<TagStream> short_list(3);
    EXPECT_THROW(fourfold_by_basis(short_list, 2.5e-9), InputError);
}

TEST(coincidence, cross_correlation_single_pair) {
    Histogram h = cross_correlation(tags({{0, 10e-9}, {1, 11e-9}}), 0, 1, 100e-12, 5e-9);
    ASSERT_EQ(h.counts.size(), 100u);
    EXPECT_NEAR(h.origin, -5e-9, 1e-21);
    uint64_t total = 0;
    for (size_t i = 0; i < h.counts.size(); i++) {
        total += h.counts[i];
        if (h.counts[i]) {
            EXPECT_LE(h.bin_start(i), 1e-9 + 1e-18);
            EXPECT_GT(h.bin_start(i) + h.bin_width, 1e-9);
        }
    }
    EXPECT_EQ(total, 1u);
}

TEST(coincidence, cross_correlation_matches_all_pairs_oracle) {
    std::mt19937_64 rng(53);
    std::uniform_int_distribution<size_t> cut(1, 300);
    for (int trial = 0; trial < 20; trial++) {
        TagStream s = clustered_stream(rng, 3000);
        const int64_t span = 8000;
        const int64_t bin = 250;
        std::vector<uint64_t> oracle(2 * span / bin, 0);
        for (const auto &a : s) {
            for (const auto &b : s) {
                int64_t d = b.time_ps - a.time_ps;
                if (a.channel == 0 && b.channel == 2 && d >= -span && d < span) {
                    oracle[static_cast<size_t>((d + span) / bin)]++;
                }
            }
        }
        EXPECT_EQ(cross_correlation(s, 0, 2, bin * 1e-12, span * 1e-12).counts, oracle);
        CrossCorrelator cc(0, 2, bin * 1e-12, span * 1e-12);
        for (size_t i = 0; i < s.size();) {
            size_t n = std::min(cut(rng), s.size() - i);
            cc.feed(std::span(s).subspan(i, n));
            i += n;
        }
        EXPECT_EQ(cc.finish().counts, oracle);
    }
}

TEST(coincidence, independent_streams_give_flat_histogram) {
    std::mt19937_64 rng(54);
    std::vector<double> rates{2e5, 2e5};
    TagStream s = poisson_stream(rates, 5, rng);
    Histogram h = cross_correlation(s, 0, 1, 1e-9, 50e-9);
    double mean = 0;
    for (uint64_t c : h.counts) {
        mean += static_cast<double>(c);
    }
    mean /= static_cast<double>(h.counts.size());
    double chi2 = 0;
    for (uint64_t c : h.counts) {
        chi2 += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean) / mean;
    }
    boost::math::chi_squared dist(static_cast<double>(h.counts.size() - 1));
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
    EXPECT_NEAR(normalized_peak(h, 10e-9), 1.0, 0.2);
}

TEST(coincidence, cauchy_schwarz_examples) {
    EXPECT_NEAR(cauchy_schwarz_factor(200, 2, 2), 10000, 1e-9);
    EXPECT_NEAR(cauchy_schwarz_factor(1, 1, 1), 1, 1e-15);
    EXPECT_NEAR(cauchy_schwarz_factor(2, 2, 2), 1, 1e-15);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(0.1, 300);
    for (int i = 0; i < 100; i++) {
        double a = u(rng), b = u(rng), c = u(rng);
        EXPECT_NEAR(cauchy_schwarz_factor(a, b, c), a * a / (b * c), 1e-12 * a * a / (b * c));
    }
    EXPECT_THROW(cauchy_schwarz_factor(0, 2, 2), InputError);
    EXPECT_THROW(cauchy_schwarz_factor(10, -2, 2), InputError);
    EXPECT_THROW(cauchy_schwarz_factor(10, 2, 0), InputError);
}

TEST(coincidence, visibility_examples) {
    EXPECT_NEAR(visibility(100, 0).value, 1, 1e-15);
    EXPECT_NEAR(visibility(90, 10).value, 0.8, 1e-15);
    EXPECT_THROW(visibility(0, 0), InputError);
    EXPECT_THROW(visibility(1, 2), InputError);
    EXPECT_THROW(visibility(1, -1), InputError);
}

TEST(coincidence, visibility_stderr_is_poisson_propagation) {
    std::mt19937_64 rng(56);
    std::uniform_real_distribution<double> u(0, 1000);
    for (int i = 0; i < 100; i++) {
        double a = u(rng), b = u(rng);
        double hi = std::max(a, b), lo = std::min(a, b);
        Visibility v = visibility(hi, lo);
        EXPECT_GE(v.value, 0);
        EXPECT_LE(v.value, 1);
        // Numerical partial derivatives, each count with variance equal to itself.
        const double h = 1e-4;
        auto f = [](double x, double y) { return (x - y) / (x + y); };
        double dx = (f(hi + h, lo) - f(hi - h, lo)) / (2 * h);
        double dy = (f(hi, lo + h) - f(hi, lo - h)) / (2 * h);
        EXPECT_NEAR(v.stderr_value, std::sqrt(dx * dx * hi + dy * dy * lo), 1e-6);
    }
}

TEST(coincidence, hom_series_rates) {
    std::vector<double> delays{-1e-9, 0, 1e-9};
    std::vector<uint64_t> counts{100, 25, 0};
    std::vector<double> durations{10, 5, 2};
    auto s = hom_series(delays, counts, durations);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_DOUBLE_EQ(s[0].rate, 10);
    EXPECT_DOUBLE_EQ(s[0].stderr_rate, 1);
    EXPECT_DOUBLE_EQ(s[1].rate, 5);
    EXPECT_DOUBLE_EQ(s[2].rate, 0);
    std::vector<double> bad{0, 1, 1};
    EXPECT_THROW(hom_series(delays, counts, bad), InputError);
}

TEST(coincidence, fit_hom_recovers_exact_envelope) {
    const double tc = 295e-12;
    for (HomKind kind : {HomKind::kPeak, HomKind::kDip}) {
        for (double v : {0.3, 0.8, 0.97}) {
            std::vector<HomPoint> series;
            for (double m : {-10.0, -4.0, -2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0}) {
                double d = m * tc;
                double sign = kind == HomKind::kPeak ? 1 : -1;
                double rate = 2.0 * (1 + sign * hom_envelope(d, {v}, tc));
                series.push_back({d, rate, 0.01});
            }
            HomFit fit = fit_hom(series, kind);
            EXPECT_NEAR(fit.baseline, 2.0, 1e-6);
            EXPECT_NEAR(fit.visibility, v, 1e-6);
            EXPECT_NEAR(fit.width, tc, 1e-3 * tc);
            EXPECT_GT(fit.visibility_stderr, 0);
            EXPECT_NEAR(visibility(series, kind).value, v, 1e-6);
        }
    }
}

TEST(coincidence, fit_hom_stderr_matches_resampled_scatter) {
    const double tc = 295e-12;
    const double duration = 9000;
    std::vector<double> delays;
    for (double m : {-10.0, -4.0, -2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0}) {
        delays.push_back(m * tc);
    }
    std::mt19937_64 rng(17);
    for (HomKind kind : {HomKind::kPeak, HomKind::kDip}) {
        double sign = kind == HomKind::kPeak ? 1 : -1;
        std::vector<double> fitted;
        double reported = 0;
        const int trials = 400;
        for (int t = 0; t < trials; t++) {
            std::vector<uint64_t> counts;
            for (double d : delays) {
                double mean = 0.09 * duration * (1 + sign * hom_envelope(d, {0.8}, tc));
                counts.push_back(std::poisson_distribution<uint64_t>(mean)(rng));
            }
            auto series = hom_series(delays, counts, std::vector<double>(delays.size(), duration));
            HomFit f = fit_hom(series, kind);
            fitted.push_back(f.visibility);
            reported += f.visibility_stderr / trials;
        }
        double mean = 0;
        for (double v : fitted) {
            mean += v / trials;
        }
        double var = 0;
        for (double v : fitted) {
            var += (v - mean) * (v - mean) / (trials - 1);
        }
        EXPECT_NEAR(reported, std::sqrt(var), 0.2 * std::sqrt(var));
        EXPECT_GT(reported, 0.005);
    }
}

TEST(coincidence, fit_fringe_recovers_exact_curve) {
    for (double theta0 : {0.0, 0.3, kPi / 4, 2.8}) {
        std::vector<double> angles;
        std::vector<double> counts;
        for (int k = 0; k < 24; k++) {
            double t = kPi * k / 24;
            angles.push_back(t);
            counts.push_back(1000 + 930 * std::cos(2 * (t - theta0)));
        }
        FringeFit f = fit_fringe(angles, counts);
        EXPECT_NEAR(f.offset, 1000, 1e-6);
        EXPECT_NEAR(f.amplitude, 930, 1e-6);
        EXPECT_NEAR(std::remainder(f.phase - theta0, kPi), 0, 1e-9);
        EXPECT_NEAR(f.visibility.value, 0.93, 1e-9);
    }
}

TEST(coincidence, fit_delay_recovers_expected_histogram) {
    const double tc = 295e-12;
    const double sigma = 400e-12 * std::sqrt(2.0);
    const double bin = 50e-12;
    Histogram h;
    h.bin_width = bin;
    h.origin = -20e-9;
    h.counts.resize(800);
    for (size_t i = 0; i < h.counts.size(); i++) {
        double lo = h.bin_start(i) - 0.3e-9;
        double mass = pair_delay_cdf(lo + bin, tc, sigma) - pair_delay_cdf(lo, tc, sigma);
        h.counts[i] = static_cast<uint64_t>(std::llround(1e8 * mass + 500));
    }
    DelayFit f = fit_delay_histogram(h, 10e-9);
    EXPECT_NEAR(f.tau, tc, 0.01 * tc);
    EXPECT_NEAR(f.sigma, sigma, 0.01 * sigma);
    EXPECT_NEAR(f.offset, 0.3e-9, 5e-12);
    EXPECT_NEAR(f.background, 500, 1);
    EXPECT_GT(f.tau_stderr, 0);
}

TEST(coincidence, csv_writers) {
    Histogram h;
    h.bin_width = 50e-12;
    h.origin = -100e-12;
    h.counts = {1, 2, 3, 4};
    std::ostringstream a;
    write_histogram_csv(h, a);
    EXPECT_EQ(a.str(), "bin_start_ps,counts\r\n-100,1\r\n-50,2\r\n0,3\r\n50,4\r\n");

    std::array<uint64_t, 16> counts{};
    counts[0] = 350;
    std::ostringstream b;
    write_basis_csv(counts, 600, b);
    EXPECT_EQ(b.str().substr(0, 40), "basis,counts,duration_s\r\nHHHH,350,600\r\nH");

    std::vector<HomPoint> series{{-1e-9, 2.5, 0.1}};
    std::ostringstream c;
    write_hom_csv(series, c);
    EXPECT_EQ(c.str().substr(0, 24), "delay_ps,rate,stderr\r\n-1");
}
