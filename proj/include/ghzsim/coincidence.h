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

#ifndef GHZSIM_COINCIDENCE_H
#define GHZSIM_COINCIDENCE_H

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ghzsim/timetag.h"

namespace ghzsim {

/// Counts in equal bins starting at `origin`. Times in seconds.
struct Histogram {
    double bin_width = 1e-9;
    double origin = 0;
    std::vector<uint64_t> counts;

    void validate() const;
    double bin_start(size_t i) const {
        return origin + static_cast<double>(i) * bin_width;
    }
    double bin_center(size_t i) const {
        return bin_start(i) + 0.5 * bin_width;
    }
};

struct CoincidenceSpec {
    std::vector<uint8_t> channels;  // 2 or 4 distinct ids
    double window = 2.5e-9;         // s

    void validate() const;
};

/// Greedy earliest-match coincidence counting over a sorted stream.
///
/// Tags are visited in stream order. An unused tag on a listed channel
/// anchors a group if every other listed channel has an unused tag later in
/// the stream and no later than anchor + window; the earliest such tag is
/// taken on each channel. Every tag joins at most one group.
class CoincidenceCounter {
   public:
    explicit CoincidenceCounter(CoincidenceSpec spec);

    /// Consumes the next sorted chunk; chunks must continue in time order.
    void feed(std::span<const TimeTag> chunk);
    /// Resolves groups pending at the end of the stream and returns the total.
    uint64_t finish();
    uint64_t count() const {
        return count_;
    }

   private:
    void process(bool final);

    CoincidenceSpec spec_;
    int64_t window_ps_;
    std::array<int, kNumChannels> slot_{};  // channel -> position in spec, or -1
    std::vector<TimeTag> buf_;
    std::vector<uint8_t> used_;
    std::vector<size_t> next_;  // per listed channel: first candidate index in buf_
    size_t pos_ = 0;
    int64_t last_time_ = 0;
    uint64_t count_ = 0;
    bool finished_ = false;
};

/// Throws InputError on an unsorted stream.
uint64_t count_coincidences(std::span<const TimeTag> stream, const CoincidenceSpec &spec);

/// "HHHH" ... "VVVV"; photon 1 is the most significant letter, H before V.
std::string basis_label(size_t index);
/// Polarizers at 0 or 90 degrees on each channel for basis `index`.
AnalyzerSetting hv_analyzers(size_t index);

/// Fourfold counts for 16 runs, one per H/V combination, ordered as basis_label.
std::array<uint64_t, 16> fourfold_by_basis(std::span<const TagStream> runs, double window);

/// All-pairs histogram of t_B - t_A over [-span, span).
class CrossCorrelator {
   public:
    CrossCorrelator(uint8_t ch_a, uint8_t ch_b, double bin_width, double span);
    void feed(std::span<const TimeTag> chunk);
    Histogram finish();

   private:
    void process(bool final);

    uint8_t ch_a_;
    uint8_t ch_b_;
    int64_t span_ps_;
    double bin_width_;
    Histogram hist_;
    std::deque<int64_t> a_;
    std::deque<int64_t> b_;
    int64_t last_time_ = 0;
};

Histogram cross_correlation(std::span<const TimeTag> stream, uint8_t ch_a, uint8_t ch_b, double bin_width,
                            double span);

/// Peak bin over the mean of bins farther than `exclude` from zero delay.
double normalized_peak(const Histogram &h, double exclude);

/// R = g_si^2 / (g_ss g_ii).
double cauchy_schwarz_factor(double g_si_peak, double g_ss, double g_ii);

struct HomPoint {
    double delay;  // s
    double rate;   // 1/s
    double stderr_rate;
};

/// Fourfold rate per delay from one run per delay; stderr is Poisson.
std::vector<HomPoint> hom_scan(std::span<const double> delays, std::span<const TagStream> runs,
                               std::span<const double> durations, double window);
/// Same from fourfold counts already taken.
std::vector<HomPoint> hom_series(std::span<const double> delays, std::span<const uint64_t> counts,
                                 std::span<const double> durations);

struct Visibility {
    double value;
    double stderr_value;
};

/// (max - min)/(max + min) with Poisson error propagation.
Visibility visibility(double max, double min);

enum class HomKind { kPeak, kDip };

struct HomFit {
    double baseline;
    double visibility;
    double width;  // s, decay constant of exp(-2|d|/width)
    double visibility_stderr;
    double width_stderr;
};

/// Weighted fit of B (1 +/- v exp(-2|d|/w)) to a delay series.
HomFit fit_hom(std::span<const HomPoint> series, HomKind kind);

/// Visibility of a series from the fitted envelope.
Visibility visibility(std::span<const HomPoint> series, HomKind kind);

struct FringeFit {
    double offset;
    double amplitude;
    double phase;  // rad, position of the maximum in polarizer angle
    Visibility visibility;
};

/// Poisson-weighted fit of a + b cos(2(theta - theta0)) to counts at polarizer angles (rad).
FringeFit fit_fringe(std::span<const double> angles, std::span<const double> counts);

struct DelayFit {
    double offset;  // s, Gaussian center
    double sigma;   // s
    double tau;     // s, exponential decay constant
    double amplitude;
    double background;  // counts per bin
    double tau_stderr;
};

/// Least-squares fit of an exponential decay convolved with Gaussian jitter
/// to a cross-correlation histogram. The background level is taken from
/// bins farther than `background_exclude` from zero.
DelayFit fit_delay_histogram(const Histogram &h, double background_exclude);

/// CSV with header "bin_start_ps,counts".
void write_histogram_csv(const Histogram &h, std::ostream &out);
/// CSV with header "basis,counts,duration_s".
void write_basis_csv(std::span<const uint64_t> counts, double duration, std::ostream &out);
/// CSV with header "delay_ps,rate,stderr".
void write_hom_csv(std::span<const HomPoint> series, std::ostream &out);

}  // namespace ghzsim

#endif
