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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "ghzsim/errors.h"

namespace ghzsim {

namespace {

int64_t to_ps(double seconds) {
    return static_cast<int64_t>(std::llround(seconds * 1e12));
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void check_sorted(std::span<const TimeTag> chunk, int64_t &last) {
    for (const auto &t : chunk) {
        if (t.time_ps < last) {
            throw InputError("time-tag stream is not sorted");
        }
        if (t.channel >= kNumChannels) {
            throw InputError("channel id out of range");
        }
        last = t.time_ps;
    }
}

}  // namespace

void Histogram::validate() const {
    if (!(bin_width > 0)) {
        throw InputError("histogram bin width must be positive");
    }
    if (counts.empty()) {
        throw InputError("histogram needs at least one bin");
    }
}

void CoincidenceSpec::validate() const {
    if (channels.size() != 2 && channels.size() != 4) {
        throw InputError("coincidence spec needs 2 or 4 channels");
    }
    for (size_t i = 0; i < channels.size(); i++) {
        if (channels[i] >= kNumChannels) {
            throw InputError("channel id out of range");
        }
        for (size_t j = 0; j < i; j++) {
            if (channels[i] == channels[j]) {
                throw InputError("coincidence channels must be distinct");
            }
        }
    }
    if (!(window > 0)) {
        throw InputError("coincidence window must be positive");
    }
}

CoincidenceCounter::CoincidenceCounter(CoincidenceSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    window_ps_ = to_ps(spec_.window);
    slot_.fill(-1);
    for (size_t i = 0; i < spec_.channels.size(); i++) {
        slot_[spec_.channels[i]] = static_cast<int>(i);
    }
    next_.assign(spec_.channels.size(), 0);
}

void CoincidenceCounter::feed(std::span<const TimeTag> chunk) {
    if (finished_) {
        throw InputError("counter already finished");
    }
    check_sorted(chunk, last_time_);
    for (const auto &t : chunk) {
        if (slot_[t.channel] >= 0) {
            buf_.push_back(t);
            used_.push_back(0);
        }
    }
    process(false);
}

uint64_t CoincidenceCounter::finish() {
    if (!finished_) {
        process(true);
        finished_ = true;
    }
    return count_;
}

void CoincidenceCounter::process(bool final) {
    const size_t n = buf_.size();
    const size_t k = spec_.channels.size();
    std::array<size_t, kNumChannels> member{};
    for (; pos_ < n; pos_++) {
        const TimeTag anchor = buf_[pos_];
        if (used_[pos_]) {
            continue;
        }
        if (!final && last_time_ - anchor.time_ps <= window_ps_) {
            break;
        }
        const int own = slot_[anchor.channel];
        const int64_t limit = anchor.time_ps + window_ps_;
        bool complete = true;
        for (size_t c = 0; c < k; c++) {
            if (static_cast<int>(c) == own) {
                continue;
            }
            size_t &p = next_[c];
            if (p <= pos_) {
                p = pos_ + 1;
            }
            while (p < n && (buf_[p].channel != spec_.channels[c] || used_[p])) {
                p++;
            }
            if (p >= n || buf_[p].time_ps > limit) {
                complete = false;
                break;
            }
            member[c] = p;
        }
        if (!complete) {
            continue;
        }
        for (size_t c = 0; c < k; c++) {
            if (static_cast<int>(c) != own) {
                used_[member[c]] = 1;
            }
        }
        used_[pos_] = 1;
        count_++;
    }
    if (pos_ > 4096 && pos_ * 2 > n) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
        used_.erase(used_.begin(), used_.begin() + static_cast<std::ptrdiff_t>(pos_));
        for (auto &p : next_) {
            p = std::max(p, pos_) - pos_;
        }
        pos_ = 0;
    }
}

uint64_t count_coincidences(std::span<const TimeTag> stream, const CoincidenceSpec &spec) {
    CoincidenceCounter counter(spec);
    counter.feed(stream);
    return counter.finish();
}

std::string basis_label(size_t index) {
    if (index >= 16) {
        throw InputError("basis index must be below 16");
    }
    std::string s(4, 'H');
    for (size_t q = 0; q < 4; q++) {
        if ((index >> (3 - q)) & 1) {
            s[q] = 'V';
        }
    }
    return s;
}

AnalyzerSetting hv_analyzers(size_t index) {
    std::string label = basis_label(index);
    AnalyzerSetting a;
    for (char c : label) {
        a.photons.push_back(PhotonAnalyzer::polarizer(c == 'H' ? 0.0 : std::numbers::pi / 2));
    }
    return a;
}

std::array<uint64_t, 16> fourfold_by_basis(std::span<const TagStream> runs, double window) {
    if (runs.size() != 16) {
        throw InputError("fourfold_by_basis needs one run per basis (16)");
    }
    std::array<uint64_t, 16> out{};
    CoincidenceSpec spec{{0, 1, 2, 3}, window};
    for (size_t i = 0; i < 16; i++) {
        out[i] = count_coincidences(runs[i], spec);
    }
    return out;
}

CrossCorrelator::CrossCorrelator(uint8_t ch_a, uint8_t ch_b, double bin_width, double span)
    : ch_a_(ch_a), ch_b_(ch_b), span_ps_(to_ps(span)), bin_width_(bin_width) {
    if (ch_a >= kNumChannels || ch_b >= kNumChannels) {
        throw InputError("channel id out of range");
    }
    if (!(bin_width > 0) || !(span > 0)) {
        throw InputError("bin width and span must be positive");
    }
    int64_t bin_ps = to_ps(bin_width);
    if (bin_ps <= 0) {
        throw InputError("bin width below 1 ps");
    }
    auto bins = static_cast<size_t>((2 * span_ps_ + bin_ps - 1) / bin_ps);
    hist_.bin_width = static_cast<double>(bin_ps) * 1e-12;
    hist_.origin = -static_cast<double>(span_ps_) * 1e-12;
    hist_.counts.assign(bins, 0);
}

void CrossCorrelator::feed(std::span<const TimeTag> chunk) {
    check_sorted(chunk, last_time_);
    for (const auto &t : chunk) {
        if (t.channel == ch_a_) {
            a_.push_back(t.time_ps);
        }
        if (t.channel == ch_b_) {
            b_.push_back(t.time_ps);
        }
    }
    process(false);
}

Histogram CrossCorrelator::finish() {
    process(true);
    return hist_;
}

void CrossCorrelator::process(bool final) {
    const int64_t bin_ps = to_ps(hist_.bin_width);
    while (!a_.empty()) {
        int64_t ta = a_.front();
        if (!final && last_time_ < ta + span_ps_) {
            break;
        }
        while (!b_.empty() && b_.front() < ta - span_ps_) {
            b_.pop_front();
        }
        for (auto it = b_.begin(); it != b_.end() && *it < ta + span_ps_; ++it) {
            auto bin = static_cast<size_t>((*it - ta + span_ps_) / bin_ps);
            if (bin < hist_.counts.size()) {
                hist_.counts[bin]++;
            }
        }
        a_.pop_front();
    }
    if (a_.empty()) {
        // No pending A tag can pair with B tags older than the newest time minus span.
        while (!b_.empty() && b_.front() < last_time_ - span_ps_) {
            b_.pop_front();
        }
    }
}

Histogram cross_correlation(std::span<const TimeTag> stream, uint8_t ch_a, uint8_t ch_b, double bin_width,
                            double span) {
    CrossCorrelator c(ch_a, ch_b, bin_width, span);
    c.feed(stream);
    return c.finish();
}

double normalized_peak(const Histogram &h, double exclude) {
    h.validate();
    double peak = 0;
    double sum = 0;
    size_t n = 0;
    for (size_t i = 0; i < h.counts.size(); i++) {
        auto c = static_cast<double>(h.counts[i]);
        peak = std::max(peak, c);
        if (std::abs(h.bin_center(i)) > exclude) {
            sum += c;
            n++;
        }
    }
    if (n == 0 || sum <= 0) {
        throw NumericalError("no background bins to normalize the correlation peak");
    }
    return peak / (sum / static_cast<double>(n));
}

double cauchy_schwarz_factor(double g_si_peak, double g_ss, double g_ii) {
    if (!(g_si_peak > 0) || !(g_ss > 0) || !(g_ii > 0)) {
        throw InputError("correlation functions must be positive");
    }
    return g_si_peak * g_si_peak / (g_ss * g_ii);
}

std::vector<HomPoint> hom_series(std::span<const double> delays, std::span<const uint64_t> counts,
                                 std::span<const double> durations) {
    if (delays.size() != counts.size() || delays.size() != durations.size()) {
        throw InputError("delay, count and duration lists differ in length");
    }
    std::vector<HomPoint> out;
    for (size_t i = 0; i < delays.size(); i++) {
        if (!(durations[i] > 0)) {
            throw InputError("durations must be positive");
        }
        auto n = static_cast<double>(counts[i]);
        out.push_back({delays[i], n / durations[i], std::sqrt(n) / durations[i]});
    }
    return out;
}

std::vector<HomPoint> hom_scan(std::span<const double> delays, std::span<const TagStream> runs,
                               std::span<const double> durations, double window) {
    if (runs.size() != delays.size()) {
        throw InputError("one run per delay is required");
    }
    std::vector<uint64_t> counts;
    CoincidenceSpec spec{{0, 1, 2, 3}, window};
    for (const auto &r : runs) {
        counts.push_back(count_coincidences(r, spec));
    }
    return hom_series(delays, counts, durations);
}

Visibility visibility(double max, double min) {
    if (!(min >= 0) || !(max >= min)) {
        throw InputError("visibility needs max >= min >= 0");
    }
    double s = max + min;
    if (s <= 0) {
        throw InputError("visibility undefined for max = min = 0");
    }
    return {(max - min) / s, std::sqrt(4 * max * min / (s * s * s))};
}

namespace {

struct LinearFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;
    double chi2;
};

LinearFit weighted_lstsq(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const Eigen::VectorXd &w) {
    Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
    Eigen::MatrixXd normal = xtw * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
        throw NumericalError("fit design is singular");
    }
    LinearFit f;
    f.coef = ldlt.solve(xtw * y);
    f.cov = ldlt.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
    Eigen::VectorXd r = y - x * f.coef;
    f.chi2 = r.dot(w.asDiagonal() * r);
    return f;
}

Eigen::VectorXd hom_weights(std::span<const HomPoint> s) {
    double min_err = std::numeric_limits<double>::infinity();
    for (const auto &p : s) {
        if (p.stderr_rate > 0) {
            min_err = std::min(min_err, p.stderr_rate);
        }
    }
    if (!std::isfinite(min_err)) {
        min_err = 1;
    }
    Eigen::VectorXd w(static_cast<Eigen::Index>(s.size()));
    for (size_t i = 0; i < s.size(); i++) {
        double e = s[i].stderr_rate > 0 ? s[i].stderr_rate : min_err;
        w[static_cast<Eigen::Index>(i)] = 1 / (e * e);
    }
    return w;
}

LinearFit hom_profile(std::span<const HomPoint> s, const Eigen::VectorXd &w, double width) {
    auto n = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; i++) {
        const auto &p = s[static_cast<size_t>(i)];
        x(i, 0) = 1;
        x(i, 1) = std::exp(-2 * std::abs(p.delay) / width);
        y[i] = p.rate;
    }
    return weighted_lstsq(x, y, w);
}

}  // namespace

HomFit fit_hom(std::span<const HomPoint> series, HomKind kind) {
    if (series.size() < 3) {
        throw InputError("HOM fit needs at least 3 delays");
    }
    double max_d = 0;
    double min_d = std::numeric_limits<double>::infinity();
    for (const auto &p : series) {
        double d = std::abs(p.delay);
        max_d = std::max(max_d, d);
        if (d > 0) {
            min_d = std::min(min_d, d);
        }
    }
    if (!(max_d > 0)) {
        throw InputError("HOM fit needs nonzero delays");
    }
    Eigen::VectorXd w = hom_weights(series);
    auto chi2 = [&](double log_width) {
        try {
            return hom_profile(series, w, std::exp(log_width)).chi2;
        } catch (const NumericalError &) {
            return std::numeric_limits<double>::infinity();
        }
    };
    // Coarse scan of the width, then golden-section refinement.
    double lo = std::log(min_d / 20);
    double hi = std::log(max_d * 20);
    const int grid = 400;
    int best = 0;
    double best_chi2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; i++) {
        double c = chi2(lo + (hi - lo) * i / grid);
        if (c < best_chi2) {
            best_chi2 = c;
            best = i;
        }
    }
    double step = (hi - lo) / grid;
    double a = lo + (best - 1) * step;
    double b = lo + (best + 1) * step;
    const double g = (std::sqrt(5.0) - 1) / 2;
    double x1 = b - g * (b - a);
    double x2 = a + g * (b - a);
    double f1 = chi2(x1);
    double f2 = chi2(x2);
    for (int it = 0; it < 100 && b - a > 1e-10; it++) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = chi2(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = chi2(x2);
        }
    }
    double width = std::exp(0.5 * (a + b));
    LinearFit lin = hom_profile(series, w, width);
    double base = lin.coef[0];
    double amp = lin.coef[1];
    if (!(std::abs(base) > 0)) {
        throw NumericalError("HOM fit baseline vanished");
    }
    double sign = kind == HomKind::kPeak ? 1 : -1;

    // Errors from the full three-parameter Jacobian at the optimum; the width enters as log(width) to keep
    // the columns on one scale.
    auto n = static_cast<Eigen::Index>(series.size());
    Eigen::MatrixXd jac(n, 3);
    for (Eigen::Index i = 0; i < n; i++) {
        double d = std::abs(series[static_cast<size_t>(i)].delay);
        double e = std::exp(-2 * d / width);
        jac(i, 0) = 1;
        jac(i, 1) = e;
        jac(i, 2) = amp * e * 2 * d / width;
    }
    Eigen::MatrixXd info = jac.transpose() * w.asDiagonal() * jac;
    Eigen::MatrixXd cov = info.completeOrthogonalDecomposition().pseudoInverse();
    double v = sign * amp / base;
    Eigen::Vector3d grad(-sign * amp / (base * base), sign / base, 0);
    HomFit f;
    f.baseline = base;
    f.visibility = v;
    f.width = width;
    f.visibility_stderr = std::sqrt(std::max(0.0, grad.dot(cov * grad)));
    f.width_stderr = width * std::sqrt(std::max(0.0, cov(2, 2)));
    return f;
}

Visibility visibility(std::span<const HomPoint> series, HomKind kind) {
    HomFit f = fit_hom(series, kind);
    return {f.visibility, f.visibility_stderr};
}

FringeFit fit_fringe(std::span<const double> angles, std::span<const double> counts) {
    if (angles.size() != counts.size() || angles.size() < 3) {
        throw InputError("fringe fit needs at least 3 matching angle/count pairs");
    }
    auto n = static_cast<Eigen::Index>(angles.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; i++) {
        double th = angles[static_cast<size_t>(i)];
        double c = counts[static_cast<size_t>(i)];
        if (c < 0) {
            throw InputError("counts must be nonnegative");
        }
        x(i, 0) = 1;
        x(i, 1) = std::cos(2 * th);
        x(i, 2) = std::sin(2 * th);
        y[i] = c;
        w[i] = 1 / std::max(c, 1.0);
    }
    LinearFit lin = weighted_lstsq(x, y, w);
    double a = lin.coef[0];
    double c = lin.coef[1];
    double s = lin.coef[2];
    double b = std::hypot(c, s);
    if (!(a > 0)) {
        throw NumericalError("fringe offset is not positive");
    }
    FringeFit f;
    f.offset = a;
    f.amplitude = b;
    f.phase = 0.5 * std::atan2(s, c);
    double v = b / a;
    Eigen::Vector3d grad(-v / a, b > 0 ? c / (a * b) : 0, b > 0 ? s / (a * b) : 0);
    f.visibility = {v, std::sqrt(std::max(0.0, grad.dot(lin.cov * grad)))};
    return f;
}

namespace {

// Exponentially modified Gaussian density; stable for large arguments.
double exgauss_pdf(double x, double mu, double sigma, double tau) {
    double z = (mu - x) / tau + sigma * sigma / (2 * tau * tau);
    double b = (mu - x + sigma * sigma / tau) / (std::numbers::sqrt2 * sigma);
    double v;
    if (b < 5) {
        v = std::exp(z) * std::erfc(b);
    } else {
        // erfc(b) = exp(-b^2) erfcx(b), asymptotic series for erfcx.
        double b2 = b * b;
        double erfcx = (1 - 1 / (2 * b2) + 3 / (4 * b2 * b2) - 15 / (8 * b2 * b2 * b2)) / (b * std::sqrt(std::numbers::pi));
        v = std::exp(z - b2) * erfcx;
    }
    return v / (2 * tau);
}

struct DelayFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w;
    double bin;
    double scale;   // time unit of the offset parameter
    double amount;  // unit of the amplitude parameter

    int inputs() const {
        return 4;
    }
    int values() const {
        return static_cast<int>(x.size());
    }
    // p = (mu / scale, log sigma, log tau, amplitude / amount)
    int operator()(const Eigen::VectorXd &p, Eigen::VectorXd &r) const {
        double sigma = std::exp(p[1]);
        double tau = std::exp(p[2]);
        for (size_t i = 0; i < x.size(); i++) {
            double m = p[3] * amount * bin * exgauss_pdf(x[i], p[0] * scale, sigma, tau);
            r[static_cast<Eigen::Index>(i)] = (y[i] - m) * w[i];
        }
        return 0;
    }
};

}  // namespace

DelayFit fit_delay_histogram(const Histogram &h, double background_exclude) {
    h.validate();
    double bg_sum = 0;
    size_t bg_n = 0;
    for (size_t i = 0; i < h.counts.size(); i++) {
        if (std::abs(h.bin_center(i)) > background_exclude) {
            bg_sum += static_cast<double>(h.counts[i]);
            bg_n++;
        }
    }
    double bg = bg_n > 0 ? bg_sum / static_cast<double>(bg_n) : 0;

    DelayFunctor fn;
    fn.bin = h.bin_width;
    double peak = -1;
    double peak_x = 0;
    double excess = 0;
    double m1 = 0;
    double m2 = 0;
    for (size_t i = 0; i < h.counts.size(); i++) {
        double xc = h.bin_center(i);
        if (std::abs(xc) > background_exclude) {
            continue;
        }
        auto c = static_cast<double>(h.counts[i]);
        double e = c - bg;
        fn.x.push_back(xc);
        fn.y.push_back(e);
        fn.w.push_back(1 / std::sqrt(std::max(c, 1.0)));
        if (e > peak) {
            peak = e;
            peak_x = xc;
        }
        excess += e;
        m1 += e * xc;
        m2 += e * xc * xc;
    }
    if (fn.x.size() < 5 || !(excess > 0)) {
        throw NumericalError("no correlation peak to fit");
    }
    double mean = m1 / excess;
    double var = std::max(m2 / excess - mean * mean, h.bin_width * h.bin_width);
    double sd = std::sqrt(var);

    fn.scale = sd;
    fn.amount = excess;
    Eigen::VectorXd p(4);
    p << (peak_x - 0.3 * sd) / sd, std::log(0.8 * sd), std::log(0.5 * sd), 1.0;
    Eigen::NumericalDiff<DelayFunctor> nd(fn);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<DelayFunctor>> lm(nd);
    lm.parameters.maxfev = 4000;
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-12;
    lm.minimize(p);

    DelayFit f;
    f.offset = p[0] * sd;
    f.sigma = std::exp(p[1]);
    f.tau = std::exp(p[2]);
    f.amplitude = p[3] * excess;
    f.background = bg;
    Eigen::MatrixXd jac(fn.values(), 4);
    nd.df(p, jac);
    Eigen::MatrixXd cov = (jac.transpose() * jac).ldlt().solve(Eigen::MatrixXd::Identity(4, 4));
    f.tau_stderr = f.tau * std::sqrt(std::max(0.0, cov(2, 2)));
    if (!std::isfinite(f.tau)) {
        throw NumericalError("delay fit diverged");
    }
    return f;
}

void write_histogram_csv(const Histogram &h, std::ostream &out) {
    out << "bin_start_ps,counts\r\n";
    for (size_t i = 0; i < h.counts.size(); i++) {
        out << std::llround(h.bin_start(i) * 1e12) << ',' << h.counts[i] << "\r\n";
    }
}

void write_basis_csv(std::span<const uint64_t> counts, double duration, std::ostream &out) {
    if (counts.size() != 16) {
        throw InputError("basis table needs 16 counts");
    }
    out << "basis,counts,duration_s\r\n";
    for (size_t i = 0; i < 16; i++) {
        out << basis_label(i) << ',' << counts[i] << ',' << format_number(duration) << "\r\n";
    }
}

void write_hom_csv(std::span<const HomPoint> series, std::ostream &out) {
    out << "delay_ps,rate,stderr\r\n";
    for (const auto &p : series) {
        out << format_number(p.delay * 1e12) << ',' << format_number(p.rate) << ',' << format_number(p.stderr_rate)
            << "\r\n";
    }
}

}  // namespace ghzsim
