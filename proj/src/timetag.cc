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

#include "ghzsim/timetag.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <thread>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "ghzsim/errors.h"
#include "ghzsim/rng.h"

namespace ghzsim {

namespace {

// Gaussian jitter is truncated at this many sigmas so chunk boundaries are exact.
constexpr double kJitterClamp = 8.0;
// Idler delays beyond this many coherence times are treated as impossible when
// sizing fourfold-mode neighborhoods (probability e^-30).
constexpr double kWaveformCutoff = 30.0;
// Full-mode generation grid; part of the stream definition.
constexpr double kFullSlice = 1e-3;
constexpr size_t kSlicesPerStep = 16;
// Fourfold-mode sparse-process grid.
constexpr double kSparseSlice = 1.0;

// RNG stream namespaces.
enum : uint64_t {
    kStreamEmission = 10,  // + source
    kStreamEvent = 20,     // + source
    kStreamDark = 30,      // + channel
    kStreamSparse = 40,
    kStreamSparseEvent = 41,
    kStreamCluster = 42,
    kStreamDenseEvent = 43,
};

constexpr uint8_t kSignalBit = 1;
constexpr uint8_t kIdlerBit = 2;

struct Emission {
    double t;
    uint64_t key;
    uint8_t source;
    uint8_t mask;
    bool claimed = false;
};

uint8_t signal_channel(size_t source) {
    return source == 0 ? 0 : 3;
}
uint8_t own_port(size_t source) {
    return source == 0 ? 1 : 2;
}
uint8_t other_port(size_t source) {
    return source == 0 ? 2 : 1;
}

double detectable_fraction(const SourceParams &s) {
    double miss = 1 - s.arm_efficiency;
    return 1 - miss * miss;
}

// Draws the mask of a pair known to have at least one detectable photon.
uint8_t draw_mask(const SourceParams &s, double u) {
    double eta = s.arm_efficiency;
    double q = detectable_fraction(s);
    double both = eta * eta / q;
    double one = eta * (1 - eta) / q;
    if (u < both) {
        return kSignalBit | kIdlerBit;
    }
    return u < both + one ? kSignalBit : kIdlerBit;
}

int64_t to_ps(double seconds) {
    return static_cast<int64_t>(std::llround(seconds * 1e12));
}

template <typename T>
size_t sample_cdf(const std::vector<T> &, const std::vector<double> &cdf, double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    size_t k = static_cast<size_t>(it - cdf.begin());
    return std::min(k, cdf.size() - 1);
}

template <typename T>
std::vector<double> build_cdf(const std::vector<T> &outcomes) {
    std::vector<double> cdf;
    double acc = 0;
    for (const auto &o : outcomes) {
        acc += std::max(o.probability, 0.0);
        cdf.push_back(acc);
    }
    if (acc <= 0) {
        throw NumericalError("outcome table has zero total probability");
    }
    for (double &c : cdf) {
        c /= acc;
    }
    return cdf;
}

// Inversion sampler; used for the small means that dominate cluster generation.
uint64_t poisson_small(CounterRng &rng, double mean) {
    if (mean > 30) {
        boost::random::poisson_distribution<int64_t, double> dist(mean);
        return static_cast<uint64_t>(dist(rng));
    }
    double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    uint64_t k = 0;
    while (u >= cdf && k < 1000) {
        k++;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

}  // namespace

void RunConfig::validate() const {
    if (!(duration > 0) || !std::isfinite(duration)) {
        throw InputError("duration must be positive");
    }
    for (const auto &s : sources) {
        s.validate();
    }
    if (!(xi.xi >= 0 && xi.xi <= 1)) {
        throw InputError("indistinguishability must lie in [0, 1]");
    }
    if (analyzers && analyzers->photons.size() != kNumChannels) {
        throw InputError("analyzer setting must list one entry per detector (4)");
    }
    if (!(jitter_sigma >= 0) || !(dead_time >= 0)) {
        throw InputError("jitter and dead time must be nonnegative");
    }
    if (!(interference_window > 0) || !(fourfold_window > 0)) {
        throw InputError("windows must be positive");
    }
    if (!std::isfinite(hom_delay)) {
        throw InputError("hom_delay must be finite");
    }
    if (workers < 1) {
        throw InputError("workers must be at least 1");
    }
}

DetectionModel::DetectionModel(const RunConfig &cfg) {
    std::array<Operator, kNumChannels> effect{Operator::identity(2), Operator::identity(2), Operator::identity(2),
                                              Operator::identity(2)};
    if (cfg.analyzers) {
        for (size_t c = 0; c < kNumChannels; c++) {
            effect[c] = analyzer_effect(cfg.analyzers->photons[c]);
        }
    }
    const CMatrix id2 = CMatrix::Identity(2, 2);
    auto pass_or_block = [&](size_t c, bool pass) -> CMatrix {
        return pass ? effect[c].matrix() : CMatrix(id2 - effect[c].matrix());
    };
    auto kron2 = [](const CMatrix &a, const CMatrix &b) { return tensor(Operator(a), Operator(b)).matrix(); };

    std::array<DensityMatrix, 2> pairs{
        pair_state(PairNoiseModel{cfg.sources[0].werner_p}, cfg.sources[0].bell_phase),
        pair_state(PairNoiseModel{cfg.sources[1].werner_p}, cfg.sources[1].bell_phase),
    };

    for (size_t s = 0; s < 2; s++) {
        const CMatrix &rho = pairs[s].matrix();  // (signal, idler)
        size_t sig = signal_channel(s);
        auto &table = isolated_[s];
        for (bool ps : {true, false}) {
            if (cfg.pbs) {
                for (size_t pol = 0; pol < 2; pol++) {
                    CMatrix proj = CMatrix::Zero(2, 2);
                    proj(static_cast<Eigen::Index>(pol), static_cast<Eigen::Index>(pol)) = 1;
                    double p = (kron2(pass_or_block(sig, ps), proj) * rho).trace().real();
                    uint8_t ch = pol == 0 ? own_port(s) : other_port(s);
                    double q = effect[ch].matrix()(static_cast<Eigen::Index>(pol), static_cast<Eigen::Index>(pol)).real();
                    table.push_back({ps, ch, true, p * q});
                    table.push_back({ps, ch, false, p * (1 - q)});
                }
            } else {
                uint8_t ch = own_port(s);
                for (bool pi : {true, false}) {
                    double p = (kron2(pass_or_block(sig, ps), pass_or_block(ch, pi)) * rho).trace().real();
                    table.push_back({ps, ch, pi, p});
                }
            }
        }
        isolated_cdf_[s] = build_cdf(table);
    }

    if (!cfg.pbs) {
        return;
    }
    double tc = 0.5 * (cfg.sources[0].coherence_time + cfg.sources[1].coherence_time);
    coherence_ = hom_envelope(cfg.hom_delay, cfg.xi, tc, cfg.hom_shape);
    // Photon order 1, 2, 3, 4; source 1's pair is stored (signal=4, idler=3).
    const size_t swap[2] = {1, 0};
    DensityMatrix input = tensor(pairs[0], permute_qubits(pairs[1], swap));
    auto post = pbs_postselect(input, 1, 2, coherence_);
    if (!post.state) {
        return;
    }
    interfering_ = *post.state;
    const CMatrix &rho = interfering_->matrix();
    CMatrix hh = CMatrix::Zero(16, 16);
    CMatrix vv = CMatrix::Zero(16, 16);
    for (Eigen::Index k = 0; k < 16; k++) {
        size_t b2 = (static_cast<size_t>(k) >> 2) & 1;
        size_t b3 = (static_cast<size_t>(k) >> 1) & 1;
        if (b2 == 0 && b3 == 0) {
            hh(k, k) = 1;
        } else if (b2 == 1 && b3 == 1) {
            vv(k, k) = 1;
        }
    }
    CMatrix d_hh = hh * rho * hh;
    CMatrix d_vv = vv * rho * vv;
    for (uint8_t pattern = 0; pattern < 16; pattern++) {
        CMatrix f = pass_or_block(0, pattern & 1);
        for (size_t c = 1; c < kNumChannels; c++) {
            f = kron2(f, pass_or_block(c, (pattern >> c) & 1));
        }
        double p = std::max(0.0, (f * rho).trace().real());
        double w_hh = std::max(0.0, (f * d_hh).trace().real());
        double w_vv = std::max(0.0, (f * d_vv).trace().real());
        double frac_hh = w_hh + w_vv > 0 ? w_hh / (w_hh + w_vv) : 0.5;
        joint_.push_back({pattern, true, p * frac_hh});
        joint_.push_back({pattern, false, p * (1 - frac_hh)});
    }
    joint_cdf_ = build_cdf(joint_);
}

const DetectionModel::PairOutcome &DetectionModel::sample_isolated(size_t source, double u) const {
    return isolated_[source][sample_cdf(isolated_[source], isolated_cdf_[source], u)];
}

const DetectionModel::JointOutcome &DetectionModel::sample_joint(double u) const {
    return joint_[sample_cdf(joint_, joint_cdf_, u)];
}

namespace {

// Per-event random draws, always taken in the same order.
struct EventDraws {
    double u;
    double tau;
    double jitter_signal;
    double jitter_idler;
};

class EventSampler {
   public:
    EventSampler(const RunConfig &cfg, const DetectionModel &model) : cfg_(cfg), model_(model) {
    }

    EventDraws draw(const Emission &e) const {
        CounterRng rng(e.key);
        EventDraws d;
        d.u = rng.uniform();
        boost::random::exponential_distribution<double> wave(1.0 / cfg_.sources[e.source].coherence_time);
        d.tau = wave(rng);
        d.jitter_signal = jitter(rng);
        d.jitter_idler = jitter(rng);
        return d;
    }

    void isolated(const Emission &e, TagStream &out) const {
        EventDraws d = draw(e);
        const auto &o = model_.sample_isolated(e.source, d.u);
        if ((e.mask & kSignalBit) && o.signal_passes) {
            push(out, signal_channel(e.source), e.t + d.jitter_signal);
        }
        if ((e.mask & kIdlerBit) && o.idler_passes) {
            push(out, o.idler_channel, e.t + d.tau + d.jitter_idler);
        }
    }

    void joint(const Emission &a, const Emission &b, TagStream &out) const {
        EventDraws da = draw(a);
        EventDraws db = draw(b);
        const auto &o = model_.sample_joint(da.u);
        if ((a.mask & kSignalBit) && (o.pass_mask & 1)) {
            push(out, 0, a.t + da.jitter_signal);
        }
        if ((b.mask & kSignalBit) && (o.pass_mask & 8)) {
            push(out, 3, b.t + db.jitter_signal);
        }
        uint8_t ch_photon2 = o.photon2_on_channel1 ? 1 : 2;
        uint8_t ch_photon3 = o.photon2_on_channel1 ? 2 : 1;
        if ((a.mask & kIdlerBit) && (o.pass_mask & (1 << ch_photon2))) {
            push(out, ch_photon2, a.t + da.tau + da.jitter_idler);
        }
        if ((b.mask & kIdlerBit) && (o.pass_mask & (1 << ch_photon3))) {
            push(out, ch_photon3, b.t + db.tau + db.jitter_idler);
        }
    }

    bool has_joint() const {
        return !model_.joint().empty();
    }

   private:
    double jitter(CounterRng &rng) const {
        if (cfg_.jitter_sigma <= 0) {
            return 0;
        }
        boost::random::normal_distribution<double> n(0.0, cfg_.jitter_sigma);
        double lim = kJitterClamp * cfg_.jitter_sigma;
        return std::clamp(n(rng), -lim, lim);
    }

    void push(TagStream &out, uint8_t ch, double t) const {
        if (t < 0 || t >= cfg_.duration) {
            return;
        }
        out.push_back(TimeTag{ch, to_ps(t)});
    }

    const RunConfig &cfg_;
    const DetectionModel &model_;
};

// Greedy interference pairing: source-0 emissions in time order each claim
// the nearest unclaimed source-1 emission within the window.
struct PairingJob {
    Emission a;
    std::optional<Emission> b;
};

void sort_tags(TagStream &tags) {
    std::sort(tags.begin(), tags.end(), [](const TimeTag &x, const TimeTag &y) {
        return x.time_ps != y.time_ps ? x.time_ps < y.time_ps : x.channel < y.channel;
    });
}

class DeadTimeFilter {
   public:
    explicit DeadTimeFilter(double dead_time) : dead_ps_(to_ps(dead_time)) {
        last_.fill(std::numeric_limits<int64_t>::min());
    }
    void apply(std::span<const TimeTag> in, TagStream &out) {
        for (const auto &t : in) {
            if (dead_ps_ > 0 && last_[t.channel] != std::numeric_limits<int64_t>::min() &&
                t.time_ps - last_[t.channel] < dead_ps_) {
                continue;
            }
            last_[t.channel] = t.time_ps;
            out.push_back(t);
        }
    }

   private:
    int64_t dead_ps_;
    std::array<int64_t, kNumChannels> last_{};
};

template <typename F>
void parallel_for(size_t n, unsigned workers, F &&f) {
    if (workers <= 1 || n < 2) {
        for (size_t i = 0; i < n; i++) {
            f(i);
        }
        return;
    }
    std::vector<std::thread> threads;
    unsigned w = std::min<unsigned>(workers, static_cast<unsigned>(n));
    for (unsigned k = 0; k < w; k++) {
        threads.emplace_back([&, k] {
            for (size_t i = k; i < n; i += w) {
                f(i);
            }
        });
    }
    for (auto &t : threads) {
        t.join();
    }
}

// Samples tags for a list of jobs, sharded across workers.
void run_jobs(const EventSampler &sampler, const std::vector<PairingJob> &jobs, unsigned workers, TagStream &out) {
    size_t shards = std::max<size_t>(1, std::min<size_t>(workers, jobs.size() / 4096 + 1));
    std::vector<TagStream> parts(shards);
    size_t per = (jobs.size() + shards - 1) / shards;
    parallel_for(shards, workers, [&](size_t k) {
        size_t lo = k * per;
        size_t hi = std::min(jobs.size(), lo + per);
        for (size_t i = lo; i < hi; i++) {
            if (jobs[i].b) {
                sampler.joint(jobs[i].a, *jobs[i].b, parts[k]);
            } else {
                sampler.isolated(jobs[i].a, parts[k]);
            }
        }
    });
    for (auto &p : parts) {
        out.insert(out.end(), p.begin(), p.end());
    }
}

}  // namespace

struct RunGenerator::Impl {
    RunConfig cfg;
    DetectionModel model;
    EventSampler sampler;
    DeadTimeFilter dead;

    // Full mode.
    uint64_t next_slice = 0;
    uint64_t total_slices = 0;
    std::deque<Emission> pending[2];
    TagStream pending_tags;
    bool done = false;

    explicit Impl(RunConfig c) : cfg(std::move(c)), model(cfg), sampler(cfg, model), dead(cfg.dead_time) {
        total_slices = static_cast<uint64_t>(std::ceil(cfg.duration / kFullSlice));
        if (total_slices == 0) {
            total_slices = 1;
        }
    }

    double jitter_reach() const {
        return kJitterClamp * cfg.jitter_sigma;
    }

    void generate_slice(uint64_t k, std::array<std::vector<Emission>, 2> &em, TagStream &darks) const {
        double lo = static_cast<double>(k) * kFullSlice;
        double hi = std::min(cfg.duration, lo + kFullSlice);
        for (size_t s = 0; s < 2; s++) {
            const auto &src = cfg.sources[s];
            double rate = src.pair_rate * detectable_fraction(src);
            if (rate <= 0) {
                continue;
            }
            CounterRng rng(derive_key(cfg.seed, {kStreamEmission + s, k}));
            boost::random::exponential_distribution<double> gap(rate);
            uint64_t idx = 0;
            for (double t = lo + gap(rng); t < hi; t += gap(rng)) {
                uint8_t mask = draw_mask(src, rng.uniform());
                em[s].push_back(Emission{t, derive_key(cfg.seed, {kStreamEvent + s, k, idx}), static_cast<uint8_t>(s), mask});
                idx++;
            }
        }
        for (size_t c = 0; c < kNumChannels; c++) {
            double rate = cfg.sources[c < 2 ? 0 : 1].dark_rate;
            if (rate <= 0) {
                continue;
            }
            CounterRng rng(derive_key(cfg.seed, {kStreamDark + c, k}));
            boost::random::exponential_distribution<double> gap(rate);
            for (double t = lo + gap(rng); t < hi; t += gap(rng)) {
                darks.push_back(TimeTag{static_cast<uint8_t>(c), to_ps(t)});
            }
        }
    }

    bool step_full(TagStream &out) {
        if (done) {
            return false;
        }
        uint64_t first = next_slice;
        uint64_t last = std::min(total_slices, first + kSlicesPerStep);
        next_slice = last;
        bool final_step = last >= total_slices;

        size_t n = last - first;
        std::vector<std::array<std::vector<Emission>, 2>> em(n);
        std::vector<TagStream> darks(n);
        parallel_for(n, cfg.workers, [&](size_t i) { generate_slice(first + i, em[i], darks[i]); });
        for (size_t i = 0; i < n; i++) {
            for (size_t s = 0; s < 2; s++) {
                pending[s].insert(pending[s].end(), em[i][s].begin(), em[i][s].end());
            }
            pending_tags.insert(pending_tags.end(), darks[i].begin(), darks[i].end());
        }

        double step_end = static_cast<double>(last) * kFullSlice;
        double w = cfg.interference_window;
        double limit_a = final_step ? std::numeric_limits<double>::infinity() : step_end - w;
        double limit_b = final_step ? std::numeric_limits<double>::infinity() : limit_a - w;

        std::vector<PairingJob> jobs;
        bool pairing = sampler.has_joint();
        auto &as = pending[0];
        auto &bs = pending[1];
        while (!as.empty() && as.front().t < limit_a) {
            Emission a = as.front();
            as.pop_front();
            std::optional<Emission> partner;
            if (pairing) {
                auto it = std::lower_bound(bs.begin(), bs.end(), a.t - w,
                                           [](const Emission &e, double t) { return e.t < t; });
                Emission *best = nullptr;
                for (; it != bs.end() && it->t <= a.t + w; ++it) {
                    if (it->claimed) {
                        continue;
                    }
                    if (best == nullptr || std::abs(it->t - a.t) < std::abs(best->t - a.t)) {
                        best = &*it;
                    }
                }
                if (best != nullptr) {
                    best->claimed = true;
                    partner = *best;
                }
            }
            jobs.push_back(PairingJob{a, partner});
        }
        while (!bs.empty() && bs.front().t < limit_b) {
            if (!bs.front().claimed) {
                jobs.push_back(PairingJob{bs.front(), std::nullopt});
            }
            bs.pop_front();
        }
        run_jobs(sampler, jobs, cfg.workers, pending_tags);

        sort_tags(pending_tags);
        size_t cut = pending_tags.size();
        if (!final_step) {
            int64_t watermark = to_ps(limit_b - jitter_reach()) - 1;
            cut = static_cast<size_t>(
                std::lower_bound(pending_tags.begin(), pending_tags.end(), watermark,
                                 [](const TimeTag &t, int64_t v) { return t.time_ps < v; }) -
                pending_tags.begin());
        }
        dead.apply(std::span<const TimeTag>(pending_tags.data(), cut), out);
        pending_tags.erase(pending_tags.begin(), pending_tags.begin() + static_cast<std::ptrdiff_t>(cut));
        if (final_step) {
            done = true;
        }
        return true;
    }

    // Fourfold mode: the whole run in one pass.
    void run_fourfold(TagStream &out) const {
        double max_tc = std::max(cfg.sources[0].coherence_time, cfg.sources[1].coherence_time);
        double reach = cfg.fourfold_window + 2 * jitter_reach() + kWaveformCutoff * max_tc;
        reach = std::max(reach, cfg.interference_window);

        // Sparse processes: complete pairs per source, then darks per channel.
        std::array<double, 6> sparse_rate{};
        for (size_t s = 0; s < 2; s++) {
            double eta = cfg.sources[s].arm_efficiency;
            sparse_rate[s] = cfg.sources[s].pair_rate * eta * eta;
        }
        for (size_t c = 0; c < kNumChannels; c++) {
            sparse_rate[2 + c] = cfg.sources[c < 2 ? 0 : 1].dark_rate;
        }
        // Dense processes: pairs with exactly one detectable photon.
        // Order: (source 0, signal), (source 0, idler), (source 1, signal), (source 1, idler).
        std::array<double, 4> dense_rate{};
        for (size_t s = 0; s < 2; s++) {
            double eta = cfg.sources[s].arm_efficiency;
            double one = cfg.sources[s].pair_rate * eta * (1 - eta);
            dense_rate[2 * s] = one;
            dense_rate[2 * s + 1] = one;
        }
        double sparse_total = 0;
        for (double r : sparse_rate) {
            sparse_total += r;
        }
        double dense_total = 0;
        for (double r : dense_rate) {
            dense_total += r;
        }

        struct Sparse {
            double t;
            uint64_t slice;
            uint64_t idx;
            double survive;  // uniform deciding the dense count of a lone event
            uint8_t kind;    // 0,1 complete pair of source; 2..5 dark on channel kind-2
        };
        auto member_key = [&](const Sparse &m) { return derive_key(cfg.seed, {kStreamSparseEvent, m.slice, m.idx}); };
        uint64_t cluster_base = 0;
        // Most clusters hold one sparse event; their Poisson weight is cached.
        const double single_mean = dense_total * 2 * reach;
        const double single_p0 = std::exp(-single_mean);
        // Lone events below these thresholds cannot reach four clicks.
        const double lone_pair_cut = single_p0 * (1 + single_mean);
        const double lone_dark_cut = single_p0 * (1 + single_mean + 0.5 * single_mean * single_mean);
        struct Cluster {
            double lo = 0;
            double hi = 0;
            std::vector<Sparse> members;
        };

        TagStream tags;
        auto finish = [&](Cluster &cl) {
            if (cl.members.empty()) {
                return;
            }
            const Sparse &head = cl.members.front();
            uint64_t n_dense = 0;
            if (cl.members.size() == 1) {
                // Fewer than four potential clicks unless enough dense events join.
                size_t need = head.kind < 2 ? 2 : 3;
                double u = head.survive;
                double p = single_p0;
                double cdf = p;
                while (u >= cdf && n_dense < 1000) {
                    n_dense++;
                    p *= single_mean / static_cast<double>(n_dense);
                    cdf += p;
                }
                if (n_dense < need) {
                    return;
                }
            }
            CounterRng rng(mix64(cluster_base ^ mix64(head.idx)));
            if (cl.members.size() > 1 && dense_total > 0) {
                n_dense = poisson_small(rng, dense_total * (cl.hi - cl.lo));
            }
            size_t potential = n_dense;
            bool ch0 = false;
            bool ch3 = false;
            for (const auto &m : cl.members) {
                potential += m.kind < 2 ? 2 : 1;
                ch0 |= m.kind == 0 || m.kind == 2;
                ch3 |= m.kind == 1 || m.kind == 5;
            }
            if (potential < 4) {
                return;
            }
            std::array<std::vector<Emission>, 2> em;
            TagStream local;
            for (const auto &m : cl.members) {
                if (m.kind < 2) {
                    em[m.kind].push_back(Emission{m.t, member_key(m), m.kind, kSignalBit | kIdlerBit});
                } else {
                    double t = m.t;
                    if (t >= 0 && t < cfg.duration) {
                        local.push_back(TimeTag{static_cast<uint8_t>(m.kind - 2), to_ps(t)});
                    }
                }
            }
            for (uint64_t j = 0; j < n_dense; j++) {
                double t = cl.lo + rng.uniform() * (cl.hi - cl.lo);
                double u = rng.uniform() * dense_total;
                size_t kind = 0;
                while (kind + 1 < dense_rate.size() && u >= dense_rate[kind]) {
                    u -= dense_rate[kind];
                    kind++;
                }
                size_t s = kind / 2;
                uint8_t mask = kind % 2 == 0 ? kSignalBit : kIdlerBit;
                if (t < 0 || t >= cfg.duration) {
                    continue;
                }
                ch0 |= s == 0 && mask == kSignalBit;
                ch3 |= s == 1 && mask == kSignalBit;
                em[s].push_back(
                    Emission{t, derive_key(cfg.seed, {kStreamDenseEvent, head.slice, head.idx, j}), static_cast<uint8_t>(s), mask});
            }
            if (!ch0 || !ch3) {
                return;
            }
            for (auto &v : em) {
                std::sort(v.begin(), v.end(), [](const Emission &x, const Emission &y) { return x.t < y.t; });
            }
            std::vector<PairingJob> jobs;
            std::vector<bool> claimed(em[1].size(), false);
            for (const auto &a : em[0]) {
                std::optional<size_t> best;
                if (sampler.has_joint()) {
                    for (size_t i = 0; i < em[1].size(); i++) {
                        if (claimed[i] || std::abs(em[1][i].t - a.t) > cfg.interference_window) {
                            continue;
                        }
                        if (!best || std::abs(em[1][i].t - a.t) < std::abs(em[1][*best].t - a.t)) {
                            best = i;
                        }
                    }
                }
                if (best) {
                    claimed[*best] = true;
                    jobs.push_back(PairingJob{a, em[1][*best]});
                } else {
                    jobs.push_back(PairingJob{a, std::nullopt});
                }
            }
            for (size_t i = 0; i < em[1].size(); i++) {
                if (!claimed[i]) {
                    jobs.push_back(PairingJob{em[1][i], std::nullopt});
                }
            }
            run_jobs(sampler, jobs, 1, local);
            tags.insert(tags.end(), local.begin(), local.end());
        };

        Cluster cluster;
        if (sparse_total > 0) {
            auto slices = static_cast<uint64_t>(std::ceil(cfg.duration / kSparseSlice));
            for (uint64_t k = 0; k < slices; k++) {
                double lo = static_cast<double>(k) * kSparseSlice;
                double hi = std::min(cfg.duration, lo + kSparseSlice);
                CounterRng rng(derive_key(cfg.seed, {kStreamSparse, k}));
                uint64_t slice_base = derive_key(cfg.seed, {kStreamCluster, k});
                boost::random::exponential_distribution<double> gap(sparse_total);
                uint64_t idx = 0;
                for (double t = lo + gap(rng); t < hi; t += gap(rng), idx++) {
                    double u = rng.uniform() * sparse_total;
                    uint8_t kind = 0;
                    while (kind + 1u < sparse_rate.size() && u >= sparse_rate[kind]) {
                        u -= sparse_rate[kind];
                        kind++;
                    }
                    Sparse e{t, k, idx, rng.uniform(), kind};
                    if (!cluster.members.empty() && t - reach <= cluster.hi) {
                        cluster.hi = t + reach;
                        cluster.members.push_back(e);
                    } else {
                        if (cluster.members.size() > 1 ||
                            (cluster.members.size() == 1 &&
                             cluster.members[0].survive >=
                                 (cluster.members[0].kind < 2 ? lone_pair_cut : lone_dark_cut))) {
                            finish(cluster);
                        }
                        cluster_base = slice_base;
                        cluster.members.clear();
                        cluster.lo = t - reach;
                        cluster.hi = t + reach;
                        cluster.members.push_back(e);
                    }
                }
            }
        }
        finish(cluster);

        sort_tags(tags);
        DeadTimeFilter filter(cfg.dead_time);
        filter.apply(tags, out);
    }
};

RunGenerator::RunGenerator(RunConfig cfg) {
    cfg.validate();
    impl_ = std::make_unique<Impl>(std::move(cfg));
}

RunGenerator::~RunGenerator() = default;

bool RunGenerator::next_chunk(TagStream &out) {
    if (impl_->cfg.mode == SimulationMode::kFourfold) {
        if (impl_->done) {
            return false;
        }
        impl_->run_fourfold(out);
        impl_->done = true;
        return true;
    }
    return impl_->step_full(out);
}

TagStream simulate_run(const RunConfig &cfg) {
    RunGenerator gen(cfg);
    TagStream out;
    while (gen.next_chunk(out)) {
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'T', '1'};
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderBytes = 16;
constexpr size_t kRecordBytes = 12;

void put_le(unsigned char *p, uint64_t v, size_t n) {
    for (size_t i = 0; i < n; i++) {
        p[i] = static_cast<unsigned char>(v >> (8 * i));
    }
}

uint64_t get_le(const unsigned char *p, size_t n) {
    uint64_t v = 0;
    for (size_t i = 0; i < n; i++) {
        v |= static_cast<uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

void encode_header(unsigned char *buf, uint64_t count) {
    std::memcpy(buf, kMagic, 4);
    put_le(buf + 4, kVersion, 4);
    put_le(buf + 8, count, 8);
}

void encode_record(unsigned char *buf, const TimeTag &t) {
    buf[0] = t.channel;
    buf[1] = buf[2] = buf[3] = 0;
    put_le(buf + 4, static_cast<uint64_t>(t.time_ps), 8);
}

}  // namespace

TagWriter::TagWriter(const std::filesystem::path &path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) {
        throw InputError("cannot open " + path.string() + " for writing");
    }
    unsigned char header[kHeaderBytes];
    encode_header(header, 0);
    out_.write(reinterpret_cast<const char *>(header), kHeaderBytes);
}

TagWriter::~TagWriter() {
    if (!closed_) {
        try {
            close();
        } catch (...) {
        }
    }
}

void TagWriter::append(std::span<const TimeTag> tags) {
    std::vector<unsigned char> buf(tags.size() * kRecordBytes);
    for (size_t i = 0; i < tags.size(); i++) {
        if (tags[i].time_ps < last_time_ || tags[i].channel >= kNumChannels) {
            throw InputError("tags must be sorted, nonnegative, on channels 0..3");
        }
        last_time_ = tags[i].time_ps;
        encode_record(buf.data() + i * kRecordBytes, tags[i]);
    }
    out_.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
    count_ += tags.size();
}

void TagWriter::close() {
    if (closed_) {
        return;
    }
    unsigned char header[kHeaderBytes];
    encode_header(header, count_);
    out_.seekp(0);
    out_.write(reinterpret_cast<const char *>(header), kHeaderBytes);
    out_.close();
    closed_ = true;
    if (!out_) {
        throw InputError("failed writing time-tag file");
    }
}

void write_tags(std::span<const TimeTag> tags, const std::filesystem::path &path) {
    TagWriter w(path);
    w.append(tags);
    w.close();
}

TagStream read_tags(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string(), 0);
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < kHeaderBytes) {
        throw FormatError("file shorter than the 16-byte header", bytes.size());
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("bad magic, expected QTT1", 0);
    }
    if (get_le(bytes.data() + 4, 4) != kVersion) {
        throw FormatError("unsupported version", 4);
    }
    uint64_t count = get_le(bytes.data() + 8, 8);
    uint64_t available = (bytes.size() - kHeaderBytes) / kRecordBytes;
    if (count > available) {
        throw FormatError("truncated record " + std::to_string(available), kHeaderBytes + available * kRecordBytes);
    }
    if (bytes.size() != kHeaderBytes + count * kRecordBytes) {
        throw FormatError("trailing bytes after last record", kHeaderBytes + count * kRecordBytes);
    }
    TagStream out;
    out.reserve(count);
    int64_t last = 0;
    for (uint64_t k = 0; k < count; k++) {
        size_t off = kHeaderBytes + k * kRecordBytes;
        const unsigned char *r = bytes.data() + off;
        if (r[0] >= kNumChannels) {
            throw FormatError("channel out of range", off);
        }
        if (r[1] != 0 || r[2] != 0 || r[3] != 0) {
            throw FormatError("nonzero reserved bytes", off + 1);
        }
        auto t = static_cast<int64_t>(get_le(r + 4, 8));
        if (t < last) {
            throw FormatError("timestamps decrease", off + 4);
        }
        last = t;
        out.push_back(TimeTag{r[0], t});
    }
    return out;
}

}  // namespace ghzsim
