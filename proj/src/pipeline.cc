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

#include "ghzsim/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "ghzsim/errors.h"
#include "ghzsim/rng.h"

namespace ghzsim {

namespace {

// Evaluates f(0..n-1) on up to `workers` threads; results land by index.
template <typename F>
void for_each_run(size_t n, unsigned workers, F &&f) {
    if (workers <= 1 || n < 2) {
        for (size_t i = 0; i < n; i++) {
            f(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    for (unsigned k = 0; k < std::min<size_t>(workers, n); k++) {
        threads.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto &t : threads) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

MleOptions mle_options(const AnalysisOptions &a) {
    MleOptions o;
    o.max_iter = a.mle_max_iter;
    o.tol = a.mle_tol;
    o.dilution = a.mle_dilution;
    return o;
}

}  // namespace

uint64_t batch_seed(uint64_t seed, Batch batch, uint64_t index) {
    return derive_key(seed, {static_cast<uint64_t>(batch), index});
}

uint64_t fourfold_count(const RunConfig &run, double window) {
    RunGenerator gen(run);
    CoincidenceCounter counter(CoincidenceSpec{{0, 1, 2, 3}, window});
    TagStream chunk;
    while (gen.next_chunk(chunk)) {
        counter.feed(chunk);
        chunk.clear();
    }
    return counter.finish();
}

RunConfig batch_run(const ExperimentConfig &cfg, const AnalyzerSetting &analyzers, double duration, uint64_t seed) {
    RunConfig r = cfg.run;
    r.mode = SimulationMode::kFourfold;
    r.analyzers = analyzers;
    r.duration = duration;
    r.seed = seed;
    r.fourfold_window = cfg.analysis.window;
    r.workers = 1;
    return r;
}

DensityMatrix model_state(const RunConfig &run) {
    RunConfig r = run;
    r.pbs = true;
    r.analyzers.reset();
    DetectionModel model(r);
    if (model.joint().empty()) {
        throw NumericalError("post-selection has zero probability for these sources");
    }
    return model.interfering_state();
}

Fig2Result run_fig2(const ExperimentConfig &cfg) {
    cfg.validate();
    Fig2Result out;
    out.duration = cfg.analysis.fig2_duration;
    for_each_run(16, cfg.run.workers, [&](size_t b) {
        RunConfig r = batch_run(cfg, hv_analyzers(b), out.duration, batch_seed(cfg.run.seed, Batch::kFig2, b));
        out.counts[b] = fourfold_count(r, cfg.analysis.window);
    });
    return out;
}

AnalyzerSetting hom_analyzers(HomKind kind) {
    const double deg45 = std::numbers::pi / 4;
    AnalyzerSetting a;
    for (size_t c = 0; c < kNumChannels; c++) {
        a.photons.push_back(PhotonAnalyzer::polarizer(deg45));
    }
    if (kind == HomKind::kDip) {
        a.photons[3] = PhotonAnalyzer::polarizer(-deg45);
    }
    return a;
}

HomCalibration calibrate_xi(const ExperimentConfig &cfg) {
    cfg.validate();
    ExperimentConfig unit = cfg;
    unit.run.xi.xi = 1;
    unit.run.hom_delay = 0;
    std::array<uint64_t, 2> n{};
    for_each_run(2, cfg.run.workers, [&](size_t k) {
        HomKind kind = k == 0 ? HomKind::kPeak : HomKind::kDip;
        RunConfig r = batch_run(unit, hom_analyzers(kind), cfg.analysis.hom_calibration_duration,
                                batch_seed(cfg.run.seed, Batch::kCalibration, k));
        n[k] = fourfold_count(r, cfg.analysis.window);
    });
    Visibility v = visibility(static_cast<double>(n[0]), static_cast<double>(n[1]));
    if (!(v.value > 0)) {
        throw NumericalError("no HOM visibility at xi = 1; cannot calibrate");
    }
    double xi = cfg.analysis.hom_target_visibility / v.value;
    return HomCalibration{v.value, v.stderr_value, std::min(xi, 1.0), xi <= 1};
}

HomResult run_hom(const ExperimentConfig &cfg) {
    cfg.validate();
    HomResult out;
    ExperimentConfig scan = cfg;
    if (cfg.analysis.hom_calibrate) {
        out.calibration = calibrate_xi(cfg);
        scan.run.xi.xi = out.calibration->xi;
    }
    out.xi = scan.run.xi.xi;
    const auto &delays = cfg.analysis.hom_delays;
    size_t n = delays.size();
    std::vector<uint64_t> counts(2 * n);
    for_each_run(2 * n, cfg.run.workers, [&](size_t i) {
        HomKind kind = i < n ? HomKind::kPeak : HomKind::kDip;
        size_t d = i % n;
        RunConfig r = batch_run(scan, hom_analyzers(kind), cfg.analysis.hom_duration,
                                batch_seed(cfg.run.seed, kind == HomKind::kPeak ? Batch::kHomPeak : Batch::kHomDip, d));
        r.hom_delay = delays[d];
        counts[i] = fourfold_count(r, cfg.analysis.window);
    });
    std::vector<double> durations(n, cfg.analysis.hom_duration);
    out.peak = hom_series(delays, std::span(counts).subspan(0, n), durations);
    out.dip = hom_series(delays, std::span(counts).subspan(n, n), durations);
    out.peak_fit = fit_hom(out.peak, HomKind::kPeak);
    out.dip_fit = fit_hom(out.dip, HomKind::kDip);
    return out;
}

std::vector<CountRecord> tomography_counts(const ExperimentConfig &cfg) {
    cfg.validate();
    auto settings = standard_settings();
    if (cfg.analysis.tomography_shots > 0) {
        return simulate_counts(model_state(cfg.run), settings, cfg.analysis.tomography_shots,
                               batch_seed(cfg.run.seed, Batch::kTomography, 0));
    }
    std::vector<CountRecord> out(settings.size());
    for_each_run(settings.size(), cfg.run.workers, [&](size_t s) {
        RunConfig r = batch_run(cfg, settings[s].analyzers(), cfg.analysis.tomography_duration,
                                batch_seed(cfg.run.seed, Batch::kTomography, s));
        out[s] = CountRecord{settings[s], fourfold_count(r, cfg.analysis.window), cfg.analysis.tomography_duration};
    });
    return out;
}

TomographyResult reconstruct(std::span<const CountRecord> records, const ExperimentConfig &cfg) {
    TomographyResult out;
    out.records.assign(records.begin(), records.end());
    MleOptions opts = mle_options(cfg.analysis);
    out.reconstruction = mle_reconstruct(records, opts);
    if (cfg.analysis.bootstrap_resamples > 0) {
        out.bootstrap = bootstrap_fidelity(records, cfg.analysis.bootstrap_resamples,
                                           batch_seed(cfg.run.seed, Batch::kBootstrap, 0), opts);
        out.reconstruction.fidelity_err = out.bootstrap->stderr_value;
    }
    return out;
}

TomographyResult run_tomography(const ExperimentConfig &cfg) {
    auto records = tomography_counts(cfg);
    return reconstruct(records, cfg);
}

}  // namespace ghzsim
