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

#ifndef GHZSIM_TIMETAG_H
#define GHZSIM_TIMETAG_H

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ghzsim/optical_elements.h"
#include "ghzsim/source_model.h"

namespace ghzsim {

/// One detector click. Channels 0..3 are the detectors behind photons 1, 2', 3', 4.
struct TimeTag {
    uint8_t channel = 0;
    int64_t time_ps = 0;

    bool operator==(const TimeTag &) const = default;
};

using TagStream = std::vector<TimeTag>;

inline constexpr size_t kNumChannels = 4;

enum class SimulationMode {
    /// Every detector click of the run.
    kFull,
    /// Only clicks that can belong to a fourfold coincidence: neighborhoods
    /// of complete pairs and dark counts, where all contributing processes
    /// are simulated exactly. Singles and twofold rates are not preserved.
    kFourfold,
};

struct RunConfig {
    double duration = 1.0;  // s
    uint64_t seed = 1;
    std::array<SourceParams, 2> sources{};
    Indistinguishability xi{0.80};
    /// Analyzer per detector channel; absent means no polarization filtering.
    std::optional<AnalyzerSetting> analyzers;
    double jitter_sigma = 400e-12;  // s
    double dead_time = 0;           // s
    /// Idlers 2 and 3 meet at the PBS; when false each photon has its own detector.
    bool pbs = true;
    /// Relative wavepacket delay between the sources entering the interference weight.
    double hom_delay = 0;  // s
    HomShape hom_shape = HomShape::kExponential;
    /// Pairs from the two sources emitted closer than this interfere at the PBS.
    double interference_window = 2.5e-9;  // s
    /// Coincidence window the fourfold-thinned mode must preserve.
    double fourfold_window = 2.5e-9;  // s
    SimulationMode mode = SimulationMode::kFull;
    unsigned workers = 1;

    void validate() const;
};

/// Per-event outcome distributions of the detection model.
///
/// Photon 1 (signal of source 0) and photon 4 (signal of source 1) go to
/// channels 0 and 3. The idlers, photons 2 and 3, go to channels 1 and 2;
/// with the PBS in place an H idler keeps its own port and a V idler is
/// reflected into the other one. Pairs emitted within the interference
/// window are sampled jointly from the post-selected four-photon state.
class DetectionModel {
   public:
    explicit DetectionModel(const RunConfig &cfg);

    /// Isolated pair outcome: which channel the idler reaches and whether
    /// each photon passes its analyzer.
    struct PairOutcome {
        bool signal_passes;
        uint8_t idler_channel;
        bool idler_passes;
        double probability;
    };
    /// Interfering outcome: pass pattern on channels 0..3 (bit c) and whether
    /// photon 2 (rather than photon 3) reached channel 1.
    struct JointOutcome {
        uint8_t pass_mask;
        bool photon2_on_channel1;
        double probability;
    };

    std::span<const PairOutcome> isolated(size_t source) const {
        return isolated_[source];
    }
    std::span<const JointOutcome> joint() const {
        return joint_;
    }
    /// Post-selected state used for interfering pairs.
    const DensityMatrix &interfering_state() const {
        return *interfering_;
    }
    /// Coherence factor applied to the GHZ cross terms.
    double coherence() const {
        return coherence_;
    }

    const PairOutcome &sample_isolated(size_t source, double u) const;
    const JointOutcome &sample_joint(double u) const;

   private:
    std::array<std::vector<PairOutcome>, 2> isolated_;
    std::array<std::vector<double>, 2> isolated_cdf_;
    std::vector<JointOutcome> joint_;
    std::vector<double> joint_cdf_;
    std::optional<DensityMatrix> interfering_;
    double coherence_ = 1;
};

/// Produces the stream of a run in sorted chunks. Concatenating all chunks
/// gives the output of simulate_run, independently of `workers`.
class RunGenerator {
   public:
    explicit RunGenerator(RunConfig cfg);
    ~RunGenerator();
    RunGenerator(const RunGenerator &) = delete;
    RunGenerator &operator=(const RunGenerator &) = delete;

    /// Appends the next chunk to `out`. Returns false once the run is exhausted.
    bool next_chunk(TagStream &out);

   private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Whole run in memory, sorted by time.
TagStream simulate_run(const RunConfig &cfg);

/// QTT1 file: 16-byte header ("QTT1", u32 version, u64 count) then 12-byte records.
void write_tags(std::span<const TimeTag> tags, const std::filesystem::path &path);
TagStream read_tags(const std::filesystem::path &path);

/// Incremental QTT1 writer for runs too large to hold in memory.
class TagWriter {
   public:
    explicit TagWriter(const std::filesystem::path &path);
    ~TagWriter();
    void append(std::span<const TimeTag> tags);
    /// Patches the record count into the header and closes the file.
    void close();
    uint64_t count() const {
        return count_;
    }

   private:
    std::ofstream out_;
    uint64_t count_ = 0;
    int64_t last_time_ = 0;
    bool closed_ = false;
};

}  // namespace ghzsim

#endif
