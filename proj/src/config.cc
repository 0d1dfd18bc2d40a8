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

#include "ghzsim/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "ghzsim/errors.h"

namespace ghzsim {

namespace {

constexpr double kPs = 1e-12;
constexpr double kDeg = 3.14159265358979323846 / 180;

std::string where(const YAML::Node &n) {
    return "line " + std::to_string(n.Mark().line + 1);
}

void check_keys(const YAML::Node &map, const std::set<std::string> &allowed, const std::string &section) {
    if (!map.IsMap()) {
        throw ConfigError(where(map) + ": '" + section + "' must be a mapping");
    }
    for (const auto &kv : map) {
        auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) {
            throw ConfigError(where(kv.first) + ": unknown key '" + key + "' in '" + section + "'");
        }
    }
}

template <typename T>
void read(const YAML::Node &map, const char *key, T &out) {
    YAML::Node n = map[key];
    if (!n) {
        return;
    }
    try {
        out = n.as<T>();
    } catch (const YAML::Exception &) {
        throw ConfigError(where(n) + ": invalid value for '" + key + "'");
    }
}

void read_scaled(const YAML::Node &map, const char *key, double scale, double &out) {
    double v = out / scale;
    read(map, key, v);
    out = v * scale;
}

void parse_run(const YAML::Node &n, RunConfig &run) {
    check_keys(n,
               {"duration_s", "seed", "mode", "workers", "jitter_sigma_ps", "dead_time_ps", "pbs", "hom_delay_ps",
                "hom_shape", "interference_window_ps"},
               "run");
    read(n, "duration_s", run.duration);
    read(n, "seed", run.seed);
    read(n, "workers", run.workers);
    read_scaled(n, "jitter_sigma_ps", kPs, run.jitter_sigma);
    read_scaled(n, "dead_time_ps", kPs, run.dead_time);
    read(n, "pbs", run.pbs);
    read_scaled(n, "hom_delay_ps", kPs, run.hom_delay);
    read_scaled(n, "interference_window_ps", kPs, run.interference_window);
    if (n["mode"]) {
        auto m = n["mode"].as<std::string>();
        if (m == "full") {
            run.mode = SimulationMode::kFull;
        } else if (m == "fourfold") {
            run.mode = SimulationMode::kFourfold;
        } else {
            throw ConfigError(where(n["mode"]) + ": mode must be 'full' or 'fourfold'");
        }
    }
    if (n["hom_shape"]) {
        auto s = n["hom_shape"].as<std::string>();
        if (s == "exponential") {
            run.hom_shape = HomShape::kExponential;
        } else if (s == "gaussian") {
            run.hom_shape = HomShape::kGaussian;
        } else {
            throw ConfigError(where(n["hom_shape"]) + ": hom_shape must be 'exponential' or 'gaussian'");
        }
    }
}

void parse_source(const YAML::Node &n, SourceParams &s) {
    check_keys(n, {"pair_rate_hz", "arm_efficiency", "dark_rate_hz", "werner_p", "coherence_time_ps", "bell_phase_deg"},
               "sources");
    read(n, "pair_rate_hz", s.pair_rate);
    read(n, "arm_efficiency", s.arm_efficiency);
    read(n, "dark_rate_hz", s.dark_rate);
    read(n, "werner_p", s.werner_p);
    read_scaled(n, "coherence_time_ps", kPs, s.coherence_time);
    read_scaled(n, "bell_phase_deg", kDeg, s.bell_phase);
}

std::optional<AnalyzerSetting> parse_analyzers(const YAML::Node &n) {
    if (n.IsNull()) {
        return std::nullopt;
    }
    if (!n.IsSequence() || n.size() != kNumChannels) {
        throw ConfigError(where(n) + ": 'analyzers' must be null or a list of 4 entries");
    }
    AnalyzerSetting a;
    for (const auto &e : n) {
        check_keys(e, {"qwp_deg", "hwp_deg", "pol_deg"}, "analyzers");
        PhotonAnalyzer p;
        if (e["qwp_deg"]) {
            double v = 0;
            read(e, "qwp_deg", v);
            p.qwp = v * kDeg;
        }
        if (e["hwp_deg"]) {
            double v = 0;
            read(e, "hwp_deg", v);
            p.hwp = v * kDeg;
        }
        double pol = 0;
        if (!e["pol_deg"]) {
            throw ConfigError(where(e) + ": analyzer entry needs 'pol_deg'");
        }
        read(e, "pol_deg", pol);
        p.pol = pol * kDeg;
        a.photons.push_back(p);
    }
    return a;
}

void parse_analysis(const YAML::Node &n, AnalysisOptions &a) {
    check_keys(n,
               {"window_ps", "bin_width_ps", "span_ps", "background_exclude_ps", "g_ss", "g_ii", "fig2_duration_s",
                "hom_delays_ps", "hom_duration_s", "hom_calibrate", "hom_target_visibility",
                "hom_calibration_duration_s", "tomography_duration_s", "tomography_shots", "bootstrap_resamples",
                "mle_max_iter", "mle_tol", "mle_dilution"},
               "analysis");
    read_scaled(n, "window_ps", kPs, a.window);
    read_scaled(n, "bin_width_ps", kPs, a.bin_width);
    read_scaled(n, "span_ps", kPs, a.span);
    read_scaled(n, "background_exclude_ps", kPs, a.background_exclude);
    read(n, "g_ss", a.g_ss);
    read(n, "g_ii", a.g_ii);
    read(n, "fig2_duration_s", a.fig2_duration);
    if (n["hom_delays_ps"]) {
        std::vector<double> ps;
        read(n, "hom_delays_ps", ps);
        a.hom_delays.clear();
        for (double d : ps) {
            a.hom_delays.push_back(d * kPs);
        }
    }
    read(n, "hom_duration_s", a.hom_duration);
    read(n, "hom_calibrate", a.hom_calibrate);
    read(n, "hom_target_visibility", a.hom_target_visibility);
    read(n, "hom_calibration_duration_s", a.hom_calibration_duration);
    read(n, "tomography_duration_s", a.tomography_duration);
    read(n, "tomography_shots", a.tomography_shots);
    read(n, "bootstrap_resamples", a.bootstrap_resamples);
    read(n, "mle_max_iter", a.mle_max_iter);
    read(n, "mle_tol", a.mle_tol);
    read(n, "mle_dilution", a.mle_dilution);
}

void emit_number(YAML::Emitter &e, const char *key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    e << YAML::Key << key << YAML::Value << buf;
}

}  // namespace

void AnalysisOptions::validate() const {
    if (!(window > 0) || !(bin_width > 0) || !(span > 0) || !(background_exclude >= 0)) {
        throw InputError("analysis windows and bins must be positive");
    }
    if (!(g_ss > 0) || !(g_ii > 0)) {
        throw InputError("g_ss and g_ii must be positive");
    }
    if (!(fig2_duration > 0) || !(hom_duration > 0) || !(hom_calibration_duration > 0) ||
        !(tomography_duration > 0)) {
        throw InputError("analysis durations must be positive");
    }
    if (hom_delays.size() < 3) {
        throw InputError("a HOM scan needs at least 3 delays");
    }
    if (!(hom_target_visibility > 0 && hom_target_visibility <= 1)) {
        throw InputError("hom_target_visibility must lie in (0, 1]");
    }
    if (bootstrap_resamples != 0 && bootstrap_resamples < 50) {
        throw InputError("bootstrap_resamples must be 0 or at least 50");
    }
    if (mle_max_iter < 1 || !(mle_tol >= 0) || !(mle_dilution > 0 && mle_dilution <= 1)) {
        throw InputError("invalid MLE options");
    }
}

void ExperimentConfig::validate() const {
    run.validate();
    analysis.validate();
    if (output_dir.empty()) {
        throw InputError("output_dir must not be empty");
    }
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    double tc = c.run.sources[0].coherence_time;
    for (double m : {-10.0, -4.0, -2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0}) {
        // Whole picoseconds keep the emitted config exact.
        c.analysis.hom_delays.push_back(std::round(m * tc / kPs) * kPs);
    }
    return c;
}

ExperimentConfig parse_config(std::string_view yaml) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml));
    } catch (const YAML::ParserException &e) {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    ExperimentConfig c = default_config();
    if (root.IsNull()) {
        return c;
    }
    check_keys(root, {"run", "sources", "indistinguishability", "analyzers", "analysis", "output_dir"}, "top level");
    try {
        if (root["run"]) {
            parse_run(root["run"], c.run);
        }
        if (root["sources"]) {
            const YAML::Node &s = root["sources"];
            if (!s.IsSequence() || s.size() != 2) {
                throw ConfigError(where(s) + ": 'sources' must list exactly 2 sources");
            }
            parse_source(s[0], c.run.sources[0]);
            parse_source(s[1], c.run.sources[1]);
        }
        if (root["indistinguishability"]) {
            check_keys(root["indistinguishability"], {"xi"}, "indistinguishability");
            read(root["indistinguishability"], "xi", c.run.xi.xi);
        }
        if (root["analyzers"]) {
            c.run.analyzers = parse_analyzers(root["analyzers"]);
        }
        if (root["analysis"]) {
            parse_analysis(root["analysis"], c.analysis);
        }
        read(root, "output_dir", c.output_dir);
    } catch (const YAML::Exception &e) {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    c.run.fourfold_window = c.analysis.window;
    try {
        c.validate();
    } catch (const InputError &e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig &cfg) {
    YAML::Emitter e;
    e << YAML::BeginMap;

    e << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
    emit_number(e, "duration_s", cfg.run.duration);
    e << YAML::Key << "seed" << YAML::Value << cfg.run.seed;
    e << YAML::Key << "mode" << YAML::Value << (cfg.run.mode == SimulationMode::kFull ? "full" : "fourfold");
    e << YAML::Key << "workers" << YAML::Value << cfg.run.workers;
    emit_number(e, "jitter_sigma_ps", cfg.run.jitter_sigma / kPs);
    emit_number(e, "dead_time_ps", cfg.run.dead_time / kPs);
    e << YAML::Key << "pbs" << YAML::Value << cfg.run.pbs;
    emit_number(e, "hom_delay_ps", cfg.run.hom_delay / kPs);
    e << YAML::Key << "hom_shape" << YAML::Value
      << (cfg.run.hom_shape == HomShape::kExponential ? "exponential" : "gaussian");
    emit_number(e, "interference_window_ps", cfg.run.interference_window / kPs);
    e << YAML::EndMap;

    e << YAML::Key << "sources" << YAML::Value << YAML::BeginSeq;
    for (const auto &s : cfg.run.sources) {
        e << YAML::BeginMap;
        emit_number(e, "pair_rate_hz", s.pair_rate);
        emit_number(e, "arm_efficiency", s.arm_efficiency);
        emit_number(e, "dark_rate_hz", s.dark_rate);
        emit_number(e, "werner_p", s.werner_p);
        emit_number(e, "coherence_time_ps", s.coherence_time / kPs);
        emit_number(e, "bell_phase_deg", s.bell_phase / kDeg);
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;

    e << YAML::Key << "indistinguishability" << YAML::Value << YAML::BeginMap;
    emit_number(e, "xi", cfg.run.xi.xi);
    e << YAML::EndMap;

    e << YAML::Key << "analyzers" << YAML::Value;
    if (!cfg.run.analyzers) {
        e << YAML::Null;
    } else {
        e << YAML::BeginSeq;
        for (const auto &p : cfg.run.analyzers->photons) {
            e << YAML::BeginMap;
            if (p.qwp) {
                emit_number(e, "qwp_deg", *p.qwp / kDeg);
            }
            if (p.hwp) {
                emit_number(e, "hwp_deg", *p.hwp / kDeg);
            }
            emit_number(e, "pol_deg", p.pol / kDeg);
            e << YAML::EndMap;
        }
        e << YAML::EndSeq;
    }

    const auto &a = cfg.analysis;
    e << YAML::Key << "analysis" << YAML::Value << YAML::BeginMap;
    emit_number(e, "window_ps", a.window / kPs);
    emit_number(e, "bin_width_ps", a.bin_width / kPs);
    emit_number(e, "span_ps", a.span / kPs);
    emit_number(e, "background_exclude_ps", a.background_exclude / kPs);
    emit_number(e, "g_ss", a.g_ss);
    emit_number(e, "g_ii", a.g_ii);
    emit_number(e, "fig2_duration_s", a.fig2_duration);
    e << YAML::Key << "hom_delays_ps" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double d : a.hom_delays) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.15g", d / kPs);
        e << buf;
    }
    e << YAML::EndSeq;
    emit_number(e, "hom_duration_s", a.hom_duration);
    e << YAML::Key << "hom_calibrate" << YAML::Value << a.hom_calibrate;
    emit_number(e, "hom_target_visibility", a.hom_target_visibility);
    emit_number(e, "hom_calibration_duration_s", a.hom_calibration_duration);
    emit_number(e, "tomography_duration_s", a.tomography_duration);
    e << YAML::Key << "tomography_shots" << YAML::Value << a.tomography_shots;
    e << YAML::Key << "bootstrap_resamples" << YAML::Value << a.bootstrap_resamples;
    e << YAML::Key << "mle_max_iter" << YAML::Value << a.mle_max_iter;
    emit_number(e, "mle_tol", a.mle_tol);
    emit_number(e, "mle_dilution", a.mle_dilution);
    e << YAML::EndMap;

    e << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

uint64_t config_hash(const ExperimentConfig &cfg) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : emit_config(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace ghzsim
