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

// Command-line front end: simulate, analyze, fig2, hom, tomography, defaults.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ghzsim/coincidence.h"
#include "ghzsim/config.h"
#include "ghzsim/errors.h"
#include "ghzsim/pipeline.h"
#include "ghzsim/timetag.h"
#include "ghzsim/tomography.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ghzsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumerical = 4;
constexpr const char *kVersion = "1.0.0";

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<uint64_t> seed;
    std::optional<double> duration;
};

ExperimentConfig load(const CommonOptions &o) {
    ExperimentConfig cfg = o.config.empty() ? default_config() : load_config(o.config);
    if (o.seed) {
        cfg.run.seed = *o.seed;
    }
    return cfg;
}

fs::path output_dir(const CommonOptions &o, const ExperimentConfig &cfg) {
    fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path &path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw InputError("cannot write " + path.string());
    }
    return f;
}

void write_json(const fs::path &path, const nlohmann::json &j) {
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

std::string hex(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

int cmd_simulate(const CommonOptions &o) {
    ExperimentConfig cfg = load(o);
    if (o.duration) {
        cfg.run.duration = *o.duration;
    }
    try {
        cfg.validate();
    } catch (const InputError &e) {
        throw ConfigError(e.what());
    }
    fs::path out = o.out.empty() ? fs::path(cfg.output_dir) / "run.qtt" : fs::path(o.out);
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    RunGenerator gen(cfg.run);
    TagWriter writer(out);
    TagStream chunk;
    while (gen.next_chunk(chunk)) {
        writer.append(chunk);
        chunk.clear();
    }
    writer.close();

    uint64_t hash = config_hash(cfg);
    nlohmann::json m;
    m["config_hash"] = hex(hash);
    m["seed"] = cfg.run.seed;
    m["duration_s"] = cfg.run.duration;
    m["mode"] = cfg.run.mode == SimulationMode::kFull ? "full" : "fourfold";
    m["tag_count"] = writer.count();
    m["provenance"] = std::string("ghzsim ") + kVersion + " config-fnv1a:" + hex(hash) + " seed:" +
                      std::to_string(cfg.run.seed);
    m["config"] = emit_config(cfg);
    write_json(out.string() + ".manifest.json", m);
    std::cout << "wrote " << writer.count() << " tags to " << out.string() << "\n";
    return 0;
}

int cmd_analyze(const CommonOptions &o, const std::string &tag_file) {
    ExperimentConfig cfg = load(o);
    const auto &a = cfg.analysis;
    TagStream tags = read_tags(tag_file);
    fs::path dir = output_dir(o, cfg);

    std::array<uint64_t, kNumChannels> singles{};
    for (const auto &t : tags) {
        singles[t.channel]++;
    }
    double span_s = tags.empty() ? 0 : static_cast<double>(tags.back().time_ps - tags.front().time_ps) * 1e-12;
    uint64_t pairs01 = count_coincidences(tags, {{0, 1}, a.window});
    uint64_t pairs23 = count_coincidences(tags, {{2, 3}, a.window});
    uint64_t fourfold = count_coincidences(tags, {{0, 1, 2, 3}, a.window});

    Histogram h = cross_correlation(tags, 0, 1, a.bin_width, a.span);
    {
        auto f = open_out(dir / "cross_correlation.csv");
        write_histogram_csv(h, f);
    }
    {
        auto f = open_out(dir / "counts.csv");
        f << "quantity,counts\r\n";
        for (size_t c = 0; c < kNumChannels; c++) {
            f << "singles_" << c << ',' << singles[c] << "\r\n";
        }
        f << "pairs_01," << pairs01 << "\r\n";
        f << "pairs_23," << pairs23 << "\r\n";
        f << "fourfold," << fourfold << "\r\n";
    }

    nlohmann::json s;
    s["tag_count"] = tags.size();
    s["observed_span_s"] = span_s;
    s["singles"] = singles;
    s["pairs_01"] = pairs01;
    s["pairs_23"] = pairs23;
    s["fourfold"] = fourfold;
    s["g_ss"] = a.g_ss;
    s["g_ii"] = a.g_ii;
    s["g_si_peak"] = nullptr;
    s["cauchy_schwarz_r"] = nullptr;
    s["coherence_time_ps"] = nullptr;
    try {
        double g = normalized_peak(h, a.background_exclude);
        s["g_si_peak"] = g;
        s["cauchy_schwarz_r"] = cauchy_schwarz_factor(g, a.g_ss, a.g_ii);
        DelayFit fit = fit_delay_histogram(h, a.background_exclude);
        s["coherence_time_ps"] = fit.tau * 1e12;
        s["coherence_time_stderr_ps"] = fit.tau_stderr * 1e12;
        s["jitter_sigma_ps"] = fit.sigma * 1e12;
    } catch (const NumericalError &e) {
        s["note"] = e.what();
    } catch (const InputError &e) {
        s["note"] = e.what();
    }
    write_json(dir / "analysis.json", s);
    std::cout << s.dump(2) << "\n";
    return 0;
}

int cmd_fig2(const CommonOptions &o) {
    ExperimentConfig cfg = load(o);
    if (o.duration) {
        cfg.analysis.fig2_duration = *o.duration;
    }
    try {
        cfg.validate();
    } catch (const InputError &e) {
        throw ConfigError(e.what());
    }
    fs::path dir = output_dir(o, cfg);
    Fig2Result r = run_fig2(cfg);
    auto f = open_out(dir / "fig2.csv");
    write_basis_csv(r.counts, r.duration, f);
    write_basis_csv(r.counts, r.duration, std::cout);
    return 0;
}

nlohmann::json fit_json(const HomFit &f) {
    return {{"visibility", f.visibility},
            {"visibility_stderr", f.visibility_stderr},
            {"width_ps", f.width * 1e12},
            {"width_stderr_ps", f.width_stderr * 1e12},
            {"baseline", f.baseline}};
}

int cmd_hom(const CommonOptions &o, const std::vector<double> &delays_ps) {
    ExperimentConfig cfg = load(o);
    if (!delays_ps.empty()) {
        cfg.analysis.hom_delays.clear();
        for (double d : delays_ps) {
            cfg.analysis.hom_delays.push_back(d * 1e-12);
        }
    }
    if (o.duration) {
        cfg.analysis.hom_duration = *o.duration;
    }
    try {
        cfg.validate();
    } catch (const InputError &e) {
        throw ConfigError(e.what());
    }
    fs::path dir = output_dir(o, cfg);
    HomResult r = run_hom(cfg);
    {
        auto f = open_out(dir / "hom_peak.csv");
        write_hom_csv(r.peak, f);
    }
    {
        auto f = open_out(dir / "hom_dip.csv");
        write_hom_csv(r.dip, f);
    }
    nlohmann::json s;
    s["xi"] = r.xi;
    if (r.calibration) {
        s["calibration"] = {{"visibility_at_unit_xi", r.calibration->visibility_at_unit_xi},
                            {"stderr", r.calibration->stderr_value},
                            {"feasible", r.calibration->feasible}};
    }
    s["peak"] = fit_json(r.peak_fit);
    s["dip"] = fit_json(r.dip_fit);
    write_json(dir / "hom_summary.json", s);
    std::cout << s.dump(2) << "\n";
    return 0;
}

int cmd_tomography(const CommonOptions &o, const std::string &counts_csv) {
    ExperimentConfig cfg = load(o);
    if (o.duration) {
        cfg.analysis.tomography_duration = *o.duration;
    }
    try {
        cfg.validate();
    } catch (const InputError &e) {
        throw ConfigError(e.what());
    }
    fs::path dir = output_dir(o, cfg);
    std::vector<CountRecord> records;
    if (!counts_csv.empty()) {
        std::ifstream in(counts_csv, std::ios::binary);
        if (!in) {
            throw FormatError("cannot read " + counts_csv, 0);
        }
        records = read_counts_csv(in);
    } else {
        records = tomography_counts(cfg);
        auto f = open_out(dir / "counts.csv");
        write_counts_csv(records, f);
    }
    TomographyResult r = reconstruct(records, cfg);
    nlohmann::json j = to_json(r.reconstruction);
    if (r.bootstrap) {
        j["bootstrap_mean"] = r.bootstrap->mean;
    }
    write_json(dir / "reconstruction.json", j);
    {
        auto f = open_out(dir / "density_matrix.csv");
        write_matrix_csv(r.reconstruction.rho, f);
    }
    std::cout << "fidelity_ghz " << r.reconstruction.fidelity_ghz << " +- " << r.reconstruction.fidelity_err
              << " (" << r.reconstruction.iterations << " iterations)\n";
    return 0;
}

int cmd_defaults(const CommonOptions &o) {
    std::string text = emit_config(default_config());
    if (o.out.empty()) {
        std::cout << text;
    } else {
        auto f = open_out(o.out);
        f << text;
    }
    return 0;
}

void add_common(CLI::App *cmd, CommonOptions &o, bool with_duration) {
    cmd->add_option("--config", o.config, "YAML experiment config (defaults when omitted)");
    cmd->add_option("--out", o.out, "output file or directory");
    cmd->add_option("--seed", o.seed, "override run.seed");
    if (with_duration) {
        cmd->add_option("--duration", o.duration, "override the command's duration in seconds");
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Four-photon GHZ experiment simulator and analyzer"};
    app.require_subcommand(1);
    CommonOptions o;
    std::string tag_file;
    std::string counts_csv;
    std::vector<double> delays_ps;

    auto *simulate = app.add_subcommand("simulate", "simulate one run into a QTT1 time-tag file");
    add_common(simulate, o, true);
    auto *analyze = app.add_subcommand("analyze", "coincidences, cross-correlation and Cauchy-Schwarz factor");
    add_common(analyze, o, false);
    analyze->add_option("--tags", tag_file, "QTT1 file")->required();
    auto *fig2 = app.add_subcommand("fig2", "fourfold counts for the 16 H/V analyzer combinations");
    add_common(fig2, o, true);
    auto *hom = app.add_subcommand("hom", "HOM peak and dip scans with fitted visibilities");
    add_common(hom, o, true);
    hom->add_option("--delays", delays_ps, "delays in ps (at least 3)");
    auto *tomo = app.add_subcommand("tomography", "256-setting tomography and MLE reconstruction");
    add_common(tomo, o, true);
    tomo->add_option("--counts", counts_csv, "reconstruct from a counts CSV instead of simulating");
    auto *defaults = app.add_subcommand("defaults", "print the default config");
    defaults->add_option("--out", o.out, "write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*simulate) {
            return cmd_simulate(o);
        }
        if (*analyze) {
            return cmd_analyze(o, tag_file);
        }
        if (*fig2) {
            return cmd_fig2(o);
        }
        if (*hom) {
            return cmd_hom(o, delays_ps);
        }
        if (*tomo) {
            return cmd_tomography(o, counts_csv);
        }
        return cmd_defaults(o);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError &e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const NumericalError &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const InputError &e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
