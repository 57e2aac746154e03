// mixscribe: transcribe a DJ mix against its known source tracks, synthesize
// test mixes with exact ground truth, and score transcriptions against it.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mixscribe/mixscribe.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mixscribe;

namespace {

std::string track_tag(std::size_t i)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "track_%02zu", i);
    return buf;
}

// 8-bit log-scaled heatmap (60 dB range, max-normalized), max-pooled down to
// at most 1024 cells per side
void write_pgm_heatmap(const std::string& path, const ActivationBlock& block)
{
    const std::size_t max_side = 1024;
    const std::size_t pool_r = (block.n_rows() + max_side - 1) / max_side;
    const std::size_t pool_c = (block.n_cols() + max_side - 1) / max_side;
    const std::size_t h = (block.n_rows() + pool_r - 1) / pool_r;
    const std::size_t w = (block.n_cols() + pool_c - 1) / pool_c;

    Matrix img(h, w);
    double peak = 0.0;
    for (std::size_t c = 0; c < block.n_cols(); ++c)
        for (const auto& e : block.column(c)) {
            double& cell = img(e.row / pool_r, c / pool_c);
            cell = std::max(cell, e.value);
            peak = std::max(peak, e.value);
        }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out << "P5\n" << w << ' ' << h << "\n255\n";
    const double range_db = 60.0;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double level = 0.0;
            const double v = img(r, c);
            if (v > 0.0 && peak > 0.0)
                level = std::clamp(1.0 + 10.0 * std::log10(v / peak) / range_db, 0.0, 1.0);
            out.put(static_cast<char>(std::lround(level * 255.0)));
        }
    if (!out) throw IoError("short write: " + path);
}

struct TranscribeSettings {
    std::string mix_path;
    std::vector<std::string> track_paths;
    std::string out_dir = "out";
    MultipassConfig cfg;
    bool dump_activations = false;
    bool verbose = false;
};

json settings_to_json(const TranscribeSettings& s)
{
    json j;
    j["mix"] = s.mix_path;
    j["tracks"] = s.track_paths;
    j["out"] = s.out_dir;
    j["seed"] = s.cfg.seed;
    j["hlen_init"] = s.cfg.hlen_init;
    j["hlen_target"] = s.cfg.hlen_target;
    j["overlap"] = s.cfg.overlap;
    j["noise_rank"] = s.cfg.noise_rank;
    j["window"] = window_name(s.cfg.window);
    j["filter"] = {{"slope_min", s.cfg.filter.slope_min},
                   {"slope_max", s.cfg.filter.slope_max},
                   {"kernel_len", s.cfg.filter.kernel_len},
                   {"n_slopes", s.cfg.filter.n_slopes},
                   {"blur_sigma", s.cfg.filter.blur_sigma},
                   {"threshold_rel", s.cfg.filter.threshold_rel}};
    j["nmf"] = {{"max_iters", s.cfg.nmf.max_iters},
                {"rel_tol", s.cfg.nmf.rel_tol},
                {"eps", s.cfg.nmf.eps}};
    j["dump_activations"] = s.dump_activations;
    j["verbose"] = s.verbose;
    return j;
}

void settings_from_json(const json& j, TranscribeSettings& s)
{
    s.mix_path = j.value("mix", s.mix_path);
    if (j.contains("tracks")) s.track_paths = j["tracks"].get<std::vector<std::string>>();
    s.out_dir = j.value("out", s.out_dir);
    s.cfg.seed = j.value("seed", s.cfg.seed);
    s.cfg.hlen_init = j.value("hlen_init", s.cfg.hlen_init);
    s.cfg.hlen_target = j.value("hlen_target", s.cfg.hlen_target);
    s.cfg.overlap = j.value("overlap", s.cfg.overlap);
    s.cfg.noise_rank = j.value("noise_rank", s.cfg.noise_rank);
    if (j.contains("window")) s.cfg.window = window_from_name(j["window"].get<std::string>());
    if (j.contains("filter")) {
        const json& f = j["filter"];
        s.cfg.filter.slope_min = f.value("slope_min", s.cfg.filter.slope_min);
        s.cfg.filter.slope_max = f.value("slope_max", s.cfg.filter.slope_max);
        s.cfg.filter.kernel_len = f.value("kernel_len", s.cfg.filter.kernel_len);
        s.cfg.filter.n_slopes = f.value("n_slopes", s.cfg.filter.n_slopes);
        s.cfg.filter.blur_sigma = f.value("blur_sigma", s.cfg.filter.blur_sigma);
        s.cfg.filter.threshold_rel = f.value("threshold_rel", s.cfg.filter.threshold_rel);
    }
    if (j.contains("nmf")) {
        const json& n = j["nmf"];
        s.cfg.nmf.max_iters = n.value("max_iters", s.cfg.nmf.max_iters);
        s.cfg.nmf.rel_tol = n.value("rel_tol", s.cfg.nmf.rel_tol);
        s.cfg.nmf.eps = n.value("eps", s.cfg.nmf.eps);
    }
    s.dump_activations = j.value("dump_activations", s.dump_activations);
    s.verbose = j.value("verbose", s.verbose);
}

AudioBuffer load_audio(const std::string& path)
{
    if (!fs::exists(path)) throw IoError("file not found: " + path);
    return read_wav(path);
}

int cmd_transcribe(const TranscribeSettings& settings)
{
    const AudioBuffer mix = load_audio(settings.mix_path);
    std::vector<AudioBuffer> tracks;
    for (const auto& p : settings.track_paths) tracks.push_back(load_audio(p));

    fs::create_directories(settings.out_dir);
    {
        std::ofstream cfg_out(fs::path(settings.out_dir) / "config.json");
        cfg_out << settings_to_json(settings).dump(2) << '\n';
    }

    const auto on_pass = [&](const PassReport& r) {
        if (settings.verbose)
            std::cerr << "pass hlen=" << r.hlen << " wlen=" << r.wlen
                      << " iterations=" << r.iterations << " divergence=" << r.final_divergence
                      << '\n';
    };
    const MultipassResult result = multipass_nmf(mix, tracks, settings.cfg, on_pass);
    const TranscriptionResult transcription =
        transcribe(result.h, result.grid, result.sample_rate);

    const fs::path out(settings.out_dir);
    write_result_json((out / "result.json").string(), transcription);
    {
        std::ofstream passes_out(out / "passes.json");
        passes_out << json(result.passes).dump(2) << '\n';
    }
    for (std::size_t i = 0; i < transcription.tracks.size(); ++i) {
        const auto& t = transcription.tracks[i];
        write_curves_csv((out / (track_tag(i) + ".csv")).string(), t.gain, t.warp,
                         result.grid, result.sample_rate);
        // split exports: gain only, warp only
        std::ofstream gain_out(out / (track_tag(i) + "_gain.csv"));
        gain_out.precision(12);
        gain_out << "mix_time_s,gain\n";
        std::ofstream warp_out(out / (track_tag(i) + "_warp.csv"));
        warp_out.precision(12);
        warp_out << "mix_time_s,track_time_s\n";
        for (std::size_t c = 0; c < t.gain.values.size(); ++c) {
            const double tm = frame_to_time(c, result.grid, result.sample_rate);
            gain_out << tm << ',' << t.gain.values[c] << '\n';
            warp_out << tm << ',';
            if (t.warp.values[c].has_value())
                warp_out << frame_to_time(*t.warp.values[c], result.grid, result.sample_rate);
            else
                warp_out << "NA";
            warp_out << '\n';
        }
    }

    if (settings.dump_activations) {
        const fs::path dump_dir = out / "activations";
        fs::create_directories(dump_dir);
        for (std::size_t b = 0; b < result.h.block_count(); ++b) {
            const auto& block = result.h.block(b);
            if (block.is_noise()) continue;
            const std::string stem = track_tag(static_cast<std::size_t>(block.track_id()));
            write_bsa((dump_dir / (stem + ".bsa")).string(), block);
            write_pgm_heatmap((dump_dir / (stem + ".pgm")).string(), block);
        }
    }

    if (settings.verbose) {
        std::cerr << "wrote " << transcription.tracks.size() << " track transcriptions to "
                  << settings.out_dir << '\n';
    }
    return 0;
}

int cmd_synth(const std::string& manifest_path, const std::string& out_dir)
{
    if (!fs::exists(manifest_path)) throw IoError("file not found: " + manifest_path);
    json j;
    {
        std::ifstream in(manifest_path);
        in >> j;
    }
    const MixManifest manifest = manifest_from_json(j);

    std::vector<AudioBuffer> tracks;
    for (const auto& p : manifest.track_paths) tracks.push_back(load_audio(p));
    const int sr = tracks.empty() ? 0 : tracks[0].sample_rate;
    for (std::size_t i = 0; i < tracks.size(); ++i)
        if (tracks[i].sample_rate != sr)
            throw InvalidInput("track " + std::to_string(i)
                               + " sample rate differs from track 0");

    const RenderResult rendered =
        render_mix(tracks, manifest.warps, manifest.gains, manifest.noise_level, manifest.seed);

    std::vector<std::size_t> track_lens;
    for (const auto& t : tracks) track_lens.push_back(t.samples.size());
    const GroundTruth gt =
        sample_ground_truth(manifest.warps, manifest.gains, manifest.grid, sr,
                            rendered.mix.samples.size(), track_lens);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_wav((out / "mix.wav").string(), rendered.mix);
    for (std::size_t i = 0; i < gt.tracks.size(); ++i)
        write_curves_csv((out / ("gt_" + track_tag(i) + ".csv")).string(), gt.tracks[i].gain,
                         gt.tracks[i].warp, manifest.grid, sr);
    {
        json info;
        info["peak_scale"] = rendered.peak_scale;
        info["mix_samples"] = rendered.mix.samples.size();
        info["sample_rate"] = sr;
        std::ofstream info_out(out / "render.json");
        info_out << info.dump(2) << '\n';
    }
    return 0;
}

int cmd_eval(const std::string& result_path, const std::vector<std::string>& truth_paths,
             const std::string& metrics_path)
{
    if (!fs::exists(result_path)) throw IoError("file not found: " + result_path);
    const TranscriptionResult est = read_result_json(result_path);
    if (truth_paths.size() != est.tracks.size())
        throw InvalidInput("eval: " + std::to_string(est.tracks.size())
                           + " tracks in the result but " + std::to_string(truth_paths.size())
                           + " ground-truth files");

    GroundTruth ref;
    ref.grid = est.grid;
    ref.sample_rate = est.sample_rate;
    const std::size_t k = est.frames();
    for (const auto& path : truth_paths) {
        if (!fs::exists(path)) throw IoError("file not found: " + path);
        const CurvesCsv csv = read_curves_csv(path, est.grid, est.sample_rate);
        if (csv.gain.values.size() != k)
            throw InvalidInput("grid mismatch: " + path + " has "
                               + std::to_string(csv.gain.values.size()) + " frames, result has "
                               + std::to_string(k));
        for (std::size_t c = 0; c < k; ++c) {
            const double expect = frame_to_time(c, est.grid, est.sample_rate);
            if (std::abs(csv.mix_times[c] - expect) > 1e-6)
                throw InvalidInput("grid mismatch: " + path
                                   + " frame times disagree with the result grid");
        }
        GroundTruthTrack t;
        t.gain = csv.gain;
        t.warp = csv.warp;
        for (const auto& f : csv.warp.values) t.active.push_back(f.has_value());
        ref.tracks.push_back(std::move(t));
    }

    const MaeReport gain_report = mae_gain(est, ref);
    const WarpMaeReport warp_report = mae_warp(est, ref, est.grid, est.sample_rate);

    json metrics;
    metrics["per_track"] = json::array();
    std::printf("%-8s %12s %12s %10s\n", "track", "gain_mae", "warp_mae_s", "miss_rate");
    for (std::size_t i = 0; i < est.tracks.size(); ++i) {
        std::printf("%-8zu %12.6f %12.6f %10.4f\n", i, gain_report.per_track[i],
                    warp_report.per_track_s[i], warp_report.per_track_miss[i]);
        metrics["per_track"].push_back({{"track_id", est.tracks[i].track_id},
                                        {"gain_mae", gain_report.per_track[i]},
                                        {"warp_mae_s", warp_report.per_track_s[i]},
                                        {"miss_rate", warp_report.per_track_miss[i]}});
    }
    std::printf("%-8s %12.6f %12.6f %10.4f\n", "all", gain_report.aggregate,
                warp_report.aggregate_s, warp_report.aggregate_miss);
    metrics["aggregate"] = {{"gain_mae", gain_report.aggregate},
                            {"warp_mae_s", warp_report.aggregate_s},
                            {"miss_rate", warp_report.aggregate_miss}};

    std::ofstream metrics_out(metrics_path);
    if (!metrics_out) throw IoError("cannot create " + metrics_path);
    metrics_out << metrics.dump(2) << '\n';
    return 0;
}

const char* stage_name(const std::exception& e)
{
    if (dynamic_cast<const IoError*>(&e)) return "io";
    if (dynamic_cast<const InvalidParams*>(&e)) return "params";
    if (dynamic_cast<const InvalidInput*>(&e)) return "shape";
    if (dynamic_cast<const NumericalFailure*>(&e)) return "numerical";
    return "internal";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"DJ mix transcription by multi-pass IS-NMF"};
    app.require_subcommand(1);

    // transcribe
    TranscribeSettings settings;
    std::string config_path;
    auto* transcribe_cmd =
        app.add_subcommand("transcribe", "estimate per-track gain and warp curves from a mix");
    auto* mix_opt = transcribe_cmd->add_option("--mix", settings.mix_path, "mix WAV file");
    auto* tracks_opt =
        transcribe_cmd->add_option("--tracks", settings.track_paths, "source track WAV files");
    transcribe_cmd->add_option("--config", config_path, "JSON config file (flags win)");
    auto* out_opt = transcribe_cmd->add_option("--out", settings.out_dir, "output directory");
    auto* seed_opt = transcribe_cmd->add_option("--seed", settings.cfg.seed, "RNG seed");
    auto* hi_opt =
        transcribe_cmd->add_option("--hlen-init", settings.cfg.hlen_init, "initial hop, samples");
    auto* ht_opt = transcribe_cmd->add_option("--hlen-target", settings.cfg.hlen_target,
                                              "target hop, samples");
    auto* ov_opt =
        transcribe_cmd->add_option("--overlap", settings.cfg.overlap, "window-to-hop ratio");
    auto* dump_flag = transcribe_cmd->add_flag("--dump-activations", settings.dump_activations,
                                               "write BSA1 + PGM dumps of the activations");
    auto* verbose_flag = transcribe_cmd->add_flag("--verbose", settings.verbose,
                                                  "per-pass progress on stderr");

    // synth
    std::string manifest_path, synth_out = "synth_out";
    auto* synth_cmd =
        app.add_subcommand("synth", "render a mix with exact ground truth from a manifest");
    synth_cmd->add_option("manifest", manifest_path, "mix manifest JSON")->required();
    synth_cmd->add_option("--out", synth_out, "output directory");

    // eval
    std::string result_path, metrics_path;
    std::vector<std::string> truth_paths;
    auto* eval_cmd =
        app.add_subcommand("eval", "score a transcription against ground-truth CSVs");
    eval_cmd->add_option("result", result_path, "result.json from transcribe")->required();
    eval_cmd->add_option("--truth", truth_paths, "ground-truth CSV, one per track, in order")
        ->required();
    eval_cmd->add_option("--out", metrics_path, "metrics JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (transcribe_cmd->parsed()) {
            if (!config_path.empty()) {
                if (!fs::exists(config_path)) throw IoError("file not found: " + config_path);
                json j;
                std::ifstream in(config_path);
                in >> j;
                // flags override config-file values
                TranscribeSettings from_file;
                settings_from_json(j, from_file);
                if (!*mix_opt) settings.mix_path = from_file.mix_path;
                if (!*tracks_opt) settings.track_paths = from_file.track_paths;
                if (!*out_opt) settings.out_dir = from_file.out_dir;
                if (!*seed_opt) settings.cfg.seed = from_file.cfg.seed;
                if (!*hi_opt) settings.cfg.hlen_init = from_file.cfg.hlen_init;
                if (!*ht_opt) settings.cfg.hlen_target = from_file.cfg.hlen_target;
                if (!*ov_opt) settings.cfg.overlap = from_file.cfg.overlap;
                if (!*dump_flag) settings.dump_activations = from_file.dump_activations;
                if (!*verbose_flag) settings.verbose = from_file.verbose;
                settings.cfg.noise_rank = from_file.cfg.noise_rank;
                settings.cfg.window = from_file.cfg.window;
                settings.cfg.filter = from_file.cfg.filter;
                settings.cfg.nmf = from_file.cfg.nmf;
            }
            if (settings.mix_path.empty())
                throw InvalidParams("no mix file given (--mix or config)");
            if (settings.track_paths.empty())
                throw InvalidParams("no track files given (--tracks or config)");
            return cmd_transcribe(settings);
        }
        if (synth_cmd->parsed()) return cmd_synth(manifest_path, synth_out);
        if (eval_cmd->parsed()) {
            if (metrics_path.empty())
                metrics_path =
                    (fs::path(result_path).parent_path() / "metrics.json").string();
            return cmd_eval(result_path, truth_paths, metrics_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "mixscribe: [" << stage_name(e) << "] " << e.what() << '\n';
        return 1;
    }
    return 0;
}
