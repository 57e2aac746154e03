#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mixscribe/block_sparse.hpp"
#include "mixscribe/errors.hpp"
#include "mixscribe/spectrogram.hpp"

namespace mixscribe {

struct GainCurve {
    std::vector<double> values; // linear amplitude gain per mix frame
};

// Track frame index per mix frame; nullopt marks frames where the track is
// absent (the argmax of an all-zero column is undefined).
struct WarpCurve {
    std::vector<std::optional<std::uint32_t>> values;
};

struct TrackTranscription {
    int track_id = 0;
    GainCurve gain;
    WarpCurve warp;
};

struct TranscriptionResult {
    std::vector<TrackTranscription> tracks;
    SpectrogramParams grid;
    int sample_rate = 0;

    std::size_t frames() const { return tracks.empty() ? 0 : tracks[0].gain.values.size(); }
};

// g[c] = sqrt(column sum): the activation holds squared gains.
inline GainCurve estimate_gain(const ActivationBlock& block)
{
    GainCurve g;
    g.values.resize(block.n_cols());
    for (std::size_t c = 0; c < block.n_cols(); ++c) {
        double s = 0.0;
        for (const auto& e : block.column(c)) s += e.value;
        g.values[c] = std::sqrt(s);
    }
    return g;
}

// f[c] = argmax over rows; ties go to the smallest row index.
inline WarpCurve estimate_warp(const ActivationBlock& block)
{
    WarpCurve f;
    f.values.resize(block.n_cols());
    for (std::size_t c = 0; c < block.n_cols(); ++c) {
        const auto& col = block.column(c);
        if (col.empty()) continue;
        std::uint32_t best_row = col[0].row;
        double best = col[0].value;
        for (const auto& e : col) {
            if (e.value > best) {
                best = e.value;
                best_row = e.row;
            }
        }
        f.values[c] = best_row;
    }
    return f;
}

// The ideal activation matrix: one entry per active column, value g^2 at row
// f[c]. Columns with zero gain or no warp index stay empty.
inline ActivationBlock ideal_activation(const GainCurve& gain, const WarpCurve& warp,
                                        std::size_t track_frames, std::size_t row_offset = 0,
                                        int track_id = 0)
{
    if (gain.values.size() != warp.values.size())
        throw InvalidInput("ideal_activation: gain and warp lengths differ");
    ActivationBlock block(track_id, row_offset, track_frames, gain.values.size());
    for (std::size_t c = 0; c < gain.values.size(); ++c) {
        if (!warp.values[c].has_value()) continue;
        const std::uint32_t t = *warp.values[c];
        if (t >= track_frames)
            throw InvalidInput("ideal_activation: warp index " + std::to_string(t)
                               + " out of range for " + std::to_string(track_frames) + " frames");
        const double v = gain.values[c] * gain.values[c];
        if (v > 0.0) block.column(c).push_back({t, v});
    }
    return block;
}

// Both estimators applied to every track block; the noise block is skipped.
inline TranscriptionResult transcribe(const BlockSparseActivations& h,
                                      const SpectrogramParams& grid, int sample_rate)
{
    TranscriptionResult result;
    result.grid = grid;
    result.sample_rate = sample_rate;
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        const auto& block = h.block(b);
        if (block.is_noise()) continue;
        result.tracks.push_back({block.track_id(), estimate_gain(block), estimate_warp(block)});
    }
    return result;
}

// CSV schema shared with the ground-truth exporter: one row per mix frame,
// "mix_time_s,gain,track_time_s" with NA on inactive frames.
inline void write_curves_csv(const std::string& path, const GainCurve& gain, const WarpCurve& warp,
                             const SpectrogramParams& grid, int sample_rate)
{
    if (gain.values.size() != warp.values.size())
        throw InvalidInput("write_curves_csv: curve lengths differ");
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    out.precision(12);
    out << "mix_time_s,gain,track_time_s\n";
    for (std::size_t c = 0; c < gain.values.size(); ++c) {
        out << frame_to_time(c, grid, sample_rate) << ',' << gain.values[c] << ',';
        if (warp.values[c].has_value())
            out << frame_to_time(*warp.values[c], grid, sample_rate);
        else
            out << "NA";
        out << '\n';
    }
    if (!out) throw IoError("short write: " + path);
}

struct CurvesCsv {
    GainCurve gain;
    WarpCurve warp;
    std::vector<double> mix_times;
};

inline CurvesCsv read_curves_csv(const std::string& path, const SpectrogramParams& grid,
                                 int sample_rate)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    CurvesCsv out;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string t_s, g_s, f_s;
        if (!std::getline(row, t_s, ',') || !std::getline(row, g_s, ',')
            || !std::getline(row, f_s))
            throw IoError(path + ": malformed CSV row: " + line);
        out.mix_times.push_back(std::stod(t_s));
        out.gain.values.push_back(std::stod(g_s));
        if (f_s == "NA" || f_s == "na") {
            out.warp.values.push_back(std::nullopt);
        } else {
            const long frame = time_to_frame(std::stod(f_s), grid, sample_rate);
            out.warp.values.push_back(frame < 0 ? 0u : static_cast<std::uint32_t>(frame));
        }
    }
    return out;
}

inline nlohmann::json transcription_to_json(const TranscriptionResult& result)
{
    nlohmann::json j;
    j["sample_rate"] = result.sample_rate;
    j["hlen"] = result.grid.hlen;
    j["wlen"] = result.grid.wlen;
    j["window"] = window_name(result.grid.window);
    j["tracks"] = nlohmann::json::array();
    for (const auto& t : result.tracks) {
        nlohmann::json jt;
        jt["track_id"] = t.track_id;
        jt["gain"] = t.gain.values;
        nlohmann::json warp = nlohmann::json::array();
        for (const auto& f : t.warp.values) {
            if (f.has_value())
                warp.push_back(*f);
            else
                warp.push_back(nullptr);
        }
        jt["warp"] = std::move(warp);
        j["tracks"].push_back(std::move(jt));
    }
    return j;
}

inline TranscriptionResult transcription_from_json(const nlohmann::json& j)
{
    TranscriptionResult result;
    result.sample_rate = j.at("sample_rate").get<int>();
    result.grid.hlen = j.at("hlen").get<std::size_t>();
    result.grid.wlen = j.at("wlen").get<std::size_t>();
    result.grid.window = window_from_name(j.value("window", "hann"));
    for (const auto& jt : j.at("tracks")) {
        TrackTranscription t;
        t.track_id = jt.at("track_id").get<int>();
        t.gain.values = jt.at("gain").get<std::vector<double>>();
        for (const auto& f : jt.at("warp")) {
            if (f.is_null())
                t.warp.values.push_back(std::nullopt);
            else
                t.warp.values.push_back(f.get<std::uint32_t>());
        }
        result.tracks.push_back(std::move(t));
    }
    return result;
}

inline void write_result_json(const std::string& path, const TranscriptionResult& result)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    out << transcription_to_json(result).dump(2) << '\n';
}

inline TranscriptionResult read_result_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return transcription_from_json(j);
}

} // namespace mixscribe
