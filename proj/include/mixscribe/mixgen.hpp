#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "mixscribe/errors.hpp"
#include "mixscribe/estimators.hpp"
#include "mixscribe/random.hpp"
#include "mixscribe/spectrogram.hpp"

namespace mixscribe {

constexpr double kActivityEps = 1e-3; // linear gain below this counts as absent

// One stretch of continuous playback: mix time [mix_start_s, mix_end_s) plays
// the track from track_start_s at the given speed ratio. Loops and jumps are
// just segments that revisit earlier track positions.
struct WarpSegment {
    double mix_start_s = 0.0;
    double mix_end_s = 0.0;
    double track_start_s = 0.0;
    double speed = 1.0; // track seconds per mix second
};

struct WarpSpec {
    std::vector<WarpSegment> segments; // sorted, non-overlapping in mix time

    void validate() const
    {
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const auto& s = segments[i];
            if (!(s.speed > 0.0)) throw InvalidParams("warp segment " + std::to_string(i) + ": speed must be positive");
            if (!(s.mix_end_s > s.mix_start_s))
                throw InvalidParams("warp segment " + std::to_string(i) + ": empty mix interval");
            if (s.track_start_s < 0.0)
                throw InvalidParams("warp segment " + std::to_string(i) + ": negative track start");
            if (i > 0 && s.mix_start_s < segments[i - 1].mix_end_s)
                throw InvalidParams("warp segments overlap at index " + std::to_string(i));
        }
    }

    // segment containing mix time t, or -1
    long segment_at(double t) const
    {
        for (std::size_t i = 0; i < segments.size(); ++i)
            if (t >= segments[i].mix_start_s && t < segments[i].mix_end_s)
                return static_cast<long>(i);
        return -1;
    }
};

struct GainBreakpoint {
    double time_s = 0.0;
    double gain = 1.0;
};

// Piecewise-linear gain; flat extrapolation outside the breakpoint range.
struct GainSpec {
    std::vector<GainBreakpoint> breakpoints;

    void validate() const
    {
        for (std::size_t i = 0; i < breakpoints.size(); ++i) {
            if (breakpoints[i].gain < 0.0)
                throw InvalidParams("gain breakpoint " + std::to_string(i) + ": negative gain");
            if (i > 0 && breakpoints[i].time_s <= breakpoints[i - 1].time_s)
                throw InvalidParams("gain breakpoints must be strictly increasing in time");
        }
    }

    double eval(double t) const
    {
        if (breakpoints.empty()) return 1.0;
        if (t <= breakpoints.front().time_s) return breakpoints.front().gain;
        if (t >= breakpoints.back().time_s) return breakpoints.back().gain;
        for (std::size_t i = 1; i < breakpoints.size(); ++i) {
            if (t <= breakpoints[i].time_s) {
                const auto& a = breakpoints[i - 1];
                const auto& b = breakpoints[i];
                const double u = (t - a.time_s) / (b.time_s - a.time_s);
                return a.gain + u * (b.gain - a.gain);
            }
        }
        return breakpoints.back().gain;
    }
};

struct GroundTruthTrack {
    GainCurve gain;             // reference gain, 0 outside all segments
    WarpCurve warp;             // track frame per mix frame, inactive if absent
    std::vector<bool> active;   // gain above kActivityEps inside a segment
};

struct GroundTruth {
    std::vector<GroundTruthTrack> tracks;
    SpectrogramParams grid;
    int sample_rate = 0;

    std::size_t frames() const { return tracks.empty() ? 0 : tracks[0].gain.values.size(); }
};

struct RenderResult {
    AudioBuffer mix;
    double peak_scale = 1.0; // factor applied to keep the peak at or below 1
};

// Weighted sum of time-warped tracks plus optional white noise. Samples are
// placed by linear interpolation; positions are computed in sample units so a
// speed-1 segment starting on a sample boundary reproduces the source
// sample-exactly.
inline RenderResult render_mix(const std::vector<AudioBuffer>& tracks,
                               const std::vector<WarpSpec>& warps,
                               const std::vector<GainSpec>& gains, double noise_level,
                               std::uint64_t seed = 0)
{
    if (tracks.empty()) throw InvalidInput("render_mix: no tracks");
    if (warps.size() != tracks.size() || gains.size() != tracks.size())
        throw InvalidInput("render_mix: one warp and gain spec per track required");
    const int sr = tracks[0].sample_rate;
    for (const auto& t : tracks)
        if (t.sample_rate != sr) throw InvalidInput("render_mix: tracks disagree on sample rate");

    double mix_end = 0.0;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        warps[i].validate();
        gains[i].validate();
        for (std::size_t s = 0; s < warps[i].segments.size(); ++s) {
            const auto& seg = warps[i].segments[s];
            const double track_end_pos =
                (seg.track_start_s + (seg.mix_end_s - seg.mix_start_s) * seg.speed) * sr;
            if (track_end_pos > static_cast<double>(tracks[i].samples.size()) - 1.0)
                throw InvalidInput("warp segment " + std::to_string(s) + " of track "
                                   + std::to_string(i) + " exceeds the track length");
            mix_end = std::max(mix_end, seg.mix_end_s);
        }
    }

    const std::size_t mix_len = static_cast<std::size_t>(std::llround(mix_end * sr));
    RenderResult out;
    out.mix.sample_rate = sr;
    out.mix.samples.assign(mix_len, 0.0);

    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const auto& x = tracks[i].samples;
        for (const auto& seg : warps[i].segments) {
            const long n0 = std::lround(seg.mix_start_s * sr);
            const long n1 = std::min<long>(std::lround(seg.mix_end_s * sr),
                                           static_cast<long>(mix_len));
            const double track_start_pos = seg.track_start_s * sr;
            for (long n = n0; n < n1; ++n) {
                const double pos = track_start_pos + static_cast<double>(n - n0) * seg.speed;
                const std::size_t k = static_cast<std::size_t>(pos);
                const double frac = pos - static_cast<double>(k);
                const double sample = frac == 0.0
                                          ? x[k]
                                          : x[k] * (1.0 - frac) + x[k + 1] * frac;
                out.mix.samples[static_cast<std::size_t>(n)] +=
                    gains[i].eval(static_cast<double>(n) / sr) * sample;
            }
        }
    }

    if (noise_level > 0.0) {
        Rng rng(seed);
        for (auto& v : out.mix.samples) v += noise_level * rng.gaussian();
    }

    double peak = 0.0;
    for (double v : out.mix.samples) peak = std::max(peak, std::abs(v));
    if (peak > 1.0) {
        out.peak_scale = 1.0 / peak;
        for (auto& v : out.mix.samples) v *= out.peak_scale;
    }
    return out;
}

// Exact gain and warp curves on an analysis grid, evaluated at each frame's
// center time. Frames outside all segments are inactive with reference gain 0.
inline GroundTruth sample_ground_truth(const std::vector<WarpSpec>& warps,
                                       const std::vector<GainSpec>& gains,
                                       const SpectrogramParams& grid, int sample_rate,
                                       std::size_t mix_len_samples,
                                       const std::vector<std::size_t>& track_len_samples)
{
    grid.validate();
    if (warps.size() != gains.size() || warps.size() != track_len_samples.size())
        throw InvalidInput("sample_ground_truth: per-track spec counts disagree");
    const std::size_t k_frames = frame_count(mix_len_samples, grid);

    GroundTruth gt;
    gt.grid = grid;
    gt.sample_rate = sample_rate;
    gt.tracks.resize(warps.size());

    for (std::size_t i = 0; i < warps.size(); ++i) {
        warps[i].validate();
        gains[i].validate();
        const std::size_t track_frames = frame_count(track_len_samples[i], grid);
        auto& track = gt.tracks[i];
        track.gain.values.assign(k_frames, 0.0);
        track.warp.values.assign(k_frames, std::nullopt);
        track.active.assign(k_frames, false);
        for (std::size_t c = 0; c < k_frames; ++c) {
            const double t_mix = frame_to_time(c, grid, sample_rate);
            const long s = warps[i].segment_at(t_mix);
            if (s < 0) continue;
            const auto& seg = warps[i].segments[static_cast<std::size_t>(s)];
            const double g = gains[i].eval(t_mix);
            track.gain.values[c] = g;
            if (g <= kActivityEps) continue;
            const double t_track = seg.track_start_s + (t_mix - seg.mix_start_s) * seg.speed;
            long frame = time_to_frame(t_track, grid, sample_rate);
            frame = std::clamp<long>(frame, 0, static_cast<long>(track_frames) - 1);
            track.warp.values[c] = static_cast<std::uint32_t>(frame);
            track.active[c] = true;
        }
    }
    return gt;
}

struct MaeReport {
    std::vector<double> per_track;
    double aggregate = 0.0;
};

struct WarpMaeReport {
    std::vector<double> per_track_s;       // over jointly active frames
    std::vector<double> per_track_miss;    // reference active, estimate inactive
    double aggregate_s = 0.0;
    double aggregate_miss = 0.0;
};

// Mean absolute gain error over all tracks and frames; inactive reference
// frames enter with gain 0.
inline MaeReport mae_gain(const TranscriptionResult& est, const GroundTruth& ref)
{
    if (est.tracks.size() != ref.tracks.size())
        throw InvalidInput("mae_gain: track counts differ");
    MaeReport report;
    double total = 0.0;
    std::size_t total_n = 0;
    for (std::size_t i = 0; i < est.tracks.size(); ++i) {
        const auto& ge = est.tracks[i].gain.values;
        const auto& gr = ref.tracks[i].gain.values;
        if (ge.size() != gr.size()) throw InvalidInput("mae_gain: grid mismatch");
        double s = 0.0;
        for (std::size_t c = 0; c < ge.size(); ++c) s += std::abs(ge[c] - gr[c]);
        report.per_track.push_back(ge.empty() ? 0.0 : s / static_cast<double>(ge.size()));
        total += s;
        total_n += ge.size();
    }
    report.aggregate = total_n == 0 ? 0.0 : total / static_cast<double>(total_n);
    return report;
}

// Mean absolute warp error in seconds over frames where both the reference
// and the estimate are active, plus the fraction of reference-active frames
// the estimate missed. No jointly active frames means MAE 0 by convention.
inline WarpMaeReport mae_warp(const TranscriptionResult& est, const GroundTruth& ref,
                              const SpectrogramParams& grid, int sample_rate)
{
    if (est.tracks.size() != ref.tracks.size())
        throw InvalidInput("mae_warp: track counts differ");
    const double frame_s = static_cast<double>(grid.hlen) / sample_rate;
    WarpMaeReport report;
    double total_err = 0.0, total_joint = 0.0, total_miss = 0.0, total_ref = 0.0;
    for (std::size_t i = 0; i < est.tracks.size(); ++i) {
        const auto& fe = est.tracks[i].warp.values;
        const auto& fr = ref.tracks[i].warp.values;
        if (fe.size() != fr.size()) throw InvalidInput("mae_warp: grid mismatch");
        double err = 0.0;
        std::size_t joint = 0, missed = 0, ref_active = 0;
        for (std::size_t c = 0; c < fe.size(); ++c) {
            if (!ref.tracks[i].active[c]) continue;
            ++ref_active;
            if (!fe[c].has_value()) {
                ++missed;
                continue;
            }
            const double diff = std::abs(static_cast<double>(*fe[c])
                                         - static_cast<double>(*fr[c]));
            err += diff * frame_s;
            ++joint;
        }
        report.per_track_s.push_back(joint == 0 ? 0.0 : err / static_cast<double>(joint));
        report.per_track_miss.push_back(ref_active == 0
                                            ? 0.0
                                            : static_cast<double>(missed)
                                                  / static_cast<double>(ref_active));
        total_err += err;
        total_joint += static_cast<double>(joint);
        total_miss += static_cast<double>(missed);
        total_ref += static_cast<double>(ref_active);
    }
    report.aggregate_s = total_joint == 0.0 ? 0.0 : total_err / total_joint;
    report.aggregate_miss = total_ref == 0.0 ? 0.0 : total_miss / total_ref;
    return report;
}

// --- synthetic test material -------------------------------------------------

// Seeded test track: sparse percussion. Every 0.14-0.3 s a short click is
// struck, built from a handful of strongly damped resonances (a register-
// stratified "body" and a bright "snap"). Clicks have smooth broadband
// spectra with no fine lines, so their shape degrades gracefully when the
// mix is resampled, and the window-to-window click constellation carries the
// alignment structure. Silent gaps stay shorter than one analysis window.
inline AudioBuffer make_synthetic_track(std::uint64_t seed, double duration_s, int sample_rate)
{
    if (duration_s <= 0.0 || sample_rate <= 0)
        throw InvalidParams("make_synthetic_track: bad duration or rate");
    Rng rng(seed * 0x9E3779B97F4A7C15ull + 1ull);
    AudioBuffer out;
    out.sample_rate = sample_rate;
    const std::size_t n = static_cast<std::size_t>(duration_s * sample_rate);
    out.samples.assign(n, 0.0);

    const double nyquist = sample_rate / 2.0;
    const double two_pi = 6.283185307179586;

    // stratified section registers: a random permutation of evenly spaced
    // levels keeps any two sections' registers well apart, so content from
    // one section has no close imposter elsewhere in the track
    const std::size_t n_sections =
        std::max<std::size_t>(2, static_cast<std::size_t>(duration_s / 4.0));
    std::vector<double> registers(n_sections);
    for (std::size_t i = 0; i < n_sections; ++i)
        registers[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n_sections);
    for (std::size_t i = n_sections - 1; i > 0; --i)
        std::swap(registers[i], registers[rng.next_u32() % (i + 1)]);
    const double section_s = duration_s / static_cast<double>(n_sections);
    std::vector<double> section_level(n_sections);
    for (auto& l : section_level) l = rng.uniform(0.45, 1.0);

    double t = 0.01;
    std::size_t beat = 0;
    while (t < duration_s) {
        const std::size_t section = std::min<std::size_t>(
            n_sections - 1, static_cast<std::size_t>(t / section_s));
        const double reg = registers[section];

        struct Resonance {
            double freq, tau, phase, amp;
        };
        std::vector<Resonance> res;
        // body: a register-dependent cluster of very short resonances whose
        // wide Lorentzian humps survive moderate spectral shifts
        const double body = 90.0 * std::pow(2.0, 3.6 * reg) * std::pow(2.0, rng.uniform(-0.45, 0.45));
        for (int r = 0; r < 5; ++r) {
            Resonance q;
            q.freq = std::min(nyquist * 0.35, body * std::pow(2.0, rng.uniform(-0.5, 0.5)));
            q.tau = rng.uniform(2.5, 4.0) / q.freq; // a couple of cycles
            q.phase = rng.uniform(0.0, two_pi);
            q.amp = rng.uniform(0.5, 1.0);
            res.push_back(q);
        }
        // snap: bright, nearly flat clicks keeping the top octaves populated
        for (int r = 0; r < 2; ++r) {
            Resonance q;
            q.freq = std::min(nyquist * 0.4, 2200.0 * std::pow(2.0, rng.uniform(0.0, 1.0)));
            q.tau = rng.uniform(0.9, 1.4) / q.freq;
            q.phase = rng.uniform(0.0, two_pi);
            q.amp = 0.6 * rng.uniform(0.5, 1.0);
            res.push_back(q);
        }

        const double accent = (beat % 2 == 0) ? 1.0 : rng.uniform(0.3, 0.5);
        const double amp = section_level[section] * accent * rng.uniform(0.75, 1.0);
        const std::size_t k0 = static_cast<std::size_t>(t * sample_rate);
        for (const auto& q : res) {
            const std::size_t dur = std::min<std::size_t>(
                n - k0, static_cast<std::size_t>(5.0 * q.tau * sample_rate) + 1);
            for (std::size_t k = 0; k < dur; ++k) {
                const double tt = static_cast<double>(k) / sample_rate;
                out.samples[k0 + k] += amp * q.amp * std::exp(-tt / q.tau)
                                       * std::sin(two_pi * q.freq * tt + q.phase);
            }
        }
        ++beat;
        t += rng.uniform(0.14, 0.3);
    }

    // a quieter gliding-tone texture on top: its smooth moving plateaus make
    // every window within a section unique, which sharpens localization, while
    // the click bed keeps all ratios bounded when the mix is resampled
    {
        double t2 = 0.0;
        while (t2 < duration_s) {
            const std::size_t section = std::min<std::size_t>(
                n_sections - 1, static_cast<std::size_t>(t2 / section_s));
            const double reg = registers[section];
            const double note_s = rng.uniform(0.35, 0.7);
            const std::size_t k0 = static_cast<std::size_t>(t2 * sample_rate);
            const std::size_t len = std::min<std::size_t>(
                n - k0, static_cast<std::size_t>(note_s * sample_rate));
            if (len == 0) break;

            struct Chirp {
                double fc, width, dir, amp, phase;
            };
            std::vector<Chirp> chirps;
            const double fc1 =
                std::min(nyquist * 0.35, 110.0 * std::pow(2.0, 3.4 * reg)
                                             * std::pow(2.0, rng.uniform(-0.25, 0.25)));
            const double fc2 = std::min(nyquist * 0.35, fc1 * std::pow(2.0, rng.uniform(0.9, 1.8)));
            const double fc3 = std::min(nyquist * 0.4, 2400.0 * std::pow(2.0, rng.uniform(0.0, 0.8)));
            for (double fc : {fc1, fc2, fc3}) {
                Chirp c;
                c.fc = fc;
                c.width = rng.uniform(0.7, 1.1);
                c.dir = rng.uniform01() < 0.5 ? -1.0 : 1.0;
                c.amp = (fc == fc3 ? 0.5 : 1.0) * rng.uniform(0.6, 1.0);
                c.phase = rng.uniform(0.0, two_pi);
                chirps.push_back(c);
            }
            const double attack = 0.015 * sample_rate;
            std::vector<double> phase(chirps.size());
            for (std::size_t i = 0; i < chirps.size(); ++i) phase[i] = chirps[i].phase;
            const double level = 0.10 * section_level[section];
            for (std::size_t k = 0; k < len; ++k) {
                const double u = static_cast<double>(k) / static_cast<double>(len) - 0.5;
                double v = 0.0;
                for (std::size_t i = 0; i < chirps.size(); ++i) {
                    const auto& c = chirps[i];
                    const double f = std::min(nyquist * 0.45,
                                              c.fc * std::pow(2.0, c.dir * c.width * u));
                    phase[i] += two_pi * f / sample_rate;
                    v += c.amp * std::sin(phase[i]);
                }
                double env = 1.0;
                if (static_cast<double>(k) < attack) env = static_cast<double>(k) / attack;
                const double tail = static_cast<double>(len - 1 - k);
                if (tail < attack) env *= tail / attack;
                out.samples[k0 + k] += level * v * env;
            }
            t2 += note_s;
        }
    }

    double peak = 0.0;
    for (double v : out.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        const double scale = 0.45 / peak;
        for (auto& v : out.samples) v *= scale;
    }
    return out;
}

// --- mix manifest -------------------------------------------------------------

// Everything needed to regenerate a mix bit-exactly and to sample its ground
// truth on the analysis grid the transcription will use.
struct MixManifest {
    std::vector<std::string> track_paths;
    std::vector<WarpSpec> warps;
    std::vector<GainSpec> gains;
    double noise_level = 0.0;
    std::uint64_t seed = 0;
    SpectrogramParams grid;
};

inline nlohmann::json manifest_to_json(const MixManifest& m)
{
    nlohmann::json j;
    j["tracks"] = m.track_paths;
    j["warp"] = nlohmann::json::array();
    for (const auto& spec : m.warps) {
        nlohmann::json segs = nlohmann::json::array();
        for (const auto& s : spec.segments)
            segs.push_back({{"mix_start_s", s.mix_start_s},
                            {"mix_end_s", s.mix_end_s},
                            {"track_start_s", s.track_start_s},
                            {"speed", s.speed}});
        j["warp"].push_back(std::move(segs));
    }
    j["gain"] = nlohmann::json::array();
    for (const auto& spec : m.gains) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : spec.breakpoints)
            pts.push_back({{"time_s", p.time_s}, {"gain", p.gain}});
        j["gain"].push_back(std::move(pts));
    }
    j["noise_level"] = m.noise_level;
    j["seed"] = m.seed;
    j["grid"] = {{"hlen", m.grid.hlen}, {"wlen", m.grid.wlen},
                 {"window", window_name(m.grid.window)}};
    return j;
}

inline MixManifest manifest_from_json(const nlohmann::json& j)
{
    MixManifest m;
    m.track_paths = j.at("tracks").get<std::vector<std::string>>();
    for (const auto& segs : j.at("warp")) {
        WarpSpec spec;
        for (const auto& s : segs)
            spec.segments.push_back({s.at("mix_start_s").get<double>(),
                                     s.at("mix_end_s").get<double>(),
                                     s.at("track_start_s").get<double>(),
                                     s.at("speed").get<double>()});
        m.warps.push_back(std::move(spec));
    }
    for (const auto& pts : j.at("gain")) {
        GainSpec spec;
        for (const auto& p : pts)
            spec.breakpoints.push_back({p.at("time_s").get<double>(), p.at("gain").get<double>()});
        m.gains.push_back(std::move(spec));
    }
    m.noise_level = j.value("noise_level", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("grid")) {
        m.grid.hlen = j["grid"].value("hlen", std::size_t{1024});
        m.grid.wlen = j["grid"].value("wlen", std::size_t{8192});
        m.grid.window = window_from_name(j["grid"].value("window", "hann"));
    }
    if (m.track_paths.size() != m.warps.size() || m.track_paths.size() != m.gains.size())
        throw InvalidInput("manifest: per-track spec counts disagree");
    return m;
}

} // namespace mixscribe
