#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mixscribe/block_sparse.hpp"
#include "mixscribe/errors.hpp"
#include "mixscribe/filtering.hpp"
#include "mixscribe/nmf.hpp"
#include "mixscribe/random.hpp"
#include "mixscribe/spectrogram.hpp"

namespace mixscribe {

struct MultipassConfig {
    std::size_t hlen_init = 32768;  // samples, power of two
    std::size_t hlen_target = 1024; // samples, power of two
    std::size_t overlap = 8;        // window-to-hop ratio
    std::size_t noise_rank = 8;     // R
    WindowType window = WindowType::Hann;
    FilterParams filter;
    NmfConfig nmf;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!fft::is_pow2(hlen_init) || !fft::is_pow2(hlen_target))
            throw InvalidParams("hlen_init and hlen_target must be powers of two");
        if (hlen_target > hlen_init)
            throw InvalidParams("hlen_target must not exceed hlen_init");
        if (overlap < 2) throw InvalidParams("overlap must be >= 2");
        if (noise_rank == 0) throw InvalidParams("noise_rank must be >= 1");
        filter.validate();
        nmf.validate();
    }

    // passes executed by the halving schedule: log2(hlen_init / hlen_target)
    std::size_t pass_count() const
    {
        std::size_t n = 0;
        for (std::size_t h = hlen_init; h > hlen_target; h /= 2) ++n;
        return n;
    }

    // hop size of the last executed pass
    std::size_t final_hlen() const { return hlen_target * 2; }
};

struct BlockDensity {
    int track_id = 0;
    double density = 0.0;
};

struct PassReport {
    std::size_t hlen = 0;
    std::size_t wlen = 0;
    std::size_t iterations = 0;
    double final_divergence = 0.0;
    std::size_t mix_frames = 0;
    std::vector<BlockDensity> densities;
};

inline void to_json(nlohmann::json& j, const PassReport& r)
{
    j = nlohmann::json{{"hlen", r.hlen},
                       {"wlen", r.wlen},
                       {"iterations", r.iterations},
                       {"final_divergence", r.final_divergence},
                       {"mix_frames", r.mix_frames}};
    j["densities"] = nlohmann::json::array();
    for (const auto& d : r.densities)
        j["densities"].push_back({{"track_id", d.track_id}, {"density", d.density}});
}

struct MultipassResult {
    BlockSparseActivations h;  // final activations, on the last executed grid
    Matrix noise_dictionary;   // learned X-bar of the final pass (M x R)
    SpectrogramParams grid;    // last executed grid
    int sample_rate = 0;
    std::vector<PassReport> passes;
};

namespace detail {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng)
{
    Matrix m(rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double* col = m.col(c);
        for (std::size_t r = 0; r < rows; ++r) col[r] = rng.uniform(0.1, 1.1);
    }
    return m;
}

} // namespace detail

// The coarse-to-fine driver: run IS-NMF at a halving hop schedule, seeding
// each pass's track activations with the filtered and rescaled activations of
// the previous pass. The noise dictionary and noise rows are redrawn every
// pass.
using PassCallback = std::function<void(const PassReport&)>;

inline MultipassResult multipass_nmf(const AudioBuffer& mix,
                                     const std::vector<AudioBuffer>& tracks,
                                     const MultipassConfig& cfg,
                                     const PassCallback& on_pass = {})
{
    cfg.validate();
    if (tracks.empty()) throw InvalidInput("multipass_nmf: at least one track required");
    for (std::size_t i = 0; i < tracks.size(); ++i)
        if (tracks[i].sample_rate != mix.sample_rate)
            throw InvalidInput("track " + std::to_string(i) + " sample rate ("
                               + std::to_string(tracks[i].sample_rate)
                               + " Hz) differs from the mix ("
                               + std::to_string(mix.sample_rate) + " Hz)");
    if (cfg.hlen_init <= cfg.hlen_target)
        throw InvalidParams("empty hop schedule: hlen_init (" + std::to_string(cfg.hlen_init)
                            + ") must exceed hlen_target (" + std::to_string(cfg.hlen_target)
                            + ")");

    const std::size_t coarsest_wlen = cfg.hlen_init * cfg.overlap;
    for (std::size_t i = 0; i < tracks.size(); ++i)
        if (tracks[i].samples.size() < coarsest_wlen)
            throw InvalidInput("track " + std::to_string(i)
                               + " is shorter than the coarsest analysis window ("
                               + std::to_string(coarsest_wlen) + " samples)");
    if (mix.samples.size() < coarsest_wlen)
        throw InvalidInput("mix is shorter than the coarsest analysis window ("
                           + std::to_string(coarsest_wlen) + " samples)");

    Rng rng(cfg.seed);
    MultipassResult result;
    result.sample_rate = mix.sample_rate;

    BlockSparseActivations h;
    bool first_pass = true;

    for (std::size_t hlen = cfg.hlen_init; hlen > cfg.hlen_target; hlen /= 2) {
        SpectrogramParams params{hlen * cfg.overlap, hlen, cfg.window};

        std::vector<Spectrogram> track_specs;
        track_specs.reserve(tracks.size());
        std::vector<std::size_t> track_frames;
        for (const auto& t : tracks) {
            track_specs.push_back(stft_power(t, params));
            track_frames.push_back(track_specs.back().frames());
        }
        const Spectrogram y = stft_power(mix, params);
        const std::size_t k_frames = y.frames();
        const std::size_t m_bins = y.bins();

        // activation init: random noise at the coarsest pass, filtered and
        // rescaled activations afterwards
        std::vector<ActivationBlock> blocks;
        std::size_t offset = 0;
        if (first_pass) {
            for (std::size_t i = 0; i < tracks.size(); ++i) {
                blocks.push_back(from_dense(detail::random_matrix(track_frames[i], k_frames, rng),
                                            offset, static_cast<int>(i)));
                offset += track_frames[i];
            }
        } else {
            const BlockSparseActivations filtered = interpass_filter(h, cfg.filter);
            for (std::size_t i = 0; i < tracks.size(); ++i) {
                ActivationBlock scaled =
                    scale_block(filtered.block(i), track_frames[i], k_frames);
                scaled.set_row_offset(offset);
                offset += scaled.n_rows();
                blocks.push_back(std::move(scaled));
            }
        }
        const Matrix xbar = detail::random_matrix(m_bins, cfg.noise_rank, rng);
        blocks.push_back(from_dense(detail::random_matrix(cfg.noise_rank, k_frames, rng), offset,
                                    kNoiseBlockId));
        h = BlockSparseActivations(std::move(blocks));

        // concatenated dictionary: frozen track spectrograms, then X-bar
        DictionaryLayout layout = layout_from_activations(h);
        Matrix x(m_bins, layout.total_columns());
        std::size_t col = 0;
        for (const auto& spec : track_specs) {
            for (std::size_t c = 0; c < spec.frames(); ++c, ++col)
                std::copy(spec.data.col(c), spec.data.col(c) + m_bins, x.col(col));
        }
        for (std::size_t c = 0; c < cfg.noise_rank; ++c, ++col)
            std::copy(xbar.col(c), xbar.col(c) + m_bins, x.col(col));

        IsnmfResult nmf_out = isnmf(y.data, std::move(x), std::move(h), layout, cfg.nmf);
        h = std::move(nmf_out.h);

        PassReport report;
        report.hlen = hlen;
        report.wlen = params.wlen;
        report.iterations = nmf_out.trace.size();
        report.final_divergence = nmf_out.trace.empty()
                                      ? is_divergence(y.data, reconstruct(nmf_out.x, h),
                                                      cfg.nmf.eps)
                                      : nmf_out.trace.back();
        report.mix_frames = k_frames;
        for (std::size_t b = 0; b < h.block_count(); ++b)
            report.densities.push_back({h.block(b).track_id(), density(h.block(b))});
        result.passes.push_back(std::move(report));
        if (on_pass) on_pass(result.passes.back());

        if (hlen / 2 <= cfg.hlen_target) {
            // last pass: keep the learned noise dictionary for diagnostics
            result.noise_dictionary = Matrix(m_bins, cfg.noise_rank);
            const std::size_t noise_off = layout.noise_offset();
            for (std::size_t c = 0; c < cfg.noise_rank; ++c)
                std::copy(nmf_out.x.col(noise_off + c), nmf_out.x.col(noise_off + c) + m_bins,
                          result.noise_dictionary.col(c));
            result.grid = params;
        }
        first_pass = false;
    }

    result.h = std::move(h);
    return result;
}

} // namespace mixscribe
