#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "mixscribe/errors.hpp"
#include "mixscribe/fft.hpp"
#include "mixscribe/matrix.hpp"
#include "mixscribe/parallel.hpp"

namespace mixscribe {

struct AudioBuffer {
    std::vector<double> samples; // mono, nominal range [-1, 1]
    int sample_rate = 0;         // Hz

    double duration_s() const
    {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

enum class WindowType { Hann, Rectangular };

inline std::string window_name(WindowType w)
{
    return w == WindowType::Hann ? "hann" : "rect";
}

inline WindowType window_from_name(const std::string& name)
{
    if (name == "hann") return WindowType::Hann;
    if (name == "rect" || name == "rectangular") return WindowType::Rectangular;
    throw InvalidParams("unknown window function: " + name);
}

struct SpectrogramParams {
    std::size_t wlen = 0; // analysis window length, samples, even
    std::size_t hlen = 0; // hop size, samples
    WindowType window = WindowType::Hann;

    void validate() const
    {
        if (wlen == 0 || hlen == 0) throw InvalidParams("wlen and hlen must be positive");
        if (wlen % 2 != 0) throw InvalidParams("wlen must be even, got " + std::to_string(wlen));
        if (hlen > wlen)
            throw InvalidParams("hlen (" + std::to_string(hlen) + ") must not exceed wlen ("
                                + std::to_string(wlen) + ")");
    }
};

// Power magnitude matrix: M = wlen/2 + 1 frequency bins, one column per frame.
struct Spectrogram {
    Matrix data;
    SpectrogramParams params;
    int sample_rate = 0;

    std::size_t bins() const { return data.rows(); }
    std::size_t frames() const { return data.cols(); }
};

// Framing rule shared by every module that maps times to frames: windows fully
// inside the signal, no padding, last partial window dropped.
inline std::size_t frame_count(std::size_t signal_len, const SpectrogramParams& params)
{
    params.validate();
    if (signal_len < params.wlen)
        throw InvalidInput("signal too short for analysis: " + std::to_string(signal_len)
                           + " samples < wlen " + std::to_string(params.wlen));
    return 1 + (signal_len - params.wlen) / params.hlen;
}

// Center-of-window time of a frame, in seconds.
inline double frame_to_time(std::size_t frame_index, const SpectrogramParams& params, int sample_rate)
{
    return (static_cast<double>(frame_index) * static_cast<double>(params.hlen)
            + static_cast<double>(params.wlen) / 2.0)
           / static_cast<double>(sample_rate);
}

// Inverse of frame_to_time, rounded to the nearest frame (unclamped, may be
// negative for times before the first window center).
inline long time_to_frame(double time_s, const SpectrogramParams& params, int sample_rate)
{
    const double pos = time_s * static_cast<double>(sample_rate);
    return std::lround((pos - static_cast<double>(params.wlen) / 2.0)
                       / static_cast<double>(params.hlen));
}

inline std::vector<double> make_window(WindowType type, std::size_t wlen)
{
    std::vector<double> w(wlen, 1.0);
    if (type == WindowType::Hann) {
        // periodic Hann
        for (std::size_t k = 0; k < wlen; ++k)
            w[k] = 0.5 - 0.5 * std::cos(2.0 * fft::kPi * static_cast<double>(k)
                                        / static_cast<double>(wlen));
    }
    return w;
}

// Squared-modulus STFT on a one-sided spectrum. Entry (m, n) is
// |sum_k x[k + n*hlen] w[k] e^{-j 2 pi k m / wlen}|^2.
inline Spectrogram stft_power(const AudioBuffer& audio, const SpectrogramParams& params)
{
    params.validate();
    if (audio.sample_rate <= 0) throw InvalidInput("audio buffer has no sample rate");
    const std::size_t n_frames = frame_count(audio.samples.size(), params);
    const std::size_t n_bins = params.wlen / 2 + 1;
    const std::vector<double> window = make_window(params.window, params.wlen);

    Spectrogram spec;
    spec.data = Matrix(n_bins, n_frames);
    spec.params = params;
    spec.sample_rate = audio.sample_rate;

    parallel_for(n_frames, [&](std::size_t n) {
        std::vector<std::complex<double>> buf(params.wlen);
        const double* x = audio.samples.data() + n * params.hlen;
        for (std::size_t k = 0; k < params.wlen; ++k)
            buf[k] = std::complex<double>(x[k] * window[k], 0.0);
        fft::transform(buf);
        double* out = spec.data.col(n);
        for (std::size_t m = 0; m < n_bins; ++m) out[m] = std::norm(buf[m]);
    });
    return spec;
}

} // namespace mixscribe
