// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Criteria 6/8/9 drive the CLI binary (MIXSCRIBE_CLI) through the
// full synth -> transcribe -> eval pipeline.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"

#include "mixscribe/mixscribe.hpp"

#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mixscribe;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail)
{
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << detail
              << std::endl;
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double zero_fraction = 0.0)
{
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = rng.uniform01() < zero_fraction ? 0.0 : rng.uniform(0.05, 2.0);
    return m;
}

struct Problem {
    Matrix y;
    Matrix x;
    BlockSparseActivations h;
    DictionaryLayout layout;
};

Problem random_problem(Rng& rng, double zero_fraction)
{
    const std::size_t m = 8 + rng.next_u32() % 25;  // 8..32
    const std::size_t k = 16 + rng.next_u32() % 49; // 16..64
    const std::size_t t1 = 1 + rng.next_u32() % 3;
    const std::size_t t2 = 1 + rng.next_u32() % 3;
    const std::size_t r = 1 + rng.next_u32() % 2; // total rank <= 8
    Problem p;
    p.x = random_matrix(m, t1 + t2 + r, rng);
    std::vector<ActivationBlock> blocks;
    blocks.push_back(from_dense(random_matrix(t1, k, rng, zero_fraction), 0, 0));
    blocks.push_back(from_dense(random_matrix(t2, k, rng, zero_fraction), t1, 1));
    blocks.push_back(from_dense(random_matrix(r, k, rng), t1 + t2, kNoiseBlockId));
    p.h = BlockSparseActivations(std::move(blocks));
    p.layout = layout_from_activations(p.h);
    p.y = random_matrix(m, k, rng);
    return p;
}

// ---- criterion 1: IS-NMF monotonicity -------------------------------------

void criterion_1()
{
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    NmfConfig cfg;
    cfg.max_iters = 40;
    cfg.rel_tol = 1e-9;

    std::size_t checked_steps = 0;
    bool monotone = true;
    double worst = 0.0;
    for (int round = 0; round < 100; ++round) {
        Problem p = random_problem(rng, 0.2);
        const IsnmfResult out = isnmf(p.y, p.x, p.h, p.layout, cfg);
        for (std::size_t i = 1; i < out.trace.size(); ++i) {
            const double rel = (out.trace[i] - out.trace[i - 1]) / out.trace[i - 1];
            worst = std::max(worst, rel);
            if (rel > 1e-9) monotone = false;
            ++checked_steps;
        }
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << "100 seeded problems, " << checked_steps << " steps, worst relative increase "
           << worst << ", " << elapsed << " s";
    report(1, monotone && elapsed < 10.0, detail.str());
}

// ---- criterion 2: zero-lock and partial updates ----------------------------

void criterion_2()
{
    Rng rng(2002);
    NmfConfig cfg;
    cfg.max_iters = 50;
    cfg.rel_tol = 1e-12; // never triggers within 50 iterations on random data
    bool ok = true;
    for (int round = 0; round < 20; ++round) {
        Problem p = random_problem(rng, 0.45);
        const Matrix mask = to_dense(p.h);
        const Matrix x_before = p.x;
        const IsnmfResult out = isnmf(p.y, p.x, p.h, p.layout, cfg);

        const Matrix after = to_dense(out.h);
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask.data()[i] == 0.0 && after.data()[i] != 0.0) ok = false;

        const std::size_t frozen_cols = p.layout.total_columns() - p.layout.noise_width;
        for (std::size_t c = 0; c < frozen_cols && ok; ++c)
            for (std::size_t m = 0; m < p.x.rows(); ++m)
                if (out.x(m, c) != x_before(m, c)) ok = false;
    }
    report(2, ok, "50 iterations x 20 masked problems: out-of-support entries exactly 0, "
                  "track dictionaries bit-identical");
}

// ---- criterion 3: estimator exactness --------------------------------------

void criterion_3()
{
    Rng rng(3003);
    bool ok = true;
    double worst_gain = 0.0;
    for (int round = 0; round < 1000 && ok; ++round) {
        const std::size_t track_frames = 16 + rng.next_u32() % 48;
        const std::size_t k = 8 + rng.next_u32() % 32;

        std::vector<std::uint32_t> rows(track_frames);
        for (std::size_t i = 0; i < track_frames; ++i) rows[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = track_frames - 1; i > 0; --i)
            std::swap(rows[i], rows[rng.next_u32() % (i + 1)]);

        GainCurve g;
        WarpCurve f;
        for (std::size_t c = 0; c < k; ++c) {
            if (rng.uniform01() < 0.15) {
                g.values.push_back(0.0);
                f.values.push_back(std::nullopt);
            } else {
                g.values.push_back(rng.uniform(1e-3, 4.0));
                f.values.push_back(rows[c % track_frames]);
            }
        }
        const ActivationBlock block = ideal_activation(g, f, track_frames);
        const GainCurve g2 = estimate_gain(block);
        const WarpCurve f2 = estimate_warp(block);
        for (std::size_t c = 0; c < k; ++c) {
            if (f.values[c].has_value()) {
                if (!f2.values[c].has_value() || *f2.values[c] != *f.values[c]) ok = false;
                const double rel = std::abs(g2.values[c] - g.values[c]) / g.values[c];
                worst_gain = std::max(worst_gain, rel);
                if (rel > 1e-12) ok = false;
            } else {
                if (f2.values[c].has_value() || g2.values[c] != 0.0) ok = false;
            }
        }
    }
    std::ostringstream detail;
    detail << "1000 random (g, f) pairs inverted; worst gain relative error " << worst_gain;
    report(3, ok, detail.str());
}

// ---- criterion 4: sparse vs dense oracles ----------------------------------

void criterion_4()
{
    Rng rng(4004);
    bool ok = true;
    double worst = 0.0;
    for (int round = 0; round < 100; ++round) {
        Problem p = random_problem(rng, 0.5);
        const Matrix h_dense = to_dense(p.h);

        const Matrix recon = reconstruct(p.x, p.h);
        const Matrix recon_oracle = oracle::matmul(p.x, h_dense);
        worst = std::max(worst, oracle::max_abs_rel_diff(recon, recon_oracle));

        const Matrix a = random_matrix(p.x.rows(), p.h.n_cols(), rng);
        const BlockSparseActivations g = masked_gram(p.x, a, p.h);
        const Matrix g_oracle = oracle::gram(p.x, a);
        for (std::size_t b = 0; b < g.block_count(); ++b) {
            const auto& block = g.block(b);
            for (std::size_t c = 0; c < block.n_cols(); ++c)
                for (const auto& e : block.column(c)) {
                    const double expect = g_oracle(block.row_offset() + e.row, c);
                    const double rel = std::abs(e.value - expect)
                                       / std::max({std::abs(expect), std::abs(e.value), 1e-300});
                    worst = std::max(worst, rel);
                }
        }
        if (worst > 1e-12) ok = false;
    }
    std::ostringstream detail;
    detail << "reconstruct and masked_gram vs dense triple loops on 100 instances, worst "
              "relative error "
           << worst;
    report(4, ok, detail.str());
}

// ---- criterion 5: morphology ------------------------------------------------

void criterion_5()
{
    FilterParams params;
    params.slope_min = 0.5;
    params.slope_max = 2.0;
    params.n_slopes = 3; // 0.5, 1, 2
    params.kernel_len = 4;

    bool ok = true;
    // survival: unions of full kernel translates along each sampled slope are
    // line segments of length >= d; they must come through untouched
    for (double s : sampled_slopes(params)) {
        const LineKernel kernel = line_kernel(s, params.kernel_len);
        Matrix img(24, 24);
        std::vector<std::pair<std::size_t, std::size_t>> painted;
        for (std::size_t anchor = 0; anchor < 4; ++anchor) {
            const long ar = 3 + std::lround(s * static_cast<double>(anchor));
            const long ac = 3 + static_cast<long>(anchor);
            for (const auto& [dr, dc] : kernel.cells) {
                img(static_cast<std::size_t>(ar + dr), static_cast<std::size_t>(ac + dc)) = 0.8;
                painted.push_back({static_cast<std::size_t>(ar + dr),
                                   static_cast<std::size_t>(ac + dc)});
            }
        }
        const Matrix out = morph_open_lines(img, params);
        for (const auto& [r, c] : painted)
            if (out(r, c) != 0.8) ok = false;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (out.data()[i] > img.data()[i]) ok = false;
    }

    // removal: isolated segments with fewer than d cells die along every slope
    Rng rng(5005);
    for (int round = 0; round < 30; ++round) {
        Matrix img(24, 24);
        const double s = rng.uniform(0.5, 2.0);
        const std::size_t len = 1 + rng.next_u32() % (params.kernel_len - 1); // 1..d-1
        const long r0 = 2 + static_cast<long>(rng.next_u32() % 12);
        const long c0 = 2 + static_cast<long>(rng.next_u32() % 12);
        for (std::size_t c = 0; c < len; ++c)
            img(static_cast<std::size_t>(r0 + std::lround(s * static_cast<double>(c))),
                static_cast<std::size_t>(c0) + c) = 1.0;
        const Matrix out = morph_open_lines(img, params);
        for (double v : out.data())
            if (v != 0.0) ok = false;
    }
    report(5, ok, "length >= d kernel-aligned segments survive with zero loss; isolated "
                  "segments shorter than d vanish");
}

// ---- shared pipeline machinery for criteria 6-9 -----------------------------

std::string cli_path()
{
    const char* env = std::getenv("MIXSCRIBE_CLI");
    return env ? env : "";
}

int run_cmd(const std::string& cmd)
{
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ReplicaSetup {
    fs::path dir;
    fs::path manifest;
    fs::path synth_dir;
};

// the mash-up replica: track 1 looped, track 2 time-stretched x1.2 with gain
// modulation, cross-fades, no added noise
ReplicaSetup prepare_replica(const fs::path& dir)
{
    fs::remove_all(dir);
    fs::create_directories(dir);
    const int sr = 22050;
    write_wav((dir / "t0.wav").string(), make_synthetic_track(71, 30.0, sr));
    write_wav((dir / "t1.wav").string(), make_synthetic_track(72, 30.0, sr));

    json manifest;
    manifest["tracks"] = {(dir / "t0.wav").string(), (dir / "t1.wav").string()};
    manifest["warp"] = {// track 1: play 0..14 s, then loop back to 2 s
                        {{{"mix_start_s", 0.0},
                          {"mix_end_s", 14.0},
                          {"track_start_s", 0.0},
                          {"speed", 1.0}},
                         {{"mix_start_s", 14.0},
                          {"mix_end_s", 26.0},
                          {"track_start_s", 2.0},
                          {"speed", 1.0}}},
                        // track 2: time-stretched x1.2 from 16 s to the end
                        {{{"mix_start_s", 16.0},
                          {"mix_end_s", 40.0},
                          {"track_start_s", 0.0},
                          {"speed", 1.2}}}};
    manifest["gain"] = {// fade in, hold, fade out across the crossfade region
                        {{{"time_s", 0.0}, {"gain", 0.0}},
                         {{"time_s", 2.0}, {"gain", 1.0}},
                         {{"time_s", 20.0}, {"gain", 1.0}},
                         {{"time_s", 26.0}, {"gain", 0.0}}},
                        // fade in plus a mid-mix gain dip ("gain modulation")
                        {{{"time_s", 16.0}, {"gain", 0.0}},
                         {{"time_s", 20.0}, {"gain", 1.0}},
                         {{"time_s", 27.0}, {"gain", 1.0}},
                         {{"time_s", 29.0}, {"gain", 0.55}},
                         {{"time_s", 31.0}, {"gain", 1.0}},
                         {{"time_s", 38.0}, {"gain", 1.0}},
                         {{"time_s", 40.0}, {"gain", 0.0}}}};
    manifest["noise_level"] = 0.0;
    manifest["seed"] = 17;
    manifest["grid"] = {{"hlen", 2048}, {"wlen", 16384}, {"window", "hann"}};

    ReplicaSetup setup;
    setup.dir = dir;
    setup.manifest = dir / "manifest.json";
    setup.synth_dir = dir / "synth";
    std::ofstream(setup.manifest) << manifest.dump(2);
    return setup;
}

bool run_replica_transcribe(const ReplicaSetup& setup, const fs::path& out_dir)
{
    const std::string cmd = "\"" + cli_path() + "\" transcribe --mix \""
                            + (setup.synth_dir / "mix.wav").string() + "\" --tracks \""
                            + (setup.dir / "t0.wav").string() + "\" --tracks \""
                            + (setup.dir / "t1.wav").string() + "\" --out \"" + out_dir.string()
                            + "\" --hlen-init 16384 --hlen-target 1024 --overlap 8 --seed 99";
    return run_cmd(cmd) == 0;
}

void criteria_6_8_9()
{
    if (cli_path().empty()) {
        report(6, false, "MIXSCRIBE_CLI not set");
        report(8, false, "MIXSCRIBE_CLI not set");
        report(9, false, "MIXSCRIBE_CLI not set");
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const ReplicaSetup setup = prepare_replica(fs::temp_directory_path() / "mixscribe_replica");

    const std::string synth_cmd = "\"" + cli_path() + "\" synth \"" + setup.manifest.string()
                                  + "\" --out \"" + setup.synth_dir.string() + "\"";
    if (run_cmd(synth_cmd) != 0) {
        report(6, false, "synth failed");
        report(8, false, "synth failed");
        report(9, false, "synth failed");
        return;
    }

    const fs::path out1 = setup.dir / "run1";
    if (!run_replica_transcribe(setup, out1)) {
        report(6, false, "transcribe failed");
        report(8, false, "transcribe failed");
        report(9, false, "transcribe failed");
        return;
    }

    const std::string eval_cmd = "\"" + cli_path() + "\" eval \""
                                 + (out1 / "result.json").string() + "\" --truth \""
                                 + (setup.synth_dir / "gt_track_00.csv").string()
                                 + "\" --truth \""
                                 + (setup.synth_dir / "gt_track_01.csv").string()
                                 + "\" > /dev/null";
    const bool eval_ok = run_cmd(eval_cmd) == 0;
    const double elapsed = seconds_since(t0);

    // criterion 6: thresholds on the metrics
    bool pass6 = eval_ok;
    double gain_mae = -1.0, warp_mae = -1.0, miss = -1.0;
    if (eval_ok) {
        json metrics;
        std::ifstream(out1 / "metrics.json") >> metrics;
        gain_mae = metrics["aggregate"]["gain_mae"].get<double>();
        warp_mae = metrics["aggregate"]["warp_mae_s"].get<double>();
        miss = metrics["aggregate"]["miss_rate"].get<double>();
        pass6 = gain_mae <= 0.1 && warp_mae <= 0.150 && miss <= 0.10;
    }
    {
        std::ostringstream detail;
        detail << "mash-up replica: gain MAE " << gain_mae << " (<= 0.1), warp MAE " << warp_mae
               << " s (<= 0.150), miss rate " << miss << " (<= 0.10), pipeline time " << elapsed
               << " s";
        report(6, pass6, detail.str());
    }

    // criterion 8: per-block density non-increasing from pass 2 onward
    {
        bool pass8 = true;
        json passes;
        std::ifstream(out1 / "passes.json") >> passes;
        std::ostringstream detail;
        detail << "densities per pass:";
        for (std::size_t p = 0; p < passes.size(); ++p) {
            detail << " [";
            for (std::size_t b = 0; b < passes[p]["densities"].size(); ++b) {
                const auto& d = passes[p]["densities"][b];
                if (d["track_id"].get<int>() < 0) continue;
                detail << (b ? " " : "") << d["density"].get<double>();
                if (p >= 2) {
                    const double prev =
                        passes[p - 1]["densities"][b]["density"].get<double>();
                    if (d["density"].get<double>() > prev + 1e-12) pass8 = false;
                }
            }
            detail << "]";
        }
        report(8, pass8, detail.str());
    }

    // criterion 9: identical seed, identical result.json
    {
        const fs::path out2 = setup.dir / "run2";
        bool pass9 = run_replica_transcribe(setup, out2);
        if (pass9) pass9 = slurp(out1 / "result.json") == slurp(out2 / "result.json");
        report(9, pass9, "two transcriptions with the same seed produce byte-identical "
                         "result.json");
    }
}

// ---- criterion 7: single-track identity -------------------------------------

void criterion_7()
{
    const int sr = 22050;
    const AudioBuffer track = make_synthetic_track(73, 20.0, sr);

    MultipassConfig cfg;
    cfg.hlen_init = 8192;
    cfg.hlen_target = 1024;
    cfg.overlap = 8;
    cfg.seed = 31;

    const MultipassResult result = multipass_nmf(track, {track}, cfg);
    const TranscriptionResult t = transcribe(result.h, result.grid, result.sample_rate);

    const std::size_t k = t.frames();
    std::size_t warp_ok = 0, gain_ok = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const auto& f = t.tracks[0].warp.values[c];
        if (f.has_value() && std::abs(static_cast<long>(*f) - static_cast<long>(c)) <= 1)
            ++warp_ok;
        if (std::abs(t.tracks[0].gain.values[c] - 1.0) <= 0.1) ++gain_ok;
    }
    const double warp_frac = static_cast<double>(warp_ok) / static_cast<double>(k);
    const double gain_frac = static_cast<double>(gain_ok) / static_cast<double>(k);
    std::ostringstream detail;
    detail << "identity mix: warp within +-1 frame on " << 100.0 * warp_frac
           << "% of frames, gain within +-0.1 on " << 100.0 * gain_frac << "% (need >= 95%)";
    report(7, warp_frac >= 0.95 && gain_frac >= 0.95, detail.str());
}

} // namespace

int main()
{
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criteria_6_8_9();
    criterion_7();

    std::cout << (g_failures == 0 ? "all acceptance criteria passed"
                                  : std::to_string(g_failures) + " criteria failed")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
