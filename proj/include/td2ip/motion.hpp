#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "td2ip/errors.hpp"

namespace td2ip {

// A motion clip: frames x joints x 3 coordinates in millimeters, row-major.
struct MotionSequence {
    int frames = 0;
    int joints = 0;
    double fps = 25.0;
    std::vector<double> xyz;

    double& at(int t, int j, int d) {
        return xyz[(static_cast<std::size_t>(t) * joints + j) * 3 + d];
    }
    double at(int t, int j, int d) const {
        return xyz[(static_cast<std::size_t>(t) * joints + j) * 3 + d];
    }
};

// MSQ text format. Line 1: "MSQ 1". Line 2: "<T> <J> <fps>". Then T lines of
// 3*J reals, joint-major. Accepts CRLF; errors carry 1-based line numbers.
MotionSequence load_msq(const std::filesystem::path& path);
void save_msq(const MotionSequence& seq, const std::filesystem::path& path);

// One training window plus its time-reversed counterpart. The reversed pair
// comes from flipping the full window [X;Y] and re-splitting: x_r holds the
// first t_past frames of the flipped window, y_r the whole flipped window.
struct TrainSample {
    int t_past = 0;
    int t_future = 0;
    int joints = 0;
    std::vector<double> x;    // t_past   x J x 3
    std::vector<double> y;    // t_future x J x 3
    std::vector<double> x_r;  // t_past   x J x 3
    std::vector<double> y_r;  // (t_past + t_future) x J x 3
};

// Fills (x_r, y_r) from (x, y) by direct reverse indexing.
void make_inverse_sample(TrainSample& sample);

// Sliding windows at offsets 0, stride, 2*stride, ... while they fit.
// A sequence shorter than one window yields an empty list.
std::vector<TrainSample> window_split(const MotionSequence& seq, int t_past, int t_future,
                                      int stride);

enum class MotionPattern { wave, walk, mixed };

MotionPattern pattern_from_string(const std::string& s);
std::string pattern_to_string(MotionPattern p);

// Knob ranges for the synthetic generator. Units: mm, rad/s, mm per frame.
struct SynthOptions {
    double base_range = 250.0;
    double amp_min = 10.0;
    double amp_max = 60.0;
    double freq_min = 0.8;
    double freq_max = 2.5;
    double drift_min = 1.0;
    double drift_max = 3.0;
};

// Seeded sinusoid-plus-drift motion. Each joint axis follows
// base + A*sin(w*t/fps + phi); "walk" adds a shared per-frame drift to all
// joints; "mixed" alternates wave/walk by sequence index. Deterministic in
// the seed.
std::vector<MotionSequence> synth_generate(std::uint64_t seed, int n_sequences, int frames,
                                           int joints, double fps, MotionPattern pattern,
                                           const SynthOptions& opt = {});

// Per-axis normalization statistics; identity when normalization is off.
struct NormStats {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> stddev{1.0, 1.0, 1.0};

    bool is_identity() const {
        return mean == std::array<double, 3>{0.0, 0.0, 0.0} &&
               stddev == std::array<double, 3>{1.0, 1.0, 1.0};
    }
};

// Mean and standard deviation per axis over the history (x) frames of the
// given samples only. Standard deviation is floored at 1e-8.
NormStats compute_stats(const std::vector<TrainSample>& train);

std::vector<double> normalize(const std::vector<double>& xyz, const NormStats& stats);
std::vector<double> denormalize(const std::vector<double>& xyz, const NormStats& stats);

// Windowed and split corpus. Split is 80/20 by sequence index; stats come
// from the training windows' history frames (identity if normalization is
// disabled). Samples are stored in raw millimeters.
struct Dataset {
    std::vector<TrainSample> train;
    std::vector<TrainSample> val;
    NormStats stats;
    bool normalized = true;
    int t_past = 0;
    int t_future = 0;
    int joints = 0;
    double fps = 25.0;
};

Dataset build_dataset(const std::vector<MotionSequence>& sequences, int t_past, int t_future,
                      int stride, bool normalize_inputs);

// All *.msq files in a directory, sorted by filename.
std::vector<MotionSequence> load_msq_dir(const std::filesystem::path& dir);

}  // namespace td2ip
