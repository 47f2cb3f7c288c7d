#include "td2ip/motion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "td2ip/rng.hpp"

namespace td2ip {

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

double parse_real(const std::string& tok, const std::filesystem::path& path, int line_no) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                         ": not a finite number: '" + tok + "'");
    return v;
}

long parse_int(const std::string& tok, const std::filesystem::path& path, int line_no) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                         ": not an integer: '" + tok + "'");
    return v;
}

// getline with CRLF tolerance; returns false at EOF.
bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace

MotionSequence load_msq(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    int line_no = 0;

    if (!next_line(in, line))
        throw ParseError(path.string() + ": line 1: empty file, expected 'MSQ 1'");
    ++line_no;
    if (auto toks = split_ws(line); toks.size() != 2 || toks[0] != "MSQ" || toks[1] != "1")
        throw ParseError(path.string() + ": line 1: bad magic/version, expected 'MSQ 1', got '" +
                         line + "'");

    if (!next_line(in, line))
        throw ParseError(path.string() + ": line 1: missing header line '<T> <J> <fps>'");
    ++line_no;
    auto head = split_ws(line);
    if (head.size() != 3)
        throw ParseError(path.string() + ": line 2: expected '<T> <J> <fps>', got '" + line + "'");
    const long t = parse_int(head[0], path, 2);
    const long j = parse_int(head[1], path, 2);
    const double fps = parse_real(head[2], path, 2);
    if (t < 1 || j < 1 || !(fps > 0.0))
        throw ParseError(path.string() + ": line 2: need T >= 1, J >= 1, fps > 0, got '" + line +
                         "'");

    MotionSequence seq;
    seq.frames = static_cast<int>(t);
    seq.joints = static_cast<int>(j);
    seq.fps = fps;
    seq.xyz.reserve(static_cast<std::size_t>(t) * j * 3);

    for (long frame = 0; frame < t; ++frame) {
        if (!next_line(in, line))
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": unexpected end of file, expected " + std::to_string(t) +
                             " frame lines, got " + std::to_string(frame));
        ++line_no;
        auto toks = split_ws(line);
        if (toks.size() != static_cast<std::size_t>(3 * j))
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(3 * j) + " values, got " + std::to_string(toks.size()));
        for (const auto& tok : toks) seq.xyz.push_back(parse_real(tok, path, line_no));
    }
    return seq;
}

void save_msq(const MotionSequence& seq, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "MSQ 1\n" << seq.frames << ' ' << seq.joints << ' ' << fmt9(seq.fps) << '\n';
    for (int t = 0; t < seq.frames; ++t) {
        for (int c = 0; c < seq.joints * 3; ++c) {
            if (c) out << ' ';
            out << fmt9(seq.xyz[static_cast<std::size_t>(t) * seq.joints * 3 + c]);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void make_inverse_sample(TrainSample& s) {
    const int t_total = s.t_past + s.t_future;
    const std::size_t row = static_cast<std::size_t>(s.joints) * 3;
    // Full window P = [X;Y], reversed in time.
    s.y_r.assign(static_cast<std::size_t>(t_total) * row, 0.0);
    for (int t = 0; t < t_total; ++t) {
        const int src = t_total - 1 - t;
        const double* from = src < s.t_past ? &s.x[static_cast<std::size_t>(src) * row]
                                            : &s.y[static_cast<std::size_t>(src - s.t_past) * row];
        std::copy_n(from, row, &s.y_r[static_cast<std::size_t>(t) * row]);
    }
    s.x_r.assign(s.y_r.begin(), s.y_r.begin() + static_cast<std::size_t>(s.t_past) * row);
}

std::vector<TrainSample> window_split(const MotionSequence& seq, int t_past, int t_future,
                                      int stride) {
    if (t_past < 1 || t_future < 1 || stride < 1)
        throw ConfigError("window_split: t_past, t_future and stride must all be >= 1");
    std::vector<TrainSample> out;
    const std::size_t row = static_cast<std::size_t>(seq.joints) * 3;
    for (int start = 0; start + t_past + t_future <= seq.frames; start += stride) {
        TrainSample s;
        s.t_past = t_past;
        s.t_future = t_future;
        s.joints = seq.joints;
        s.x.assign(seq.xyz.begin() + static_cast<std::size_t>(start) * row,
                   seq.xyz.begin() + static_cast<std::size_t>(start + t_past) * row);
        s.y.assign(seq.xyz.begin() + static_cast<std::size_t>(start + t_past) * row,
                   seq.xyz.begin() + static_cast<std::size_t>(start + t_past + t_future) * row);
        make_inverse_sample(s);
        out.push_back(std::move(s));
    }
    return out;
}

MotionPattern pattern_from_string(const std::string& s) {
    if (s == "wave") return MotionPattern::wave;
    if (s == "walk") return MotionPattern::walk;
    if (s == "mixed") return MotionPattern::mixed;
    throw ConfigError("unknown pattern '" + s + "' (expected wave, walk or mixed)");
}

std::string pattern_to_string(MotionPattern p) {
    switch (p) {
        case MotionPattern::wave: return "wave";
        case MotionPattern::walk: return "walk";
        case MotionPattern::mixed: return "mixed";
    }
    return "wave";
}

std::vector<MotionSequence> synth_generate(std::uint64_t seed, int n_sequences, int frames,
                                           int joints, double fps, MotionPattern pattern,
                                           const SynthOptions& opt) {
    if (n_sequences < 1 || frames < 1 || joints < 1)
        throw ConfigError("synth_generate: counts must be >= 1");
    if (!(fps > 0.0)) throw ConfigError("synth_generate: fps must be > 0");

    std::vector<MotionSequence> out;
    out.reserve(static_cast<std::size_t>(n_sequences));
    for (int s = 0; s < n_sequences; ++s) {
        Rng rng = Rng::stream(seed, "datagen", static_cast<std::uint64_t>(s));
        const bool walking = pattern == MotionPattern::walk ||
                             (pattern == MotionPattern::mixed && s % 2 == 1);

        const int n_axes = joints * 3;
        std::vector<double> base(n_axes), amp(n_axes), omega(n_axes), phase(n_axes);
        for (int a = 0; a < n_axes; ++a) {
            base[a] = rng.uniform(-opt.base_range, opt.base_range);
            amp[a] = rng.uniform(opt.amp_min, opt.amp_max);
            omega[a] = rng.uniform(opt.freq_min, opt.freq_max);
            phase[a] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        std::array<double, 3> drift{0.0, 0.0, 0.0};
        if (walking) {
            for (int d = 0; d < 3; ++d) {
                const double mag = rng.uniform(opt.drift_min, opt.drift_max);
                drift[d] = rng.uniform() < 0.5 ? -mag : mag;
            }
        }

        MotionSequence seq;
        seq.frames = frames;
        seq.joints = joints;
        seq.fps = fps;
        seq.xyz.resize(static_cast<std::size_t>(frames) * n_axes);
        for (int t = 0; t < frames; ++t) {
            const double sec = static_cast<double>(t) / fps;
            for (int a = 0; a < n_axes; ++a)
                seq.xyz[static_cast<std::size_t>(t) * n_axes + a] =
                    base[a] + amp[a] * std::sin(omega[a] * sec + phase[a]) + t * drift[a % 3];
        }
        out.push_back(std::move(seq));
    }
    return out;
}

NormStats compute_stats(const std::vector<TrainSample>& train) {
    NormStats stats;
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    std::array<double, 3> sum_sq{0.0, 0.0, 0.0};
    std::size_t count = 0;
    for (const TrainSample& s : train) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            sum[i % 3] += s.x[i];
            sum_sq[i % 3] += s.x[i] * s.x[i];
        }
        count += s.x.size() / 3;
    }
    if (count == 0) throw ConfigError("compute_stats: no history frames");
    for (int d = 0; d < 3; ++d) {
        stats.mean[d] = sum[d] / static_cast<double>(count);
        const double var = sum_sq[d] / static_cast<double>(count) - stats.mean[d] * stats.mean[d];
        stats.stddev[d] = std::max(std::sqrt(std::max(var, 0.0)), 1e-8);
    }
    return stats;
}

std::vector<double> normalize(const std::vector<double>& xyz, const NormStats& stats) {
    std::vector<double> out(xyz.size());
    for (std::size_t i = 0; i < xyz.size(); ++i)
        out[i] = (xyz[i] - stats.mean[i % 3]) / stats.stddev[i % 3];
    return out;
}

std::vector<double> denormalize(const std::vector<double>& xyz, const NormStats& stats) {
    std::vector<double> out(xyz.size());
    for (std::size_t i = 0; i < xyz.size(); ++i)
        out[i] = xyz[i] * stats.stddev[i % 3] + stats.mean[i % 3];
    return out;
}

Dataset build_dataset(const std::vector<MotionSequence>& sequences, int t_past, int t_future,
                      int stride, bool normalize_inputs) {
    if (sequences.empty()) throw ConfigError("build_dataset: no sequences");
    const int joints = sequences[0].joints;
    const double fps = sequences[0].fps;
    for (std::size_t i = 1; i < sequences.size(); ++i) {
        if (sequences[i].joints != joints)
            throw ConfigError("build_dataset: sequence " + std::to_string(i) + " has " +
                              std::to_string(sequences[i].joints) + " joints, expected " +
                              std::to_string(joints));
        if (sequences[i].fps != fps)
            throw ConfigError("build_dataset: sequence " + std::to_string(i) +
                              " has fps " + std::to_string(sequences[i].fps) + ", expected " +
                              std::to_string(fps));
    }

    // Split by whole sequence so correlated windows never straddle the split.
    const std::size_t n = sequences.size();
    std::size_t n_train = std::max<std::size_t>(1, n * 4 / 5);
    if (n_train == n && n > 1) n_train = n - 1;

    Dataset ds;
    ds.t_past = t_past;
    ds.t_future = t_future;
    ds.joints = joints;
    ds.fps = fps;
    ds.normalized = normalize_inputs;
    for (std::size_t i = 0; i < n; ++i) {
        auto windows = window_split(sequences[i], t_past, t_future, stride);
        auto& dst = i < n_train ? ds.train : ds.val;
        for (auto& w : windows) dst.push_back(std::move(w));
    }
    if (normalize_inputs && !ds.train.empty()) ds.stats = compute_stats(ds.train);
    return ds;
}

std::vector<MotionSequence> load_msq_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("data directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".msq")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .msq files in " + dir.string());
    std::vector<MotionSequence> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(load_msq(f));
    return out;
}

}  // namespace td2ip
