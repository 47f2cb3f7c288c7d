#include "td2ip/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace td2ip {

int horizon_to_frame(double ms, double fps) {
    if (!(ms > 0.0) || !(fps > 0.0))
        throw ConfigError("horizon_to_frame: ms and fps must be > 0");
    const long frame = std::lround(ms * fps / 1000.0);
    return static_cast<int>(std::max(frame, 1L));
}

namespace {

void check_sets(const SampleSet& preds, const SampleSet& gts) {
    if (preds.frames != gts.frames || preds.joints != gts.joints ||
        preds.samples.size() != gts.samples.size())
        throw DimensionError("mpjpe: sample sets disagree: " + std::to_string(preds.frames) + "x" +
                             std::to_string(preds.joints) + " x" +
                             std::to_string(preds.samples.size()) + " vs " +
                             std::to_string(gts.frames) + "x" + std::to_string(gts.joints) + " x" +
                             std::to_string(gts.samples.size()));
    if (preds.samples.empty()) throw DimensionError("mpjpe: no samples");
}

}  // namespace

double mpjpe_at_frame(const SampleSet& preds, const SampleSet& gts, int t) {
    check_sets(preds, gts);
    if (t < 1 || t > preds.frames)
        throw ConfigError("mpjpe_at_frame: frame " + std::to_string(t) + " outside [1, " +
                          std::to_string(preds.frames) + "]");
    const std::size_t row = static_cast<std::size_t>(preds.joints) * 3;
    const std::size_t offset = static_cast<std::size_t>(t - 1) * row;
    double acc = 0.0;
    for (std::size_t s = 0; s < preds.samples.size(); ++s) {
        const double* p = preds.samples[s].data() + offset;
        const double* g = gts.samples[s].data() + offset;
        for (int j = 0; j < preds.joints; ++j) {
            const double dx = p[j * 3] - g[j * 3];
            const double dy = p[j * 3 + 1] - g[j * 3 + 1];
            const double dz = p[j * 3 + 2] - g[j * 3 + 2];
            acc += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    }
    return acc / (static_cast<double>(preds.samples.size()) * preds.joints);
}

double mpjpe_average(const SampleSet& preds, const SampleSet& gts, const HorizonSpec& spec,
                     bool all_frames) {
    check_sets(preds, gts);
    std::vector<int> frames;
    if (all_frames) {
        frames.resize(static_cast<std::size_t>(preds.frames));
        std::iota(frames.begin(), frames.end(), 1);
    } else {
        if (spec.horizons_ms.empty()) throw ConfigError("mpjpe_average: no horizons configured");
        for (double ms : spec.horizons_ms) {
            const int f = horizon_to_frame(ms, spec.fps);
            if (f > preds.frames)
                throw ConfigError("horizon " + std::to_string(ms) + " ms maps to frame " +
                                  std::to_string(f) + " but only " + std::to_string(preds.frames) +
                                  " future frames exist");
            frames.push_back(f);
        }
    }
    double acc = 0.0;
    for (int f : frames) acc += mpjpe_at_frame(preds, gts, f);
    return acc / static_cast<double>(frames.size());
}

Gaussian gaussian_fit(const std::vector<std::vector<double>>& features) {
    const std::size_t n = features.size();
    if (n < 2) throw ConfigError("gaussian_fit: need at least 2 samples, got " + std::to_string(n));
    const std::size_t f = features[0].size();
    for (const auto& row : features)
        if (row.size() != f) throw DimensionError("gaussian_fit: ragged feature rows");

    Gaussian g;
    g.mean.assign(f, 0.0);
    for (const auto& row : features)
        for (std::size_t i = 0; i < f; ++i) g.mean[i] += row[i];
    for (double& m : g.mean) m /= static_cast<double>(n);

    g.cov.assign(f * f, 0.0);
    for (const auto& row : features)
        for (std::size_t i = 0; i < f; ++i) {
            const double di = row[i] - g.mean[i];
            for (std::size_t k = 0; k < f; ++k) g.cov[i * f + k] += di * (row[k] - g.mean[k]);
        }
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (double& c : g.cov) c *= inv;
    // Symmetrize away accumulation-order noise.
    for (std::size_t i = 0; i < f; ++i)
        for (std::size_t k = i + 1; k < f; ++k) {
            const double s = 0.5 * (g.cov[i * f + k] + g.cov[k * f + i]);
            g.cov[i * f + k] = s;
            g.cov[k * f + i] = s;
        }
    return g;
}

void jacobi_eigensym(const std::vector<double>& s, int n, std::vector<double>& eigenvalues,
                     std::vector<double>& q) {
    if (static_cast<std::size_t>(n) * n != s.size())
        throw DimensionError("jacobi_eigensym: matrix size mismatch");
    std::vector<double> a = s;
    q.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i) * n + i] = 1.0;

    auto off_sq = [&]() {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = i + 1; k < n; ++k) {
                const double v = a[static_cast<std::size_t>(i) * n + k];
                acc += 2.0 * v * v;
            }
        return acc;
    };
    double total_sq = 0.0;
    for (double v : a) total_sq += v * v;
    const double stop = std::max(1e-24, 1e-28 * total_sq);

    for (int sweep = 0; sweep < 100 && off_sq() > stop; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int r = p + 1; r < n; ++r) {
                const double apr = a[static_cast<std::size_t>(p) * n + r];
                if (std::abs(apr) < 1e-300) continue;
                const double app = a[static_cast<std::size_t>(p) * n + p];
                const double arr = a[static_cast<std::size_t>(r) * n + r];
                const double theta = (arr - app) / (2.0 * apr);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                const double tau = sn / (1.0 + c);

                a[static_cast<std::size_t>(p) * n + p] = app - t * apr;
                a[static_cast<std::size_t>(r) * n + r] = arr + t * apr;
                a[static_cast<std::size_t>(p) * n + r] = 0.0;
                a[static_cast<std::size_t>(r) * n + p] = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (i != p && i != r) {
                        const double aip = a[static_cast<std::size_t>(i) * n + p];
                        const double air = a[static_cast<std::size_t>(i) * n + r];
                        a[static_cast<std::size_t>(i) * n + p] = aip - sn * (air + tau * aip);
                        a[static_cast<std::size_t>(p) * n + i] =
                            a[static_cast<std::size_t>(i) * n + p];
                        a[static_cast<std::size_t>(i) * n + r] = air + sn * (aip - tau * air);
                        a[static_cast<std::size_t>(r) * n + i] =
                            a[static_cast<std::size_t>(i) * n + r];
                    }
                    const double qip = q[static_cast<std::size_t>(i) * n + p];
                    const double qir = q[static_cast<std::size_t>(i) * n + r];
                    q[static_cast<std::size_t>(i) * n + p] = qip - sn * (qir + tau * qip);
                    q[static_cast<std::size_t>(i) * n + r] = qir + sn * (qip - tau * qir);
                }
            }
        }
    }

    eigenvalues.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eigenvalues[i] = a[static_cast<std::size_t>(i) * n + i];

    // Stable descending order for deterministic downstream use.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return eigenvalues[x] > eigenvalues[y]; });
    std::vector<double> ev(eigenvalues.size());
    std::vector<double> qv(q.size());
    for (int col = 0; col < n; ++col) {
        ev[col] = eigenvalues[order[col]];
        for (int i = 0; i < n; ++i)
            qv[static_cast<std::size_t>(i) * n + col] =
                q[static_cast<std::size_t>(i) * n + order[col]];
    }
    eigenvalues = std::move(ev);
    q = std::move(qv);
}

std::vector<double> matrix_sqrt_psd(const std::vector<double>& s, int n) {
    if (static_cast<std::size_t>(n) * n != s.size())
        throw DimensionError("matrix_sqrt_psd: matrix size mismatch");
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k)
            if (std::abs(s[static_cast<std::size_t>(i) * n + k] -
                         s[static_cast<std::size_t>(k) * n + i]) > 1e-8)
                throw ContractError("matrix_sqrt_psd: input asymmetric beyond 1e-8 at (" +
                                    std::to_string(i) + "," + std::to_string(k) + ")");

    std::vector<double> eig, q;
    jacobi_eigensym(s, n, eig, q);
    for (double& v : eig) v = std::sqrt(std::max(v, 0.0));

    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k) {
            double acc = 0.0;
            for (int l = 0; l < n; ++l)
                acc += q[static_cast<std::size_t>(i) * n + l] * eig[l] *
                       q[static_cast<std::size_t>(k) * n + l];
            out[static_cast<std::size_t>(i) * n + k] = acc;
            out[static_cast<std::size_t>(k) * n + i] = acc;
        }
    return out;
}

double fid(const std::vector<std::vector<double>>& features_a,
           const std::vector<std::vector<double>>& features_b) {
    const Gaussian ga = gaussian_fit(features_a);
    const Gaussian gb = gaussian_fit(features_b);
    if (ga.mean.size() != gb.mean.size())
        throw DimensionError("fid: feature widths disagree: " + std::to_string(ga.mean.size()) +
                             " vs " + std::to_string(gb.mean.size()));
    const int n = static_cast<int>(ga.mean.size());

    double mean_term = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = ga.mean[i] - gb.mean[i];
        mean_term += d * d;
    }

    std::vector<double> prod(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) {
            const double av = ga.cov[static_cast<std::size_t>(i) * n + l];
            for (int k = 0; k < n; ++k)
                prod[static_cast<std::size_t>(i) * n + k] +=
                    av * gb.cov[static_cast<std::size_t>(l) * n + k];
        }
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k) {
            const double sym = 0.5 * (prod[static_cast<std::size_t>(i) * n + k] +
                                      prod[static_cast<std::size_t>(k) * n + i]);
            prod[static_cast<std::size_t>(i) * n + k] = sym;
            prod[static_cast<std::size_t>(k) * n + i] = sym;
        }
    const std::vector<double> root = matrix_sqrt_psd(prod, n);

    double trace_term = 0.0;
    for (int i = 0; i < n; ++i)
        trace_term += ga.cov[static_cast<std::size_t>(i) * n + i] +
                      gb.cov[static_cast<std::size_t>(i) * n + i] -
                      2.0 * root[static_cast<std::size_t>(i) * n + i];

    const double d2 = mean_term + trace_term;
    if (d2 < -1e-8)
        throw NumericError("fid: negative distance " + std::to_string(d2) +
                           " beyond numerical leakage");
    return std::max(d2, 0.0);
}

std::vector<std::array<double, 2>> pca_project_2d(
    const std::vector<std::vector<double>>& features) {
    const std::size_t n = features.size();
    if (n < 3)
        throw ConfigError("pca_project_2d: need at least 3 samples, got " + std::to_string(n));
    const std::size_t f = features[0].size();
    for (const auto& row : features)
        if (row.size() != f) throw DimensionError("pca_project_2d: ragged feature rows");

    std::vector<double> mean(f, 0.0);
    for (const auto& row : features)
        for (std::size_t i = 0; i < f; ++i) mean[i] += row[i];
    for (double& m : mean) m /= static_cast<double>(n);

    std::vector<double> cov(f * f, 0.0);
    for (const auto& row : features)
        for (std::size_t i = 0; i < f; ++i) {
            const double di = row[i] - mean[i];
            for (std::size_t k = 0; k < f; ++k) cov[i * f + k] += di * (row[k] - mean[k]);
        }
    for (double& c : cov) c /= static_cast<double>(n - 1);
    for (std::size_t i = 0; i < f; ++i)
        for (std::size_t k = i + 1; k < f; ++k) {
            const double s = 0.5 * (cov[i * f + k] + cov[k * f + i]);
            cov[i * f + k] = s;
            cov[k * f + i] = s;
        }

    std::vector<double> eig, q;
    jacobi_eigensym(cov, static_cast<int>(f), eig, q);

    // At most two principal axes; zero-variance axes project to 0.
    std::vector<std::array<double, 2>> out(n, {0.0, 0.0});
    for (int axis = 0; axis < 2 && axis < static_cast<int>(f); ++axis) {
        if (eig[static_cast<std::size_t>(axis)] <= 0.0) continue;
        std::vector<double> v(f);
        for (std::size_t i = 0; i < f; ++i) v[i] = q[i * f + static_cast<std::size_t>(axis)];
        // Sign convention: largest-magnitude entry positive.
        std::size_t arg = 0;
        for (std::size_t i = 1; i < f; ++i)
            if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
        if (v[arg] < 0.0)
            for (double& x : v) x = -x;
        for (std::size_t r = 0; r < n; ++r) {
            double acc = 0.0;
            for (std::size_t i = 0; i < f; ++i) acc += (features[r][i] - mean[i]) * v[i];
            out[r][static_cast<std::size_t>(axis)] = acc;
        }
    }
    return out;
}

std::vector<std::vector<double>> load_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("f0", 0) != 0)
        throw ParseError(path.string() + ": row 1: expected header 'f0,f1,...', got '" + line +
                         "'");
    std::size_t width = 1;
    for (char c : line) width += c == ',' ? 1 : 0;

    std::vector<std::vector<double>> rows;
    int row_no = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++row_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw ParseError(path.string() + ": row " + std::to_string(row_no) +
                                 ": bad value '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != width)
            throw ParseError(path.string() + ": row " + std::to_string(row_no) + ": expected " +
                             std::to_string(width) + " values, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_feature_csv(const std::vector<std::vector<double>>& rows,
                      const std::filesystem::path& path) {
    if (rows.empty()) throw ContractError("save_feature_csv: no rows");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t i = 0; i < rows[0].size(); ++i) out << (i ? ",f" : "f") << i;
    out << '\n';
    char buf[40];
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g", row[i]);
            out << (i ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace td2ip
