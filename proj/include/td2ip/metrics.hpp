#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "td2ip/errors.hpp"

namespace td2ip {

// Prediction lead times in milliseconds, mapped to future-frame indices via
// the sequence frame rate.
struct HorizonSpec {
    std::vector<double> horizons_ms{80.0, 160.0, 320.0, 400.0, 560.0, 1000.0};
    double fps = 25.0;
};

// 1-based index into the future segment: round(ms * fps / 1000), floored at 1.
// Whether the index fits the future length is checked at evaluation time.
int horizon_to_frame(double ms, double fps);

// A set of same-shaped frame blocks (one per evaluation sample), each
// frames x joints x 3 row-major.
struct SampleSet {
    int frames = 0;
    int joints = 0;
    std::vector<std::vector<double>> samples;
};

// Mean Euclidean distance (mm) over samples and joints at 1-based frame t.
double mpjpe_at_frame(const SampleSet& preds, const SampleSet& gts, int t);

// Arithmetic mean of mpjpe_at_frame over the spec's horizons. With
// `all_frames`, averages every future frame instead of the listed horizons.
double mpjpe_average(const SampleSet& preds, const SampleSet& gts, const HorizonSpec& spec,
                     bool all_frames = false);

struct Gaussian {
    std::vector<double> mean;  // F
    std::vector<double> cov;   // F x F, symmetrized
};

// Sample mean and unbiased covariance (N-1 divisor) of N x F feature rows.
Gaussian gaussian_fit(const std::vector<std::vector<double>>& features);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Eigenpairs are sorted by descending eigenvalue; eigenvectors are the
// columns of q (row-major n x n).
void jacobi_eigensym(const std::vector<double>& s, int n, std::vector<double>& eigenvalues,
                     std::vector<double>& q);

// Principal square root of a symmetric PSD matrix; negative eigenvalues are
// clamped to zero. Asymmetry beyond 1e-8 is a contract violation.
std::vector<double> matrix_sqrt_psd(const std::vector<double>& s, int n);

// Frechet distance between Gaussian fits of two feature clouds:
// |mu_a - mu_b|^2 + tr(cov_a + cov_b - 2 sqrt(sym(cov_a cov_b))), clamped
// at zero against numerical leakage.
double fid(const std::vector<std::vector<double>>& features_a,
           const std::vector<std::vector<double>>& features_b);

// Deterministic projection of N x F features onto the top-2 covariance
// eigenvectors. Sign convention: each eigenvector's largest-magnitude entry
// is positive. Rank-0 data maps to the origin.
std::vector<std::array<double, 2>> pca_project_2d(
    const std::vector<std::vector<double>>& features);

struct EvalReport {
    std::vector<std::pair<double, double>> mpjpe_per_horizon;  // (ms, mm), input order
    double mpjpe_avg = 0.0;
    std::optional<double> fid_value;
    std::int64_t param_count = 0;
};

// Feature CSV: header "f0,f1,...", one sample per row.
std::vector<std::vector<double>> load_feature_csv(const std::filesystem::path& path);
void save_feature_csv(const std::vector<std::vector<double>>& rows,
                      const std::filesystem::path& path);

}  // namespace td2ip
