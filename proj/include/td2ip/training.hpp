#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "td2ip/metrics.hpp"
#include "td2ip/model.hpp"
#include "td2ip/motion.hpp"
#include "td2ip/tensor.hpp"

namespace td2ip {

enum class OptimizerKind { adam, sgd };

OptimizerKind optimizer_from_string(const std::string& s);
std::string optimizer_to_string(OptimizerKind k);

struct TrainOptions {
    int epochs = 50;
    int batch_size = 16;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    bool use_forward_loss = true;
    bool use_reverse_loss = true;
    bool squared_loss = true;
    double grad_clip = 0.0;  // global-norm clip; 0 disables
    std::uint64_t seed = 1;

    void validate() const;
};

// Mean per-(frame, joint) squared distance between prediction and target
// (their shared T x J x 3 window); with squared = false the unsquared
// Euclidean norm is reduced instead.
Tensor loss_forward(Tape& tape, const Tensor& prediction, const Tensor& target, bool squared);
// Same formula on the reversed-direction tensors.
Tensor loss_reverse(Tape& tape, const Tensor& prediction, const Tensor& target, bool squared);

// Sum of the active terms. Inactive terms contribute exactly zero and their
// graphs are never built; selecting neither is a configuration error.
Tensor loss_total(Tape& tape, const std::optional<Tensor>& l_f, const std::optional<Tensor>& l_r);

// Per-array first/second moment state for Adam; unused by plain SGD.
struct OptimizerState {
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

// One update. Adam uses beta1 = 0.9, beta2 = 0.999, eps = 1e-8 with bias
// correction. A non-finite gradient aborts with the parameter's name.
void optimizer_step(Td2ipModel& model, const std::vector<std::vector<double>>& grads,
                    OptimizerState& state, const TrainOptions& opt);

// Balanced-tree sum; bit-stable under reversal of an even-length input and
// within rounding noise otherwise.
double pairwise_sum(const std::vector<double>& values);
double pairwise_mean(const std::vector<double>& values);

struct StepResult {
    std::vector<double> loss_f_per_sample;
    std::vector<double> loss_r_per_sample;
    std::vector<double> loss_per_sample;
};

// One gradient step on the mean per-sample loss of the batch. Samples must
// already be in model input space (normalized when the model expects it).
// Both directions, when active, contribute to the same parameters.
StepResult train_step(Td2ipModel& model, OptimizerState& state,
                      const std::vector<const TrainSample*>& batch, const TrainOptions& opt);

struct EpochLog {
    int epoch = 0;
    std::optional<double> loss_f;
    std::optional<double> loss_r;
    double loss_total = 0.0;
    double val_mpjpe = 0.0;
};

struct EvalResult {
    EvalReport report;
    SampleSet predictions;  // denormalized future frames
    SampleSet ground_truth;
};

// Validation-split evaluation in raw millimeters. FID compares predicted and
// ground-truth future trajectories pushed through the trained encoder; it is
// omitted when the encoder cannot consume t_future frames or the split is
// too small to fit Gaussians.
EvalResult evaluate_model(const Td2ipModel& model, const Dataset& data, const HorizonSpec& spec,
                          bool with_fid = true);

struct TrainResult {
    Td2ipModel model;
    std::vector<EpochLog> logs;
};

// Full run: seeded init, per-epoch shuffled batches, per-epoch validation
// MPJPE. Deterministic in (data, config, seed).
TrainResult run_training(const Dataset& data, const ModelConfig& model_config,
                         const TrainOptions& opt, const HorizonSpec& horizons);

void write_epoch_csv(const std::vector<EpochLog>& logs, const std::filesystem::path& path);

struct AblationVariant {
    std::string name;
    bool uses_lf = false;
    bool uses_lr = false;
    bool uses_tdd = false;
};

// The five admitted loss/decoder combinations, in report order.
const std::array<AblationVariant, 5>& ablation_variants();

struct AblationRow {
    AblationVariant variant;
    std::vector<double> mpjpe_per_seed;
    double mpjpe_mean = 0.0;
    double mpjpe_std = 0.0;  // sample std over seeds; 0 for a single seed
    std::int64_t param_count = 0;
};

// Trains every variant on identical data with identical seed lists
// (seed, seed+1, ...) and reports the average validation MPJPE over the
// configured horizons.
std::vector<AblationRow> ablation_run(const Dataset& data, const ModelConfig& base_model,
                                      const TrainOptions& base_opt, const HorizonSpec& horizons,
                                      int n_seeds);

}  // namespace td2ip
