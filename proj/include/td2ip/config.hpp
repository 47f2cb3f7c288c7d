#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "td2ip/model.hpp"
#include "td2ip/training.hpp"

namespace td2ip {

// One run's complete configuration: data windowing, model dimensions,
// training schedule and evaluation horizons. Parsed from strict JSON —
// unknown keys are rejected so ablation provenance stays machine-checkable.
struct RunConfig {
    // data windowing
    int t_past = 10;
    int t_future = 10;
    int stride = 0;  // 0 resolves to t_future (non-overlapping future segments)
    bool normalize = true;

    // model
    int embed_hidden = 32;
    int embed_dim = 16;
    int feature_width = 32;
    int gcn_layers = 2;
    std::string encoder = "gru";
    std::string decoder_mode = "decoupled";
    std::string activation = "relu";
    bool residual = true;

    // training
    int epochs = 50;
    int batch_size = 16;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    std::vector<std::string> loss_terms{"forward", "reverse"};
    bool squared_loss = true;
    double grad_clip = 0.0;
    std::uint64_t seed = 1;

    // evaluation
    std::vector<double> horizons_ms{80.0, 160.0, 320.0, 400.0, 560.0, 1000.0};
    int ablation_seeds = 1;

    int resolved_stride() const { return stride > 0 ? stride : t_future; }
    ModelConfig model_config(int joints) const;
    TrainOptions train_options() const;
    void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
std::string run_config_to_json(const RunConfig& config);

}  // namespace td2ip
