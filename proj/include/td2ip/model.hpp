#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "td2ip/motion.hpp"
#include "td2ip/tensor.hpp"

namespace td2ip {

enum class Activation { relu, tanh, sigmoid };
enum class EncoderKind { mlp, gru, gcn };
enum class DecoderMode { shared, decoupled };

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);
EncoderKind encoder_from_string(const std::string& s);
std::string encoder_to_string(EncoderKind k);
DecoderMode decoder_from_string(const std::string& s);
std::string decoder_to_string(DecoderMode m);

struct ModelConfig {
    int t_past = 10;
    int t_future = 10;
    int joints = 8;
    int embed_hidden = 32;   // width of the first embedding layer
    int embed_dim = 16;      // embedded coordinate width fed to the encoder
    int feature_width = 32;  // per-joint encoder feature width
    int gcn_layers = 2;
    EncoderKind encoder = EncoderKind::gru;
    DecoderMode decoder = DecoderMode::decoupled;
    Activation activation = Activation::relu;
    bool residual_last_frame = true;

    void validate() const;
};

struct ParamArray {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

// The network: embedding, encoder, and one shared decoder or the decoupled
// (history, future) pair. Both directions of the training scheme run through
// this one parameter set. Normalization stats travel with the weights so a
// saved model is usable on raw-millimeter data.
struct Td2ipModel {
    ModelConfig config;
    std::vector<ParamArray> params;
    NormStats stats;
    bool normalized_inputs = true;

    int index_of(std::string_view name) const;  // -1 if absent
    const ParamArray& param(std::string_view name) const;
    std::int64_t param_count() const;
};

// Glorot-uniform weights (biases zero), deterministic in the seed. Each
// array draws from its own named stream, so arrays shared between model
// variants initialize identically.
Td2ipModel init_params(const ModelConfig& config, std::uint64_t seed);

// Parameter arrays registered on a tape: leaves when trainable, constants
// for inference. Index-aligned with model.params.
std::vector<Tensor> bind_params(Tape& tape, const Td2ipModel& model, bool trainable);

// x -> per-(frame, joint) feature lift: W2 * act(W1 * x + b1) + b2.
Tensor embed(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p, const Tensor& x);

// Embedded frames -> per-joint feature matrix (J x F).
Tensor encode(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
              const Tensor& embedded);

struct Decoded {
    Tensor full;  // (t_past + t_future) x J x 3
    Tensor hist;  // decoupled mode only
    Tensor fut;   // decoupled mode only
    bool decoupled = false;
};

// Feature matrix -> frame sequences. In decoupled mode the history and
// future decoders run separately and the full output is their concatenation
// along time; in shared mode one decoder emits all frames. When the residual
// connection is on, `anchor` (J x 3, the last observed frame) is added to
// every output frame.
Decoded decode(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
               const Tensor& feature, const Tensor& anchor);

// Full pass: embed, encode, decode, concatenate. Input t_past x J x 3,
// output (t_past + t_future) x J x 3.
Tensor forward(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
               const Tensor& x);

// The reversed-direction pass is the same network applied to the re-split
// reversed window; no direction-specific parameters exist.
Tensor forward_inverse(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
                       const Tensor& x_reversed);

// Convenience: run forward on raw values with constant parameters.
std::vector<double> predict(const Td2ipModel& model, const std::vector<double>& x_values);

// TDW weight container: "TDW 1" header, then named decimal-text arrays
// (model meta, normalization stats, evaluation settings, parameters).
struct SavedWeights {
    Td2ipModel model;
    std::vector<double> horizons_ms;
    int stride = 1;
};

void save_weights(const SavedWeights& bundle, const std::filesystem::path& path);
SavedWeights load_weights(const std::filesystem::path& path);

}  // namespace td2ip
