#include "td2ip/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace td2ip {

using nlohmann::json;

ModelConfig RunConfig::model_config(int joints) const {
    ModelConfig mc;
    mc.t_past = t_past;
    mc.t_future = t_future;
    mc.joints = joints;
    mc.embed_hidden = embed_hidden;
    mc.embed_dim = embed_dim;
    mc.feature_width = feature_width;
    mc.gcn_layers = gcn_layers;
    mc.encoder = encoder_from_string(encoder);
    mc.decoder = decoder_from_string(decoder_mode);
    mc.activation = activation_from_string(activation);
    mc.residual_last_frame = residual;
    return mc;
}

TrainOptions RunConfig::train_options() const {
    TrainOptions to;
    to.epochs = epochs;
    to.batch_size = batch_size;
    to.learning_rate = learning_rate;
    to.optimizer = optimizer_from_string(optimizer);
    to.use_forward_loss =
        std::find(loss_terms.begin(), loss_terms.end(), "forward") != loss_terms.end();
    to.use_reverse_loss =
        std::find(loss_terms.begin(), loss_terms.end(), "reverse") != loss_terms.end();
    to.squared_loss = squared_loss;
    to.grad_clip = grad_clip;
    to.seed = seed;
    return to;
}

void RunConfig::validate() const {
    auto positive = [](long v, const char* field) {
        if (v < 1)
            throw ConfigError("config: " + std::string(field) + " must be >= 1, got " +
                              std::to_string(v));
    };
    positive(t_past, "t_past");
    positive(t_future, "t_future");
    if (stride < 0) throw ConfigError("config: stride must be >= 0 (0 means t_future)");
    positive(embed_hidden, "embed_hidden");
    positive(embed_dim, "embed_dim");
    positive(feature_width, "feature_width");
    positive(gcn_layers, "gcn_layers");
    positive(epochs, "epochs");
    positive(batch_size, "batch_size");
    positive(ablation_seeds, "ablation_seeds");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
    if (grad_clip < 0.0) throw ConfigError("config: grad_clip must be >= 0");
    encoder_from_string(encoder);
    decoder_from_string(decoder_mode);
    activation_from_string(activation);
    optimizer_from_string(optimizer);
    if (loss_terms.empty()) throw ConfigError("config: loss_terms must not be empty");
    for (const auto& term : loss_terms)
        if (term != "forward" && term != "reverse")
            throw ConfigError("config: loss_terms entry '" + term +
                              "' is not one of forward, reverse");
    if (horizons_ms.empty()) throw ConfigError("config: horizons_ms must not be empty");
    for (double ms : horizons_ms)
        if (!(ms > 0.0)) throw ConfigError("config: horizons_ms entries must be > 0");
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "t_past",        "t_future",   "stride",       "normalize",    "embed_hidden",
        "embed_dim",     "feature_width", "gcn_layers", "encoder",     "decoder_mode",
        "activation",    "residual",   "epochs",       "batch_size",   "learning_rate",
        "optimizer",     "loss_terms", "squared_loss", "grad_clip",    "seed",
        "horizons_ms",   "ablation_seeds"};
    return keys;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + std::string(key) + "' has the wrong type");
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": config must be a JSON object");
    for (const auto& item : j.items())
        if (!known_keys().count(item.key()))
            throw ConfigError(origin + ": unknown key '" + item.key() + "'");

    RunConfig c;
    read_field(j, "t_past", c.t_past);
    read_field(j, "t_future", c.t_future);
    read_field(j, "stride", c.stride);
    read_field(j, "normalize", c.normalize);
    read_field(j, "embed_hidden", c.embed_hidden);
    read_field(j, "embed_dim", c.embed_dim);
    read_field(j, "feature_width", c.feature_width);
    read_field(j, "gcn_layers", c.gcn_layers);
    read_field(j, "encoder", c.encoder);
    read_field(j, "decoder_mode", c.decoder_mode);
    read_field(j, "activation", c.activation);
    read_field(j, "residual", c.residual);
    read_field(j, "epochs", c.epochs);
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "learning_rate", c.learning_rate);
    read_field(j, "optimizer", c.optimizer);
    read_field(j, "loss_terms", c.loss_terms);
    read_field(j, "squared_loss", c.squared_loss);
    read_field(j, "grad_clip", c.grad_clip);
    read_field(j, "seed", c.seed);
    read_field(j, "horizons_ms", c.horizons_ms);
    read_field(j, "ablation_seeds", c.ablation_seeds);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path.string());
}

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["t_past"] = c.t_past;
    j["t_future"] = c.t_future;
    j["stride"] = c.stride;
    j["normalize"] = c.normalize;
    j["embed_hidden"] = c.embed_hidden;
    j["embed_dim"] = c.embed_dim;
    j["feature_width"] = c.feature_width;
    j["gcn_layers"] = c.gcn_layers;
    j["encoder"] = c.encoder;
    j["decoder_mode"] = c.decoder_mode;
    j["activation"] = c.activation;
    j["residual"] = c.residual;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["optimizer"] = c.optimizer;
    j["loss_terms"] = c.loss_terms;
    j["squared_loss"] = c.squared_loss;
    j["grad_clip"] = c.grad_clip;
    j["seed"] = c.seed;
    j["horizons_ms"] = c.horizons_ms;
    j["ablation_seeds"] = c.ablation_seeds;
    return j.dump(2) + "\n";
}

}  // namespace td2ip
