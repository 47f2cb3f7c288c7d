#include "td2ip/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "td2ip/rng.hpp"

namespace td2ip {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation '" + s + "' (expected relu, tanh or sigmoid)");
}

std::string activation_to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "relu";
}

EncoderKind encoder_from_string(const std::string& s) {
    if (s == "mlp") return EncoderKind::mlp;
    if (s == "gru") return EncoderKind::gru;
    if (s == "gcn") return EncoderKind::gcn;
    throw ConfigError("unknown encoder '" + s + "' (expected mlp, gru or gcn)");
}

std::string encoder_to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::mlp: return "mlp";
        case EncoderKind::gru: return "gru";
        case EncoderKind::gcn: return "gcn";
    }
    return "mlp";
}

DecoderMode decoder_from_string(const std::string& s) {
    if (s == "shared") return DecoderMode::shared;
    if (s == "decoupled") return DecoderMode::decoupled;
    throw ConfigError("unknown decoder_mode '" + s + "' (expected shared or decoupled)");
}

std::string decoder_to_string(DecoderMode m) {
    return m == DecoderMode::shared ? "shared" : "decoupled";
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
    };
    positive(t_past, "t_past");
    positive(t_future, "t_future");
    positive(joints, "joints");
    positive(embed_hidden, "embed_hidden");
    positive(embed_dim, "embed_dim");
    positive(feature_width, "feature_width");
    positive(gcn_layers, "gcn_layers");
}

int Td2ipModel::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == name) return static_cast<int>(i);
    return -1;
}

const ParamArray& Td2ipModel::param(std::string_view name) const {
    const int i = index_of(name);
    if (i < 0) throw ContractError("no parameter named '" + std::string(name) + "'");
    return params[static_cast<std::size_t>(i)];
}

std::int64_t Td2ipModel::param_count() const {
    std::int64_t n = 0;
    for (const auto& p : params) n += static_cast<std::int64_t>(p.values.size());
    return n;
}

namespace {

ParamArray glorot(std::uint64_t seed, const std::string& name, Shape shape, int fan_in,
                  int fan_out) {
    ParamArray p;
    p.name = name;
    p.shape = std::move(shape);
    p.values.resize(numel(p.shape));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng = Rng::stream(seed, "init/" + name);
    for (double& v : p.values) v = rng.uniform(-bound, bound);
    return p;
}

ParamArray zeros(const std::string& name, Shape shape) {
    ParamArray p;
    p.name = name;
    p.shape = std::move(shape);
    p.values.assign(numel(p.shape), 0.0);
    return p;
}

void add_dense_stack(std::vector<ParamArray>& out, std::uint64_t seed, const std::string& prefix,
                     int d_in, int d_hidden, int d_out) {
    out.push_back(glorot(seed, prefix + ".w1", {d_in, d_hidden}, d_in, d_hidden));
    out.push_back(zeros(prefix + ".b1", {d_hidden}));
    out.push_back(glorot(seed, prefix + ".w2", {d_hidden, d_out}, d_hidden, d_out));
    out.push_back(zeros(prefix + ".b2", {d_out}));
}

}  // namespace

Td2ipModel init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Td2ipModel model;
    model.config = config;
    auto& p = model.params;

    const int dh = config.embed_hidden, de = config.embed_dim, f = config.feature_width;
    const int j = config.joints, tp = config.t_past, tf = config.t_future;

    // Embedding, stored in the (rows = outputs, cols = inputs) orientation.
    p.push_back(glorot(seed, "embed.w1", {dh, 3}, 3, dh));
    p.push_back(zeros("embed.b1", {dh}));
    p.push_back(glorot(seed, "embed.w2", {de, dh}, dh, de));
    p.push_back(zeros("embed.b2", {de}));

    switch (config.encoder) {
        case EncoderKind::mlp:
            add_dense_stack(p, seed, "enc.mlp", tp * de, f, f);
            break;
        case EncoderKind::gru:
            for (const char* gate : {"z", "r", "h"}) {
                const std::string g(gate);
                p.push_back(glorot(seed, "enc.gru.w" + g, {de, f}, de, f));
                p.push_back(glorot(seed, "enc.gru.u" + g, {f, f}, f, f));
                p.push_back(zeros("enc.gru.b" + g, {f}));
            }
            break;
        case EncoderKind::gcn: {
            p.push_back(glorot(seed, "enc.gcn.adj", {j, j}, j, j));
            int d_in = de;
            for (int l = 1; l <= config.gcn_layers; ++l) {
                const std::string base = "enc.gcn.l" + std::to_string(l);
                p.push_back(glorot(seed, base + ".w", {d_in, f}, d_in, f));
                p.push_back(zeros(base + ".b", {f}));
                d_in = f;
            }
            break;
        }
    }

    if (config.decoder == DecoderMode::shared) {
        add_dense_stack(p, seed, "dec.shared", f, f, (tp + tf) * 3);
    } else {
        // Identical layer plans; only the output horizon differs.
        add_dense_stack(p, seed, "dec.hist", f, f, tp * 3);
        add_dense_stack(p, seed, "dec.fut", f, f, tf * 3);
    }
    return model;
}

std::vector<Tensor> bind_params(Tape& tape, const Td2ipModel& model, bool trainable) {
    std::vector<Tensor> out;
    out.reserve(model.params.size());
    for (const auto& p : model.params)
        out.push_back(trainable ? tape.leaf(p.shape, p.values)
                                : make_constant(p.shape, p.values));
    return out;
}

namespace {

Tensor activate(Tape& tape, Activation a, const Tensor& x) {
    switch (a) {
        case Activation::relu: return tape.relu(x);
        case Activation::tanh: return tape.tanh(x);
        case Activation::sigmoid: return tape.sigmoid(x);
    }
    throw ContractError("bad activation");
}

const Tensor& named(const Td2ipModel& model, const std::vector<Tensor>& p,
                    std::string_view name) {
    const int i = model.index_of(name);
    if (i < 0) throw ContractError("no parameter named '" + std::string(name) + "'");
    return p[static_cast<std::size_t>(i)];
}

// act(x * w1 + b1) * w2 + b2 on row-feature matrices.
Tensor dense_stack(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
                   const std::string& prefix, const Tensor& x) {
    Tensor h = tape.add(tape.matmul(x, named(model, p, prefix + ".w1")),
                        named(model, p, prefix + ".b1"));
    h = activate(tape, model.config.activation, h);
    return tape.add(tape.matmul(h, named(model, p, prefix + ".w2")),
                    named(model, p, prefix + ".b2"));
}

Tensor encode_mlp(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
                  const Tensor& embedded) {
    const int t = embedded.shape[0], j = embedded.shape[1], de = embedded.shape[2];
    if (t != model.config.t_past)
        throw DimensionError("mlp encoder is built for " + std::to_string(model.config.t_past) +
                             " frames, got " + std::to_string(t));
    // Flatten time per joint, then one stack shared across joints.
    Tensor per_joint = tape.reshape(tape.swap01(embedded), {j, t * de});
    return dense_stack(tape, model, p, "enc.mlp", per_joint);
}

Tensor encode_gru(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
                  const Tensor& embedded) {
    const int t = embedded.shape[0], j = embedded.shape[1], de = embedded.shape[2];
    const int f = model.config.feature_width;
    const Tensor ones = make_constant({j, f}, std::vector<double>(numel({j, f}), 1.0));
    Tensor h = make_constant({j, f}, std::vector<double>(numel({j, f}), 0.0));
    for (int step = 0; step < t; ++step) {
        Tensor xt = tape.reshape(tape.slice(embedded, 0, step, 1), {j, de});
        auto gate = [&](const char* g, const Tensor& state) {
            const std::string n(g);
            return tape.add(tape.add(tape.matmul(xt, named(model, p, "enc.gru.w" + n)),
                                     tape.matmul(state, named(model, p, "enc.gru.u" + n))),
                            named(model, p, "enc.gru.b" + n));
        };
        Tensor z = tape.sigmoid(gate("z", h));
        Tensor r = tape.sigmoid(gate("r", h));
        Tensor cand = tape.tanh(gate("h", tape.mul(r, h)));
        h = tape.add(tape.mul(tape.sub(ones, z), h), tape.mul(z, cand));
    }
    return h;
}

Tensor encode_gcn(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
                  const Tensor& embedded) {
    const int t = embedded.shape[0], j = embedded.shape[1], de = embedded.shape[2];
    // Temporal mean-pool to a per-joint feature, then graph layers.
    Tensor pooled = tape.reshape(tape.slice(embedded, 0, 0, 1), {j, de});
    for (int step = 1; step < t; ++step)
        pooled = tape.add(pooled, tape.reshape(tape.slice(embedded, 0, step, 1), {j, de}));
    Tensor h = tape.scale(pooled, 1.0 / t);
    const Tensor& adj = named(model, p, "enc.gcn.adj");
    for (int l = 1; l <= model.config.gcn_layers; ++l) {
        const std::string base = "enc.gcn.l" + std::to_string(l);
        h = activate(tape, model.config.activation,
                     tape.add(tape.matmul(tape.matmul(adj, h), named(model, p, base + ".w")),
                              named(model, p, base + ".b")));
    }
    return h;
}

Tensor decode_one(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
                  const std::string& prefix, int horizon, const Tensor& feature,
                  const Tensor& anchor) {
    const int j = feature.shape[0];
    Tensor flat = dense_stack(tape, model, p, prefix, feature);  // (J, horizon*3)
    Tensor frames = tape.swap01(tape.reshape(flat, {j, horizon, 3}));
    if (model.config.residual_last_frame) frames = tape.add(frames, anchor);
    return frames;
}

}  // namespace

Tensor embed(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p, const Tensor& x) {
    if (x.shape.size() != 3 || x.shape[2] != 3)
        throw DimensionError("embed: expected T x J x 3 input, got " + shape_str(x.shape));
    const int t = x.shape[0], j = x.shape[1];
    Tensor flat = tape.reshape(x, {t * j, 3});
    Tensor h = tape.add(tape.matmul(flat, tape.swap01(named(model, p, "embed.w1"))),
                        named(model, p, "embed.b1"));
    h = activate(tape, model.config.activation, h);
    Tensor out = tape.add(tape.matmul(h, tape.swap01(named(model, p, "embed.w2"))),
                          named(model, p, "embed.b2"));
    return tape.reshape(out, {t, j, model.config.embed_dim});
}

Tensor encode(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
              const Tensor& embedded) {
    if (embedded.shape.size() != 3 || embedded.shape[2] != model.config.embed_dim)
        throw DimensionError("encode: expected T x J x " + std::to_string(model.config.embed_dim) +
                             " input, got " + shape_str(embedded.shape));
    switch (model.config.encoder) {
        case EncoderKind::mlp: return encode_mlp(tape, model, p, embedded);
        case EncoderKind::gru: return encode_gru(tape, model, p, embedded);
        case EncoderKind::gcn: return encode_gcn(tape, model, p, embedded);
    }
    throw ConfigError("unknown encoder kind");
}

Decoded decode(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
               const Tensor& feature, const Tensor& anchor) {
    if (feature.shape.size() != 2 || feature.shape[1] != model.config.feature_width)
        throw DimensionError("decode: expected J x " + std::to_string(model.config.feature_width) +
                             " feature, got " + shape_str(feature.shape));
    Decoded out;
    if (model.config.decoder == DecoderMode::decoupled) {
        out.decoupled = true;
        out.hist = decode_one(tape, model, p, "dec.hist", model.config.t_past, feature, anchor);
        out.fut = decode_one(tape, model, p, "dec.fut", model.config.t_future, feature, anchor);
        out.full = tape.concat(out.hist, out.fut, 0);
    } else {
        out.full = decode_one(tape, model, p, "dec.shared",
                              model.config.t_past + model.config.t_future, feature, anchor);
    }
    return out;
}

Tensor forward(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
               const Tensor& x) {
    if (x.shape != Shape{model.config.t_past, model.config.joints, 3})
        throw DimensionError("forward: expected input of shape " +
                             shape_str({model.config.t_past, model.config.joints, 3}) + ", got " +
                             shape_str(x.shape));
    Tensor embedded = embed(tape, model, p, x);
    Tensor feature = encode(tape, model, p, embedded);
    Tensor anchor =
        tape.reshape(tape.slice(x, 0, model.config.t_past - 1, 1), {model.config.joints, 3});
    return decode(tape, model, p, feature, anchor).full;
}

Tensor forward_inverse(Tape& tape, const Td2ipModel& model, const std::vector<Tensor>& p,
                       const Tensor& x_reversed) {
    return forward(tape, model, p, x_reversed);
}

std::vector<double> predict(const Td2ipModel& model, const std::vector<double>& x_values) {
    Tape tape;
    auto p = bind_params(tape, model, false);
    Tensor x = make_constant({model.config.t_past, model.config.joints, 3}, x_values);
    return forward(tape, model, p, x).values;
}

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_array(std::ostream& out, const std::string& name, const Shape& shape,
                 const std::vector<double>& values) {
    out << name << ' ' << shape.size();
    for (int e : shape) out << ' ' << e;
    out << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ' ';
        out << fmt9(values[i]);
    }
    out << '\n';
}

double meta_scalar(const std::vector<ParamArray>& arrays, const std::string& name) {
    for (const auto& a : arrays)
        if (a.name == name) {
            if (a.values.size() != 1)
                throw ParseError("weights: meta entry '" + name + "' is not a scalar");
            return a.values[0];
        }
    throw ParseError("weights: missing meta entry '" + name + "'");
}

int meta_int(const std::vector<ParamArray>& arrays, const std::string& name) {
    return static_cast<int>(std::llround(meta_scalar(arrays, name)));
}

}  // namespace

void save_weights(const SavedWeights& bundle, const std::filesystem::path& path) {
    const Td2ipModel& model = bundle.model;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "TDW 1\n";
    auto scalar = [&](const std::string& name, double v) { write_array(out, name, {}, {v}); };
    scalar("meta.t_past", model.config.t_past);
    scalar("meta.t_future", model.config.t_future);
    scalar("meta.joints", model.config.joints);
    scalar("meta.embed_hidden", model.config.embed_hidden);
    scalar("meta.embed_dim", model.config.embed_dim);
    scalar("meta.feature_width", model.config.feature_width);
    scalar("meta.gcn_layers", model.config.gcn_layers);
    scalar("meta.encoder", static_cast<int>(model.config.encoder));
    scalar("meta.decoder", static_cast<int>(model.config.decoder));
    scalar("meta.activation", static_cast<int>(model.config.activation));
    scalar("meta.residual", model.config.residual_last_frame ? 1 : 0);
    scalar("meta.normalize", model.normalized_inputs ? 1 : 0);
    scalar("meta.stride", bundle.stride);
    write_array(out, "meta.horizons_ms", {static_cast<int>(bundle.horizons_ms.size())},
                bundle.horizons_ms);
    write_array(out, "meta.norm_mean", {3},
                {model.stats.mean[0], model.stats.mean[1], model.stats.mean[2]});
    write_array(out, "meta.norm_std", {3},
                {model.stats.stddev[0], model.stats.stddev[1], model.stats.stddev[2]});
    for (const auto& p : model.params) write_array(out, p.name, p.shape, p.values);
    if (!out) throw IoError("write failed: " + path.string());
}

SavedWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "TDW 1")
        throw ParseError(path.string() + ": bad magic/version, expected 'TDW 1', got '" + line +
                         "'");

    std::vector<ParamArray> arrays;
    std::string name;
    while (in >> name) {
        ParamArray a;
        a.name = name;
        std::size_t rank = 0;
        if (!(in >> rank) || rank > 8)
            throw ParseError(path.string() + ": bad rank for array '" + name + "'");
        a.shape.resize(rank);
        for (auto& e : a.shape)
            if (!(in >> e) || e < 0)
                throw ParseError(path.string() + ": bad extent for array '" + name + "'");
        a.values.resize(numel(a.shape));
        for (auto& v : a.values)
            if (!(in >> v) || !std::isfinite(v))
                throw ParseError(path.string() + ": bad value in array '" + name + "'");
        arrays.push_back(std::move(a));
    }

    SavedWeights bundle;
    ModelConfig cfg;
    cfg.t_past = meta_int(arrays, "meta.t_past");
    cfg.t_future = meta_int(arrays, "meta.t_future");
    cfg.joints = meta_int(arrays, "meta.joints");
    cfg.embed_hidden = meta_int(arrays, "meta.embed_hidden");
    cfg.embed_dim = meta_int(arrays, "meta.embed_dim");
    cfg.feature_width = meta_int(arrays, "meta.feature_width");
    cfg.gcn_layers = meta_int(arrays, "meta.gcn_layers");
    cfg.encoder = static_cast<EncoderKind>(meta_int(arrays, "meta.encoder"));
    cfg.decoder = static_cast<DecoderMode>(meta_int(arrays, "meta.decoder"));
    cfg.activation = static_cast<Activation>(meta_int(arrays, "meta.activation"));
    cfg.residual_last_frame = meta_int(arrays, "meta.residual") != 0;
    cfg.validate();

    bundle.model.config = cfg;
    bundle.model.normalized_inputs = meta_int(arrays, "meta.normalize") != 0;
    bundle.stride = meta_int(arrays, "meta.stride");
    for (const auto& a : arrays) {
        if (a.name == "meta.horizons_ms") bundle.horizons_ms = a.values;
        if (a.name == "meta.norm_mean")
            std::copy_n(a.values.begin(), 3, bundle.model.stats.mean.begin());
        if (a.name == "meta.norm_std")
            std::copy_n(a.values.begin(), 3, bundle.model.stats.stddev.begin());
    }

    // Validate against the parameter plan the config implies.
    Td2ipModel expect = init_params(cfg, 0);
    for (const auto& want : expect.params) {
        bool found = false;
        for (auto& a : arrays) {
            if (a.name != want.name) continue;
            if (a.shape != want.shape)
                throw ParseError(path.string() + ": array '" + a.name + "' has shape " +
                                 shape_str(a.shape) + ", expected " + shape_str(want.shape));
            bundle.model.params.push_back(a);
            found = true;
            break;
        }
        if (!found)
            throw ParseError(path.string() + ": missing parameter array '" + want.name + "'");
    }
    return bundle;
}

}  // namespace td2ip
