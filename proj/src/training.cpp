#include "td2ip/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "td2ip/rng.hpp"

namespace td2ip {

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

std::string optimizer_to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "sgd";
}

void TrainOptions::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
    if (batch_size < 1)
        throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
    if (!use_forward_loss && !use_reverse_loss)
        throw ConfigError("loss_terms must not be empty: enable forward, reverse or both");
}

Tensor loss_forward(Tape& tape, const Tensor& prediction, const Tensor& target, bool squared) {
    return squared ? tape.mean_sq_norm(prediction, target) : tape.mean_norm(prediction, target);
}

Tensor loss_reverse(Tape& tape, const Tensor& prediction, const Tensor& target, bool squared) {
    return loss_forward(tape, prediction, target, squared);
}

Tensor loss_total(Tape& tape, const std::optional<Tensor>& l_f, const std::optional<Tensor>& l_r) {
    if (l_f && l_r) return tape.add(*l_f, *l_r);
    if (l_f) return *l_f;
    if (l_r) return *l_r;
    throw ConfigError("loss_total: no active loss terms");
}

void optimizer_step(Td2ipModel& model, const std::vector<std::vector<double>>& grads,
                    OptimizerState& state, const TrainOptions& opt) {
    if (grads.size() != model.params.size())
        throw ContractError("optimizer_step: gradient count mismatch");
    for (std::size_t p = 0; p < grads.size(); ++p) {
        if (grads[p].size() != model.params[p].values.size())
            throw ContractError("optimizer_step: gradient size mismatch for " +
                                model.params[p].name);
        for (double g : grads[p])
            if (!std::isfinite(g))
                throw NumericError("non-finite gradient for parameter '" + model.params[p].name +
                                   "'; training aborted");
    }

    if (state.m.empty()) {
        state.m.resize(grads.size());
        state.v.resize(grads.size());
        for (std::size_t p = 0; p < grads.size(); ++p) {
            state.m[p].assign(grads[p].size(), 0.0);
            state.v[p].assign(grads[p].size(), 0.0);
        }
    }

    double clip_factor = 1.0;
    if (opt.grad_clip > 0.0) {
        double norm_sq = 0.0;
        for (const auto& g : grads)
            for (double v : g) norm_sq += v * v;
        const double norm = std::sqrt(norm_sq);
        if (norm > opt.grad_clip) clip_factor = opt.grad_clip / norm;
    }

    if (opt.optimizer == OptimizerKind::sgd) {
        for (std::size_t p = 0; p < grads.size(); ++p)
            for (std::size_t i = 0; i < grads[p].size(); ++i)
                model.params[p].values[i] -= opt.learning_rate * clip_factor * grads[p][i];
        ++state.step;
        return;
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < grads.size(); ++p) {
        auto& m = state.m[p];
        auto& v = state.v[p];
        auto& w = model.params[p].values;
        for (std::size_t i = 0; i < grads[p].size(); ++i) {
            const double g = clip_factor * grads[p][i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

namespace {

double pairwise_sum_range(const double* v, std::size_t n) {
    if (n == 1) return v[0];
    const std::size_t half = n / 2;
    return pairwise_sum_range(v, half) + pairwise_sum_range(v + half, n - half);
}

}  // namespace

double pairwise_sum(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return pairwise_sum_range(values.data(), values.size());
}

double pairwise_mean(const std::vector<double>& values) {
    if (values.empty()) throw ContractError("pairwise_mean: empty input");
    return pairwise_sum(values) / static_cast<double>(values.size());
}

StepResult train_step(Td2ipModel& model, OptimizerState& state,
                      const std::vector<const TrainSample*>& batch, const TrainOptions& opt) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    const ModelConfig& cfg = model.config;
    const int t_total = cfg.t_past + cfg.t_future;
    const Shape in_shape{cfg.t_past, cfg.joints, 3};
    const Shape full_shape{t_total, cfg.joints, 3};

    StepResult result;
    // One tape per sample; gradients are reduced across the batch with a
    // fixed-order pairwise tree so the step is insensitive to sample order.
    std::vector<std::vector<std::vector<double>>> grads_by_param(model.params.size());
    for (auto& g : grads_by_param) g.reserve(batch.size());

    for (const TrainSample* s : batch) {
        Tape tape;
        auto p = bind_params(tape, model, true);

        std::optional<Tensor> l_f, l_r;
        if (opt.use_forward_loss) {
            Tensor x = make_constant(in_shape, s->x);
            std::vector<double> target = s->x;
            target.insert(target.end(), s->y.begin(), s->y.end());
            Tensor prediction = forward(tape, model, p, x);
            l_f = loss_forward(tape, prediction, make_constant(full_shape, target),
                               opt.squared_loss);
        }
        if (opt.use_reverse_loss) {
            Tensor x_r = make_constant(in_shape, s->x_r);
            Tensor prediction = forward_inverse(tape, model, p, x_r);
            l_r = loss_reverse(tape, prediction, make_constant(full_shape, s->y_r),
                               opt.squared_loss);
        }
        Tensor total = loss_total(tape, l_f, l_r);
        tape.backward(total);

        for (std::size_t i = 0; i < p.size(); ++i) grads_by_param[i].push_back(tape.grad(p[i]));
        if (l_f) result.loss_f_per_sample.push_back(l_f->scalar());
        if (l_r) result.loss_r_per_sample.push_back(l_r->scalar());
        result.loss_per_sample.push_back(total.scalar());
    }

    std::vector<std::vector<double>> mean_grads(model.params.size());
    std::vector<double> column(batch.size());
    for (std::size_t pi = 0; pi < model.params.size(); ++pi) {
        const std::size_t width = model.params[pi].values.size();
        mean_grads[pi].resize(width);
        for (std::size_t i = 0; i < width; ++i) {
            for (std::size_t b = 0; b < batch.size(); ++b) column[b] = grads_by_param[pi][b][i];
            mean_grads[pi][i] = pairwise_mean(column);
        }
    }
    optimizer_step(model, mean_grads, state, opt);
    return result;
}

namespace {

// Normalized copies of the samples, ready for the tape.
std::vector<TrainSample> to_model_space(const std::vector<TrainSample>& samples,
                                        const Dataset& data) {
    if (!data.normalized) return samples;
    std::vector<TrainSample> out = samples;
    for (auto& s : out) {
        s.x = normalize(s.x, data.stats);
        s.y = normalize(s.y, data.stats);
        s.x_r = normalize(s.x_r, data.stats);
        s.y_r = normalize(s.y_r, data.stats);
    }
    return out;
}

}  // namespace

EvalResult evaluate_model(const Td2ipModel& model, const Dataset& data, const HorizonSpec& spec,
                          bool with_fid) {
    if (data.val.empty()) throw ConfigError("evaluate_model: validation split is empty");
    const ModelConfig& cfg = model.config;
    if (data.t_past != cfg.t_past || data.t_future != cfg.t_future || data.joints != cfg.joints)
        throw ConfigError("evaluate_model: data windows " + std::to_string(data.t_past) + "/" +
                          std::to_string(data.t_future) + "/" + std::to_string(data.joints) +
                          " do not match model dims " + std::to_string(cfg.t_past) + "/" +
                          std::to_string(cfg.t_future) + "/" + std::to_string(cfg.joints));

    EvalResult out;
    out.predictions.frames = cfg.t_future;
    out.predictions.joints = cfg.joints;
    out.ground_truth = out.predictions;

    const std::size_t row = static_cast<std::size_t>(cfg.joints) * 3;
    const std::size_t fut_off = static_cast<std::size_t>(cfg.t_past) * row;
    std::vector<std::vector<double>> fid_pred, fid_gt;

    for (const TrainSample& s : data.val) {
        const std::vector<double> x_in =
            model.normalized_inputs ? normalize(s.x, model.stats) : s.x;
        const std::vector<double> y_hat = predict(model, x_in);
        std::vector<double> fut(y_hat.begin() + static_cast<std::ptrdiff_t>(fut_off),
                                y_hat.end());

        if (with_fid) {
            // Encoder features of predicted vs. true future trajectories.
            const bool length_ok =
                cfg.encoder != EncoderKind::mlp || cfg.t_future == cfg.t_past;
            if (length_ok) {
                auto encode_traj = [&](const std::vector<double>& traj) {
                    Tape tape;
                    auto p = bind_params(tape, model, false);
                    Tensor t = make_constant({cfg.t_future, cfg.joints, 3}, traj);
                    return encode(tape, model, p, embed(tape, model, p, t)).values;
                };
                fid_pred.push_back(encode_traj(fut));
                fid_gt.push_back(encode_traj(model.normalized_inputs
                                                 ? normalize(s.y, model.stats)
                                                 : s.y));
            }
        }

        out.predictions.samples.push_back(
            model.normalized_inputs ? denormalize(fut, model.stats) : std::move(fut));
        out.ground_truth.samples.push_back(s.y);
    }

    EvalReport& report = out.report;
    report.param_count = model.param_count();
    for (double ms : spec.horizons_ms) {
        const int frame = horizon_to_frame(ms, spec.fps);
        if (frame > cfg.t_future)
            throw ConfigError("horizon " + std::to_string(ms) + " ms maps to frame " +
                              std::to_string(frame) + " but t_future is " +
                              std::to_string(cfg.t_future));
        report.mpjpe_per_horizon.emplace_back(
            ms, mpjpe_at_frame(out.predictions, out.ground_truth, frame));
    }
    report.mpjpe_avg = mpjpe_average(out.predictions, out.ground_truth, spec);
    if (with_fid && fid_pred.size() >= 2) report.fid_value = fid(fid_pred, fid_gt);
    return out;
}

TrainResult run_training(const Dataset& data, const ModelConfig& model_config,
                         const TrainOptions& opt, const HorizonSpec& horizons) {
    opt.validate();
    if (data.train.empty()) throw ConfigError("run_training: training split is empty");

    TrainResult result;
    result.model = init_params(model_config, opt.seed);
    result.model.stats = data.stats;
    result.model.normalized_inputs = data.normalized;

    const std::vector<TrainSample> train = to_model_space(data.train, data);
    OptimizerState state;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        Rng shuffle_rng = Rng::stream(opt.seed, "shuffle", static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        std::vector<double> lf_all, lr_all;
        std::vector<const TrainSample*> batch;
        for (std::size_t pos = 0; pos < order.size();) {
            batch.clear();
            for (int k = 0; k < opt.batch_size && pos < order.size(); ++k, ++pos)
                batch.push_back(&train[order[pos]]);
            StepResult step = train_step(result.model, state, batch, opt);
            lf_all.insert(lf_all.end(), step.loss_f_per_sample.begin(),
                          step.loss_f_per_sample.end());
            lr_all.insert(lr_all.end(), step.loss_r_per_sample.begin(),
                          step.loss_r_per_sample.end());
        }

        EpochLog log;
        log.epoch = epoch;
        if (opt.use_forward_loss) log.loss_f = pairwise_mean(lf_all);
        if (opt.use_reverse_loss) log.loss_r = pairwise_mean(lr_all);
        log.loss_total = (log.loss_f ? *log.loss_f : 0.0) + (log.loss_r ? *log.loss_r : 0.0);
        log.val_mpjpe = data.val.empty()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : evaluate_model(result.model, data, horizons, false).report.mpjpe_avg;
        result.logs.push_back(log);
    }
    return result;
}

void write_epoch_csv(const std::vector<EpochLog>& logs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,loss_f,loss_r,loss_total,val_mpjpe\n";
    char buf[40];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    for (const EpochLog& log : logs) {
        out << log.epoch << ',';
        out << (log.loss_f ? fmt(*log.loss_f) : "") << ',';
        out << (log.loss_r ? fmt(*log.loss_r) : "") << ',';
        out << fmt(log.loss_total) << ',' << fmt(log.val_mpjpe) << '\n';
    }
}

const std::array<AblationVariant, 5>& ablation_variants() {
    static const std::array<AblationVariant, 5> variants{{
        {"Lf", true, false, false},
        {"Lf+TDD", true, false, true},
        {"Lf+Lr", true, true, false},
        {"Lr+TDD", false, true, true},
        {"Lf+Lr+TDD", true, true, true},
    }};
    return variants;
}

std::vector<AblationRow> ablation_run(const Dataset& data, const ModelConfig& base_model,
                                      const TrainOptions& base_opt, const HorizonSpec& horizons,
                                      int n_seeds) {
    if (n_seeds < 1) throw ConfigError("ablation_run: n_seeds must be >= 1");
    std::vector<AblationRow> rows;
    for (const AblationVariant& variant : ablation_variants()) {
        AblationRow row;
        row.variant = variant;
        ModelConfig mc = base_model;
        mc.decoder = variant.uses_tdd ? DecoderMode::decoupled : DecoderMode::shared;
        TrainOptions to = base_opt;
        to.use_forward_loss = variant.uses_lf;
        to.use_reverse_loss = variant.uses_lr;

        for (int s = 0; s < n_seeds; ++s) {
            to.seed = base_opt.seed + static_cast<std::uint64_t>(s);
            TrainResult trained = run_training(data, mc, to, horizons);
            row.param_count = trained.model.param_count();
            row.mpjpe_per_seed.push_back(
                evaluate_model(trained.model, data, horizons, false).report.mpjpe_avg);
        }
        row.mpjpe_mean = pairwise_mean(row.mpjpe_per_seed);
        if (n_seeds > 1) {
            double acc = 0.0;
            for (double v : row.mpjpe_per_seed) acc += (v - row.mpjpe_mean) * (v - row.mpjpe_mean);
            row.mpjpe_std = std::sqrt(acc / static_cast<double>(n_seeds - 1));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace td2ip
