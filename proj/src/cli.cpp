#include "td2ip/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace td2ip {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string horizon_key(double ms) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", ms);
    return buf;
}

json report_json(const EvalReport& report, const json& config_echo) {
    json j;
    j["mpjpe_ms"] = json::object();
    for (const auto& [ms, mm] : report.mpjpe_per_horizon) j["mpjpe_ms"][horizon_key(ms)] = mm;
    j["mpjpe_avg"] = report.mpjpe_avg;
    j["fid"] = report.fid_value ? json(*report.fid_value) : json(nullptr);
    j["param_count"] = report.param_count;
    j["config"] = config_echo;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

void ensure_fresh_dir(const fs::path& dir, const char* marker, bool force) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    const fs::path probe = dir / marker;
    if (fs::exists(probe) && !force)
        throw ConfigError(dir.string() + " already contains " + std::string(marker) +
                          "; pass --force to overwrite");
}

HorizonSpec horizon_spec(const std::vector<double>& horizons_ms, double fps) {
    HorizonSpec spec;
    spec.horizons_ms = horizons_ms;
    spec.fps = fps;
    return spec;
}

Dataset dataset_for(const fs::path& data_dir, int t_past, int t_future, int stride,
                    bool normalize) {
    const auto sequences = load_msq_dir(data_dir);
    return build_dataset(sequences, t_past, t_future, stride, normalize);
}

}  // namespace

void cmd_gen(const GenArgs& args) {
    const auto pattern = pattern_from_string(args.pattern);
    if (args.sequences < 1 || args.frames < 1 || args.joints < 1)
        throw ConfigError("gen: --sequences, --frames and --joints must all be >= 1");
    if (!(args.fps > 0.0)) throw ConfigError("gen: --fps must be > 0");
    ensure_fresh_dir(args.out_dir, "manifest.json", args.force);

    const auto sequences =
        synth_generate(args.seed, args.sequences, args.frames, args.joints, args.fps, pattern);
    json manifest;
    manifest["files"] = json::array();
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%04zu.msq", i);
        save_msq(sequences[i], args.out_dir / name);
        manifest["files"].push_back(name);
    }
    manifest["generator"] = {{"seed", args.seed},       {"sequences", args.sequences},
                             {"frames", args.frames},   {"joints", args.joints},
                             {"fps", args.fps},         {"pattern", args.pattern}};
    write_text(args.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void cmd_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& run_dir,
               bool force) {
    const RunConfig config = load_run_config(config_path);
    ensure_fresh_dir(run_dir, "report.json", force);

    Dataset data = dataset_for(data_dir, config.t_past, config.t_future, config.resolved_stride(),
                               config.normalize);
    const HorizonSpec spec = horizon_spec(config.horizons_ms, data.fps);
    for (double ms : config.horizons_ms) {
        const int frame = horizon_to_frame(ms, data.fps);
        if (frame > config.t_future)
            throw ConfigError("config: horizon " + horizon_key(ms) + " ms maps to frame " +
                              std::to_string(frame) + " beyond t_future = " +
                              std::to_string(config.t_future));
    }

    TrainResult trained =
        run_training(data, config.model_config(data.joints), config.train_options(), spec);

    SavedWeights bundle;
    bundle.model = std::move(trained.model);
    bundle.horizons_ms = config.horizons_ms;
    bundle.stride = config.resolved_stride();
    save_weights(bundle, run_dir / "weights.tdw");
    write_epoch_csv(trained.logs, run_dir / "epochs.csv");
    write_text(run_dir / "config.used.json", run_config_to_json(config));

    // Report from the weights as saved, so re-evaluating the artifact on
    // disk reproduces report.json bit for bit.
    const SavedWeights reloaded = load_weights(run_dir / "weights.tdw");
    const EvalResult eval = evaluate_model(reloaded.model, data, spec);
    write_text(run_dir / "report.json",
               report_json(eval.report, json::parse(run_config_to_json(config))).dump(2) + "\n");
}

void cmd_eval(const fs::path& weights_path, const fs::path& data_dir,
              const fs::path& report_path) {
    const SavedWeights bundle = load_weights(weights_path);
    const ModelConfig& cfg = bundle.model.config;
    Dataset data = dataset_for(data_dir, cfg.t_past, cfg.t_future, bundle.stride,
                               bundle.model.normalized_inputs);
    if (data.joints != cfg.joints)
        throw ConfigError("eval: weights expect " + std::to_string(cfg.joints) +
                          " joints but data has " + std::to_string(data.joints));
    data.stats = bundle.model.stats;  // stats travel with the weights

    const HorizonSpec spec = horizon_spec(bundle.horizons_ms, data.fps);
    const EvalResult eval = evaluate_model(bundle.model, data, spec);

    json echo;
    echo["weights"] = weights_path.string();
    echo["data"] = data_dir.string();
    echo["t_past"] = cfg.t_past;
    echo["t_future"] = cfg.t_future;
    echo["joints"] = cfg.joints;
    echo["encoder"] = encoder_to_string(cfg.encoder);
    echo["decoder_mode"] = decoder_to_string(cfg.decoder);
    echo["horizons_ms"] = bundle.horizons_ms;
    write_text(report_path, report_json(eval.report, echo).dump(2) + "\n");
}

void cmd_ablate(const fs::path& config_path, const fs::path& data_dir, const fs::path& out_dir,
                bool force) {
    const RunConfig config = load_run_config(config_path);
    ensure_fresh_dir(out_dir, "ablation.json", force);

    Dataset data = dataset_for(data_dir, config.t_past, config.t_future, config.resolved_stride(),
                               config.normalize);
    const HorizonSpec spec = horizon_spec(config.horizons_ms, data.fps);
    const auto rows = ablation_run(data, config.model_config(data.joints), config.train_options(),
                                   spec, config.ablation_seeds);

    std::ostringstream table;
    table << "variant      L_f  L_r  TDD  |  val MPJPE (mm)       params\n";
    table << "-----------------------------------------------------------\n";
    json jrows = json::array();
    char buf[96];
    for (const auto& row : rows) {
        const char* lf = row.variant.uses_lf ? "x" : ".";
        const char* lr = row.variant.uses_lr ? "x" : ".";
        const char* tdd = row.variant.uses_tdd ? "x" : ".";
        if (row.mpjpe_per_seed.size() > 1)
            std::snprintf(buf, sizeof(buf), "%-12s  %s    %s    %s   |  %9.4f +/- %-8.4f %8lld\n",
                          row.variant.name.c_str(), lf, lr, tdd, row.mpjpe_mean, row.mpjpe_std,
                          static_cast<long long>(row.param_count));
        else
            std::snprintf(buf, sizeof(buf), "%-12s  %s    %s    %s   |  %9.4f %12s %8lld\n",
                          row.variant.name.c_str(), lf, lr, tdd, row.mpjpe_mean, "",
                          static_cast<long long>(row.param_count));
        table << buf;

        json jr;
        jr["name"] = row.variant.name;
        jr["uses_Lf"] = row.variant.uses_lf;
        jr["uses_Lr"] = row.variant.uses_lr;
        jr["uses_TDD"] = row.variant.uses_tdd;
        jr["val_mpjpe_mean"] = row.mpjpe_mean;
        jr["val_mpjpe_std"] = row.mpjpe_std;
        jr["val_mpjpe_per_seed"] = row.mpjpe_per_seed;
        jr["param_count"] = row.param_count;
        jrows.push_back(jr);
    }
    json out;
    out["rows"] = jrows;
    out["seeds"] = config.ablation_seeds;
    out["config"] = json::parse(run_config_to_json(config));
    write_text(out_dir / "ablation.json", out.dump(2) + "\n");
    write_text(out_dir / "ablation.txt", table.str());
    write_text(out_dir / "config.used.json", run_config_to_json(config));
    std::cout << table.str();
}

void cmd_fid(const fs::path& features_a, const fs::path& features_b) {
    const auto a = load_feature_csv(features_a);
    const auto b = load_feature_csv(features_b);
    std::printf("%.6f\n", fid(a, b));
}

void cmd_project(const fs::path& features, const fs::path& out_csv) {
    const auto rows = load_feature_csv(features);
    const auto points = pca_project_2d(rows);
    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot write " + out_csv.string());
    out << "x,y\n";
    char buf[80];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", p[0], p[1]);
        out << buf;
    }
}

}  // namespace td2ip
