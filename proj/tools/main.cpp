#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "td2ip/cli.hpp"

namespace {

// 0 success, 2 validation/usage, 3 runtime numeric failure.
int run(int argc, char** argv) {
    CLI::App app{"td2ip: sequence-forecasting lab with decoupled decoding and "
                 "time-reversed auxiliary training"};
    app.require_subcommand(1);

    td2ip::GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen", "generate synthetic motion sequences");
    cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
    cmd_gen->add_option("--sequences", gen.sequences, "number of sequences");
    cmd_gen->add_option("--frames", gen.frames, "frames per sequence");
    cmd_gen->add_option("--joints", gen.joints, "joints per frame");
    cmd_gen->add_option("--fps", gen.fps, "frame rate");
    cmd_gen->add_option("--pattern", gen.pattern, "wave, walk or mixed");
    cmd_gen->add_option("--seed", gen.seed, "generator seed");
    cmd_gen->add_flag("--force", gen.force, "overwrite an existing dataset");

    std::string config_path, data_dir, out_dir, weights_path, report_path;
    std::string features_a, features_b, features, out_csv;
    bool force_train = false, force_ablate = false;

    auto* cmd_train = app.add_subcommand("train", "train a model");
    cmd_train->add_option("--config", config_path, "run config JSON")->required();
    cmd_train->add_option("--data", data_dir, "directory of .msq files")->required();
    cmd_train->add_option("--out", out_dir, "run directory")->required();
    cmd_train->add_flag("--force", force_train, "overwrite an existing run directory");

    auto* cmd_eval = app.add_subcommand("eval", "evaluate saved weights");
    cmd_eval->add_option("--weights", weights_path, "weights.tdw")->required();
    cmd_eval->add_option("--data", data_dir, "directory of .msq files")->required();
    cmd_eval->add_option("--report", report_path, "report JSON to write")->required();

    auto* cmd_ablate = app.add_subcommand("ablate", "run the five-variant ablation");
    cmd_ablate->add_option("--config", config_path, "run config JSON")->required();
    cmd_ablate->add_option("--data", data_dir, "directory of .msq files")->required();
    cmd_ablate->add_option("--out", out_dir, "output directory")->required();
    cmd_ablate->add_flag("--force", force_ablate, "overwrite an existing output directory");

    auto* cmd_fid = app.add_subcommand("fid", "Frechet distance between two feature CSVs");
    cmd_fid->add_option("--features-a", features_a, "feature CSV")->required();
    cmd_fid->add_option("--features-b", features_b, "feature CSV")->required();

    auto* cmd_project = app.add_subcommand("project", "2-D projection of a feature CSV");
    cmd_project->add_option("--features", features, "feature CSV")->required();
    cmd_project->add_option("--out", out_csv, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_gen->parsed()) td2ip::cmd_gen(gen);
        if (cmd_train->parsed()) td2ip::cmd_train(config_path, data_dir, out_dir, force_train);
        if (cmd_eval->parsed()) td2ip::cmd_eval(weights_path, data_dir, report_path);
        if (cmd_ablate->parsed()) td2ip::cmd_ablate(config_path, data_dir, out_dir, force_ablate);
        if (cmd_fid->parsed()) td2ip::cmd_fid(features_a, features_b);
        if (cmd_project->parsed()) td2ip::cmd_project(features, out_csv);
    } catch (const td2ip::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const td2ip::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const td2ip::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const td2ip::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const td2ip::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
