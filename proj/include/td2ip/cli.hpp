#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "td2ip/config.hpp"

namespace td2ip {

struct GenArgs {
    std::filesystem::path out_dir;
    int sequences = 10;
    int frames = 40;
    int joints = 8;
    double fps = 25.0;
    std::string pattern = "mixed";
    std::uint64_t seed = 1;
    bool force = false;
};

// Writes seq_0000.msq ... plus manifest.json with the generator parameters.
void cmd_gen(const GenArgs& args);

// Trains per the config; the run directory receives weights.tdw, epochs.csv,
// report.json and config.used.json. Refuses to reuse a populated run
// directory unless forced.
void cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& data_dir,
               const std::filesystem::path& run_dir, bool force);

// Evaluates saved weights on the validation split of a data directory and
// writes an EvalReport. Everything needed (dims, stats, horizons, stride)
// travels inside the weight file.
void cmd_eval(const std::filesystem::path& weights_path, const std::filesystem::path& data_dir,
              const std::filesystem::path& report_path);

// Runs the five-variant ablation; emits ablation.txt (checkmark table),
// ablation.json and config.used.json.
void cmd_ablate(const std::filesystem::path& config_path, const std::filesystem::path& data_dir,
                const std::filesystem::path& out_dir, bool force);

// Prints the Frechet distance between two feature CSV files with 6 decimals.
void cmd_fid(const std::filesystem::path& features_a, const std::filesystem::path& features_b);

// Writes the deterministic 2-D projection of a feature CSV as "x,y" rows.
void cmd_project(const std::filesystem::path& features, const std::filesystem::path& out_csv);

}  // namespace td2ip
