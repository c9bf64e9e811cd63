#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skelrec/features.hpp"
#include "skelrec/model.hpp"
#include "skelrec/skeleton.hpp"
#include "skelrec/trainer.hpp"

namespace skelrec {

// Canonical sequence JSON:
// {"id", "label", "subject", "view", "num_joints",
//  "joint_map": {"root", "spine", "hip_left", "hip_right"},
//  "frames": [[[x,y,z] * J] * T]}
ActionSequence load_sequence_json(const std::filesystem::path& path);

// CSV fallback: header j0_x,j0_y,j0_z,...; one frame per row. The joint map
// defaults to joints 0..3 (root, spine, hip_left, hip_right) and the id to the
// file stem.
ActionSequence load_sequence_csv(const std::filesystem::path& path);

// Dispatches on the .json / .csv extension.
ActionSequence load_sequence(const std::filesystem::path& path);

void save_sequence_json(const std::filesystem::path& path, const ActionSequence& seq);

struct ManifestEntry {
    std::string path;  // relative to the manifest directory
    Split split = Split::Train;
};

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// Loads every sequence referenced by a manifest, keeping manifest order.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Preprocessed dataset archive (single JSON file including splits and masks).
void save_processed(const std::filesystem::path& path, const Dataset& ds);
Dataset load_processed(const std::filesystem::path& path);

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_norm_stats(const std::filesystem::path& path);

// Checkpoint: one line of JSON (dims, strategy, seed, tensor table with byte
// offsets), then '\n', then raw little-endian f64 column-major payloads.
void save_checkpoint(const std::filesystem::path& path, Model& model);
Model load_checkpoint(const std::filesystem::path& path);

void write_trainlog_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);
void write_features_csv(const std::filesystem::path& path,
                        const std::vector<FeatureRecord>& records);
void write_confusion_csv(const std::filesystem::path& path, const EvalResult& eval);

struct PcaRow {
    std::string id;
    int step = 0;
    double x = 0, y = 0, z = 0;
    int label = -1;
};

void write_pca_csv(const std::filesystem::path& path, const std::vector<PcaRow>& rows);

// Experiment configuration. JSON file with a versioned schema; CLI flags
// override file values.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out = "out";
    int threads = 1;
    std::string data;        // manifest or processed archive, per command
    std::string checkpoint;  // eval / export-features input

    // model
    int layers = 3;
    int hidden = 1024;
    std::string strategy = "fixed_weights";

    // preprocess
    int t_max = kDefaultTmax;
    std::string norm = "global";

    // synth
    int classes = 4;
    int per_class = 50;
    int frames = 50;
    int min_frames = 0;
    int joints = 15;
    double noise = 0.1;
    double train_fraction = 0.7;

    // train
    std::string loss = "mse";
    int batch_size = 64;
    double learning_rate = 1e-4;
    double decay = 0.95;
    int decay_interval = 1000;
    double clip_norm = 25.0;
    int max_iterations = 0;
    int eval_interval = 0;

    // features
    std::string feature_kind = "raw";  // raw | aec
    int aec_epochs = 300;
    double aec_learning_rate = 1e-3;
    bool pca = false;

    ModelDims model_dims(int input_dim) const;
    TrainConfig train_config() const;
    void validate() const;  // throws ParseError on invalid values
};

// Parses the JSON config file; unknown keys and schema mismatches are errors.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace skelrec
