#include "skelrec/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "skelrec/synthetic.hpp"

namespace skelrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path ensure_out_dir(const ExperimentConfig& cfg) {
    fs::path out(cfg.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out))
        throw IoError("cannot create output directory " + out.string());
    return out;
}

void require_data(const ExperimentConfig& cfg) {
    if (cfg.data.empty()) throw ConfigError("config: data path required");
}

void require_checkpoint(const ExperimentConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("config: checkpoint path required");
}

TrainingSet load_training_set(const ExperimentConfig& cfg) {
    Dataset ds = load_processed(cfg.data);
    return make_training_set(ds);
}

Model load_model_for(const ExperimentConfig& cfg, const TrainingSet& ts) {
    Model model = load_checkpoint(cfg.checkpoint);
    if (model.dims.input != ts.dim())
        throw ConfigError("config: checkpoint input dim " + std::to_string(model.dims.input) +
                          " does not match data dim " + std::to_string(ts.dim()));
    return model;
}

// Raw E_T features, or AEC bottleneck features with the AEC fitted on the
// train split only.
std::vector<FeatureRecord> gather_features(const ExperimentConfig& cfg, const Model& model,
                                           const TrainingSet& ts) {
    std::vector<FeatureRecord> feats = extract_features(model, ts, cfg.batch_size);
    if (cfg.feature_kind == "raw") return feats;

    const int dim = static_cast<int>(feats[0].feature.size());
    if (dim < 8 || dim % 8 != 0)
        throw ConfigError("config: aec features need an encoding width divisible by 8, got " +
                          std::to_string(dim));
    const std::vector<int> train_idx = ts.indices_of(Split::Train);
    if (train_idx.empty()) throw ConfigError("config: aec features need a train split");
    Eigen::MatrixXd train_x(train_idx.size(), dim);
    for (size_t i = 0; i < train_idx.size(); ++i)
        train_x.row(i) = feats[train_idx[i]].feature.transpose();

    AecParams aec = init_aec(dim, cfg.seed);
    train_autoencoder(aec, train_x, cfg.aec_epochs, cfg.aec_learning_rate, cfg.seed);

    Eigen::MatrixXd all_x(feats.size(), dim);
    for (size_t i = 0; i < feats.size(); ++i) all_x.row(i) = feats[i].feature.transpose();
    Eigen::MatrixXd bn = aec_bottleneck(aec, all_x);
    for (size_t i = 0; i < feats.size(); ++i) feats[i].feature = bn.row(i).transpose();
    return feats;
}

void split_records(const TrainingSet& ts, const std::vector<FeatureRecord>& feats,
                   std::vector<FeatureRecord>& gallery, std::vector<FeatureRecord>& queries) {
    for (int i = 0; i < ts.size(); ++i)
        (ts.split[i] == Split::Train ? gallery : queries).push_back(feats[i]);
}

}  // namespace

int cmd_synth(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path out = ensure_out_dir(cfg);

    SynthSpec spec;
    spec.classes = cfg.classes;
    spec.per_class = cfg.per_class;
    spec.frames = cfg.frames;
    spec.min_frames = cfg.min_frames;
    spec.joints = cfg.joints;
    spec.noise = cfg.noise;
    spec.train_fraction = cfg.train_fraction;
    spec.seed = cfg.seed;
    Dataset ds = generate_synthetic(spec);

    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < ds.size(); ++i) {
        const std::string name = ds.sequences[i].id + ".json";
        save_sequence_json(out / name, ds.sequences[i]);
        manifest.push_back({name, ds.split[i]});
    }
    save_manifest(out / "manifest.json", manifest);
    std::cout << "wrote " << ds.size() << " sequences and manifest.json to " << out.string()
              << "\n";
    return kExitOk;
}

int cmd_preprocess(const ExperimentConfig& cfg) {
    cfg.validate();
    require_data(cfg);
    const fs::path out = ensure_out_dir(cfg);

    Dataset raw = load_dataset(cfg.data);
    Dataset processed;
    processed.provenance = raw.provenance;
    int skipped = 0;
    for (int i = 0; i < raw.size(); ++i) {
        try {
            ViewInvariantBasis basis = compute_basis(raw.sequences[i]);
            ActionSequence seq = apply_view_invariant(raw.sequences[i], basis);
            processed.sequences.push_back(resample(seq, cfg.t_max));
            processed.split.push_back(raw.split[i]);
        } catch (const DegeneratePoseError& e) {
            std::cerr << "warning: skipping " << raw.sequences[i].id << ": " << e.what() << "\n";
            ++skipped;
        }
    }
    if (processed.sequences.empty()) throw ParseError("all sequences were degenerate");

    NormStats stats =
        normalize(processed, std::nullopt,
                  cfg.norm == "global" ? NormMode::Global : NormMode::PerAxis);
    save_processed(out / "processed.json", processed);
    save_norm_stats(out / "normstats.json", stats);

    if (skipped > 0) std::cout << "skipped " << skipped << " degenerate sequences\n";
    std::cout << "preprocessed " << processed.size() << " sequences to " << out.string() << "\n";
    return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    require_data(cfg);
    const fs::path out = ensure_out_dir(cfg);

    TrainingSet ts = load_training_set(cfg);
    Model model = init_model(cfg.model_dims(ts.dim()), strategy_from_name(cfg.strategy), cfg.seed);
    std::vector<TrainLogRow> log = train(model, ts, cfg.train_config());

    save_checkpoint(out / "checkpoint.bin", model);
    write_trainlog_csv(out / "trainlog.csv", log);
    if (!log.empty())
        std::cout << "trained " << log.size() << " iterations, final loss " << log.back().loss
                  << "\n";
    std::cout << "wrote checkpoint.bin and trainlog.csv to " << out.string() << "\n";
    return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg) {
    cfg.validate();
    require_data(cfg);
    require_checkpoint(cfg);
    const fs::path out = ensure_out_dir(cfg);

    TrainingSet ts = load_training_set(cfg);
    Model model = load_model_for(cfg, ts);
    std::vector<FeatureRecord> feats = gather_features(cfg, model, ts);

    std::vector<FeatureRecord> gallery, queries;
    split_records(ts, feats, gallery, queries);
    if (gallery.empty() || queries.empty())
        throw ConfigError("config: eval needs both train and test sequences");
    EvalResult eval = evaluate(gallery, queries);

    write_confusion_csv(out / "confusion.csv", eval);
    json metrics{{"schema", 1},
                 {"feature_kind", cfg.feature_kind},
                 {"accuracy", eval.accuracy},
                 {"correct", eval.confusion.diagonal().sum()},
                 {"total", static_cast<int>(queries.size())}};
    std::ofstream mf(out / "metrics.json", std::ios::binary);
    if (!mf) throw IoError("cannot write " + (out / "metrics.json").string());
    mf << metrics.dump() << "\n";

    if (cfg.pca) {
        // Fig. 3-style export: last-layer state trajectories of the test
        // split, projected onto 3 principal axes fitted on those states.
        std::vector<int> test_idx = ts.indices_of(Split::Test);
        std::vector<PcaRow> rows;
        std::vector<Eigen::MatrixXd> states;
        for (int lo = 0; lo < static_cast<int>(test_idx.size()); lo += cfg.batch_size) {
            const int hi = std::min<int>(lo + cfg.batch_size, test_idx.size());
            std::vector<int> idx(test_idx.begin() + lo, test_idx.begin() + hi);
            SequenceBatch batch = make_batch(ts, idx);
            EncoderState es = encode(model.encoder, batch, /*record_trajectory=*/true);
            for (int i = 0; i < hi - lo; ++i)
                for (int t = 0; t < ts.steps; ++t) {
                    if (!ts.mask[idx[i]][t]) continue;
                    states.push_back(es.trajectory[t].row(i));
                    rows.push_back({ts.ids[idx[i]], t, 0, 0, 0, ts.labels[idx[i]]});
                }
        }
        Eigen::MatrixXd x(states.size(), states.empty() ? 0 : states[0].cols());
        for (size_t i = 0; i < states.size(); ++i) x.row(i) = states[i];
        PcaResult pca = pca_project(x, 3);
        for (size_t i = 0; i < rows.size(); ++i) {
            rows[i].x = pca.projected(i, 0);
            rows[i].y = pca.projected(i, 1);
            rows[i].z = pca.projected(i, 2);
        }
        write_pca_csv(out / "pca.csv", rows);
    }

    char acc[32];
    std::snprintf(acc, sizeof(acc), "%.4f", eval.accuracy);
    std::cout << "accuracy " << acc << " (" << eval.confusion.diagonal().sum() << "/"
              << queries.size() << ") with " << cfg.feature_kind << " features\n";
    return kExitOk;
}

int cmd_hpsearch(const ExperimentConfig& cfg, const std::vector<int>& hidden_candidates) {
    cfg.validate();
    require_data(cfg);
    if (hidden_candidates.empty())
        throw ConfigError("config: hpsearch needs at least one hidden-size candidate");
    for (int h : hidden_candidates)
        if (h < 1) throw ConfigError("config: hidden-size candidates must be >= 1");
    const fs::path out = ensure_out_dir(cfg);

    TrainingSet ts = load_training_set(cfg);
    std::vector<ModelDims> candidates;
    for (int h : hidden_candidates) candidates.push_back({cfg.layers, h, ts.dim()});
    SearchResult sr = hyperparam_search(candidates, strategy_from_name(cfg.strategy), ts,
                                        cfg.seed, cfg.batch_size);

    json ranked = json::array();
    for (int idx : sr.ranking) {
        const SearchCandidate& c = sr.candidates[idx];
        ranked.push_back({{"layers", c.dims.layers},
                          {"hidden", c.dims.hidden},
                          {"accuracy", c.accuracy},
                          {"params", c.params}});
    }
    std::ofstream f(out / "hpsearch.json", std::ios::binary);
    if (!f) throw IoError("cannot write " + (out / "hpsearch.json").string());
    f << ranked.dump(2) << "\n";

    const SearchCandidate& best = sr.candidates[sr.ranking[0]];
    std::cout << "best candidate: hidden " << best.dims.hidden << " (untrained 1-NN accuracy "
              << best.accuracy << ")\n";
    return kExitOk;
}

int cmd_export_features(const ExperimentConfig& cfg) {
    cfg.validate();
    require_data(cfg);
    require_checkpoint(cfg);
    const fs::path out = ensure_out_dir(cfg);

    TrainingSet ts = load_training_set(cfg);
    Model model = load_model_for(cfg, ts);
    std::vector<FeatureRecord> feats = gather_features(cfg, model, ts);
    write_features_csv(out / "features.csv", feats);
    std::cout << "wrote " << feats.size() << " " << cfg.feature_kind << " feature rows to "
              << (out / "features.csv").string() << "\n";
    return kExitOk;
}

int run_guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: training diverged: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace skelrec
