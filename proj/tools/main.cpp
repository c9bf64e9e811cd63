#include <functional>
#include <vector>

#include "CLI11.hpp"
#include "skelrec/commands.hpp"

using namespace skelrec;

int main(int argc, char** argv) {
    CLI::App app{"skelrec: unsupervised skeleton-sequence feature learning"};
    app.require_subcommand(1);

    std::string config_path;
    ExperimentConfig flags;  // only fields whose option was actually given are applied
    std::vector<int> hidden_candidates;

    // copies a flag value into the final config when the option was provided,
    // so precedence is defaults < config file < flags
    std::vector<std::function<void(ExperimentConfig&)>> appliers;
    auto track = [&appliers](CLI::Option* opt, auto* flag_field, auto cfg_field) {
        appliers.push_back([opt, flag_field, cfg_field](ExperimentConfig& c) {
            if (opt->count() > 0) c.*cfg_field = *flag_field;
        });
    };

    app.add_option("--config", config_path, "JSON experiment config; flags override its values");
    track(app.add_option("--seed", flags.seed, "RNG seed"), &flags.seed,
          &ExperimentConfig::seed);
    track(app.add_option("--out", flags.out, "output directory"), &flags.out,
          &ExperimentConfig::out);
    track(app.add_option("--threads", flags.threads, "worker threads for batch gradients"),
          &flags.threads, &ExperimentConfig::threads);

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    synth->fallthrough();
    track(synth->add_option("--classes", flags.classes, "number of action classes"),
          &flags.classes, &ExperimentConfig::classes);
    track(synth->add_option("--per-class", flags.per_class, "sequences per class"),
          &flags.per_class, &ExperimentConfig::per_class);
    track(synth->add_option("--frames", flags.frames, "frames per sequence"), &flags.frames,
          &ExperimentConfig::frames);
    track(synth->add_option("--min-frames", flags.min_frames,
                            "draw true lengths in [min-frames, frames]"),
          &flags.min_frames, &ExperimentConfig::min_frames);
    track(synth->add_option("--joints", flags.joints, "joints per skeleton (>= 4)"),
          &flags.joints, &ExperimentConfig::joints);
    track(synth->add_option("--noise", flags.noise, "motion jitter level"), &flags.noise,
          &ExperimentConfig::noise);
    track(synth->add_option("--train-fraction", flags.train_fraction,
                            "per-class fraction assigned to the train split"),
          &flags.train_fraction, &ExperimentConfig::train_fraction);

    CLI::App* pre = app.add_subcommand("preprocess", "view-invariant transform + resample + normalize");
    pre->fallthrough();
    track(pre->add_option("--data", flags.data, "dataset manifest JSON"), &flags.data,
          &ExperimentConfig::data);
    track(pre->add_option("--t-max", flags.t_max, "frames after resampling"), &flags.t_max,
          &ExperimentConfig::t_max);
    track(pre->add_option("--norm", flags.norm, "normalization mode: global | per_axis"),
          &flags.norm, &ExperimentConfig::norm);

    CLI::App* tr = app.add_subcommand("train", "train the encoder on a processed archive");
    tr->fallthrough();
    track(tr->add_option("--data", flags.data, "processed archive JSON"), &flags.data,
          &ExperimentConfig::data);
    track(tr->add_option("--layers", flags.layers, "encoder layers"), &flags.layers,
          &ExperimentConfig::layers);
    track(tr->add_option("--hidden", flags.hidden, "hidden units per direction"), &flags.hidden,
          &ExperimentConfig::hidden);
    track(tr->add_option("--strategy", flags.strategy, "decoder: fixed_weights | fixed_states"),
          &flags.strategy, &ExperimentConfig::strategy);
    track(tr->add_option("--loss", flags.loss, "reconstruction loss: mse | mae"), &flags.loss,
          &ExperimentConfig::loss);
    track(tr->add_option("--batch-size", flags.batch_size, "sequences per batch"),
          &flags.batch_size, &ExperimentConfig::batch_size);
    track(tr->add_option("--learning-rate", flags.learning_rate, "initial Adam learning rate"),
          &flags.learning_rate, &ExperimentConfig::learning_rate);
    track(tr->add_option("--decay", flags.decay, "lr decay factor"), &flags.decay,
          &ExperimentConfig::decay);
    track(tr->add_option("--decay-interval", flags.decay_interval, "iterations per decay step"),
          &flags.decay_interval, &ExperimentConfig::decay_interval);
    track(tr->add_option("--clip-norm", flags.clip_norm, "global gradient-norm clip"),
          &flags.clip_norm, &ExperimentConfig::clip_norm);
    track(tr->add_option("--iterations", flags.max_iterations, "training iterations"),
          &flags.max_iterations, &ExperimentConfig::max_iterations);
    track(tr->add_option("--eval-interval", flags.eval_interval,
                         "iterations between 1-NN accuracy probes (0 = never)"),
          &flags.eval_interval, &ExperimentConfig::eval_interval);

    CLI::App* ev = app.add_subcommand("eval", "1-NN evaluation of a trained checkpoint");
    ev->fallthrough();
    track(ev->add_option("--data", flags.data, "processed archive JSON"), &flags.data,
          &ExperimentConfig::data);
    track(ev->add_option("--checkpoint", flags.checkpoint, "checkpoint.bin to evaluate"),
          &flags.checkpoint, &ExperimentConfig::checkpoint);
    track(ev->add_option("--features", flags.feature_kind, "feature kind: raw | aec"),
          &flags.feature_kind, &ExperimentConfig::feature_kind);
    track(ev->add_option("--aec-epochs", flags.aec_epochs, "autoencoder training epochs"),
          &flags.aec_epochs, &ExperimentConfig::aec_epochs);
    track(ev->add_option("--aec-lr", flags.aec_learning_rate, "autoencoder learning rate"),
          &flags.aec_learning_rate, &ExperimentConfig::aec_learning_rate);
    track(ev->add_flag("--pca", flags.pca, "export test state trajectories in PCA space"),
          &flags.pca, &ExperimentConfig::pca);
    track(ev->add_option("--batch-size", flags.batch_size, "extraction batch size"),
          &flags.batch_size, &ExperimentConfig::batch_size);

    CLI::App* hp = app.add_subcommand("hpsearch", "rank architectures by untrained 1-NN accuracy");
    hp->fallthrough();
    track(hp->add_option("--data", flags.data, "processed archive JSON"), &flags.data,
          &ExperimentConfig::data);
    hp->add_option("--hidden", hidden_candidates, "candidate hidden sizes, e.g. 4,256")
        ->delimiter(',');
    track(hp->add_option("--layers", flags.layers, "encoder layers"), &flags.layers,
          &ExperimentConfig::layers);
    track(hp->add_option("--strategy", flags.strategy, "decoder: fixed_weights | fixed_states"),
          &flags.strategy, &ExperimentConfig::strategy);
    track(hp->add_option("--batch-size", flags.batch_size, "extraction batch size"),
          &flags.batch_size, &ExperimentConfig::batch_size);

    CLI::App* ex = app.add_subcommand("export-features", "write per-sequence features as CSV");
    ex->fallthrough();
    track(ex->add_option("--data", flags.data, "processed archive JSON"), &flags.data,
          &ExperimentConfig::data);
    track(ex->add_option("--checkpoint", flags.checkpoint, "checkpoint.bin to load"),
          &flags.checkpoint, &ExperimentConfig::checkpoint);
    track(ex->add_option("--features", flags.feature_kind, "feature kind: raw | aec"),
          &flags.feature_kind, &ExperimentConfig::feature_kind);
    track(ex->add_option("--aec-epochs", flags.aec_epochs, "autoencoder training epochs"),
          &flags.aec_epochs, &ExperimentConfig::aec_epochs);
    track(ex->add_option("--aec-lr", flags.aec_learning_rate, "autoencoder learning rate"),
          &flags.aec_learning_rate, &ExperimentConfig::aec_learning_rate);
    track(ex->add_option("--batch-size", flags.batch_size, "extraction batch size"),
          &flags.batch_size, &ExperimentConfig::batch_size);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    return run_guarded([&]() -> int {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        for (const auto& apply : appliers) apply(cfg);
        cfg.validate();

        if (synth->parsed()) return cmd_synth(cfg);
        if (pre->parsed()) return cmd_preprocess(cfg);
        if (tr->parsed()) return cmd_train(cfg);
        if (ev->parsed()) return cmd_eval(cfg);
        if (hp->parsed()) return cmd_hpsearch(cfg, hidden_candidates);
        if (ex->parsed()) return cmd_export_features(cfg);
        throw ConfigError("config: no subcommand given");
    });
}
