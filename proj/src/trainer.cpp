#include "skelrec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "skelrec/features.hpp"

namespace skelrec {

std::vector<int> TrainingSet::indices_of(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

TrainingSet make_training_set(const Dataset& ds) {
    if (ds.sequences.empty()) throw std::invalid_argument("make_training_set: empty dataset");
    if (ds.split.size() != ds.sequences.size())
        throw std::invalid_argument("make_training_set: split size mismatch");
    TrainingSet ts;
    ts.steps = ds.sequences[0].num_frames();
    ts.joints = ds.sequences[0].num_joints();
    ts.x.reserve(ds.sequences.size());
    for (size_t i = 0; i < ds.sequences.size(); ++i) {
        const ActionSequence& seq = ds.sequences[i];
        if (seq.num_frames() != ts.steps || seq.num_joints() != ts.joints)
            throw std::invalid_argument("make_training_set: inconsistent shape at sequence " +
                                        seq.id);
        ts.x.push_back(flatten(seq));
        std::vector<bool> m(ts.steps);
        for (int t = 0; t < ts.steps; ++t) m[t] = seq.frame_is_valid(t);
        ts.mask.push_back(std::move(m));
        ts.labels.push_back(seq.label.value_or(-1));
        ts.ids.push_back(seq.id);
        ts.split.push_back(ds.split[i]);
    }
    return ts;
}

SequenceBatch make_batch(const TrainingSet& ts, const std::vector<int>& indices) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    const Eigen::Index b = static_cast<Eigen::Index>(indices.size());
    SequenceBatch batch;
    batch.x.assign(ts.steps, Eigen::MatrixXd(b, ts.dim()));
    batch.mask.resize(b, ts.steps);
    for (Eigen::Index i = 0; i < b; ++i) {
        const int idx = indices[i];
        for (int t = 0; t < ts.steps; ++t) {
            batch.x[t].row(i) = ts.x[idx].row(t);
            batch.mask(i, t) = ts.mask[idx][t];
        }
    }
    return batch;
}

double lr_schedule(double lr0, double decay, int interval, long long iteration) {
    if (interval <= 0) return lr0;
    return lr0 * std::pow(decay, static_cast<double>(iteration / interval));
}

double clip_gradients(const std::vector<TensorRef>& grads, double clip_norm) {
    double sq = 0.0;
    for (const TensorRef& g : grads)
        sq += Eigen::Map<const Eigen::VectorXd>(g.data, g.size()).squaredNorm();
    const double norm = std::sqrt(sq);
    if (clip_norm > 0 && norm > clip_norm) {
        const double scale = clip_norm / norm;
        for (const TensorRef& g : grads)
            Eigen::Map<Eigen::VectorXd>(g.data, g.size()) *= scale;
    }
    return norm;
}

AdamState AdamState::init(const std::vector<TensorRef>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const TensorRef& p : params) {
        s.m.push_back(Eigen::VectorXd::Zero(p.size()));
        s.v.push_back(Eigen::VectorXd::Zero(p.size()));
    }
    return s;
}

void adam_update(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                 AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_update: tensor list mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size())
            throw std::invalid_argument("adam_update: tensor shape mismatch at " + params[k].name);
        Eigen::Map<Eigen::VectorXd> p(params[k].data, params[k].size());
        Eigen::Map<const Eigen::VectorXd> g(grads[k].data, grads[k].size());
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g.cwiseProduct(g);
        p -= (lr * (state.m[k] / bc1).array() / ((state.v[k] / bc2).array().sqrt() + state.eps))
                 .matrix();
    }
}

BackwardResult chunked_backward(const Model& model, const SequenceBatch& batch, LossKind kind,
                                int threads) {
    const Eigen::Index b = batch.batch();
    const int n = std::max(1, std::min<int>(threads, static_cast<int>(b)));
    if (n == 1) return backward(model, batch, kind);

    std::vector<Eigen::Index> start(n + 1, 0);
    for (int c = 0; c < n; ++c) start[c + 1] = start[c] + b / n + (c < b % n ? 1 : 0);

    std::vector<BackwardResult> parts(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int c = 0; c < n; ++c) {
        pool.emplace_back([&, c]() {
            try {
                const Eigen::Index lo = start[c], len = start[c + 1] - start[c];
                SequenceBatch sub;
                sub.x.reserve(batch.x.size());
                for (const Eigen::MatrixXd& xt : batch.x) sub.x.push_back(xt.middleRows(lo, len));
                sub.mask = batch.mask.block(lo, 0, len, batch.mask.cols());
                parts[c] = backward(model, sub, kind);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    // combine in chunk order, weighted by chunk size
    BackwardResult out;
    out.grads = ModelGrads::zeros(model, 0);
    std::vector<TensorRef> acc = grad_tensors(out.grads, model, false);
    for (int c = 0; c < n; ++c) {
        const double w = static_cast<double>(start[c + 1] - start[c]) / static_cast<double>(b);
        out.loss += w * parts[c].loss;
        std::vector<TensorRef> part = grad_tensors(parts[c].grads, model, false);
        for (size_t k = 0; k < acc.size(); ++k)
            Eigen::Map<Eigen::VectorXd>(acc[k].data, acc[k].size()) +=
                w * Eigen::Map<const Eigen::VectorXd>(part[k].data, part[k].size());
    }
    out.grads.decoder_present = parts[0].grads.decoder_present;
    if (!std::isfinite(out.loss)) throw DivergenceError("non-finite loss");
    return out;
}

std::vector<TrainLogRow> train(Model& model, const TrainingSet& data, const TrainConfig& cfg) {
    std::vector<int> train_idx = data.indices_of(Split::Train);
    if (train_idx.empty()) throw std::invalid_argument("train: no training sequences");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");

    std::vector<TrainLogRow> log;
    if (cfg.max_iterations <= 0) return log;
    log.reserve(cfg.max_iterations);

    const std::vector<TensorRef> params = trainable_tensors(model);
    AdamState adam = AdamState::init(params);
    Rng shuffle_rng(cfg.seed);
    const auto t0 = std::chrono::steady_clock::now();

    size_t cursor = train_idx.size();  // forces a shuffle before the first batch
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        if (cursor >= train_idx.size()) {
            std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
            cursor = 0;
        }
        const size_t take = std::min<size_t>(cfg.batch_size, train_idx.size() - cursor);
        std::vector<int> batch_idx(train_idx.begin() + cursor, train_idx.begin() + cursor + take);
        cursor += take;

        SequenceBatch batch = make_batch(data, batch_idx);
        BackwardResult br = chunked_backward(model, batch, cfg.loss, cfg.threads);

        std::vector<TensorRef> grads = grad_tensors(br.grads, model, true);
        clip_gradients(grads, cfg.clip_norm);
        const double lr = lr_schedule(cfg.learning_rate, cfg.decay, cfg.decay_interval, iter);
        adam_update(params, grads, adam, lr);

        TrainLogRow row;
        row.iteration = iter + 1;
        row.loss = br.loss;
        row.lr = lr;
        if (cfg.eval_interval > 0 && (iter + 1) % cfg.eval_interval == 0) {
            std::vector<FeatureRecord> feats = extract_features(model, data, cfg.batch_size);
            std::vector<FeatureRecord> gallery, queries;
            for (int i = 0; i < data.size(); ++i)
                (data.split[i] == Split::Train ? gallery : queries).push_back(feats[i]);
            if (!gallery.empty() && !queries.empty()) {
                row.accuracy = evaluate(gallery, queries).accuracy;
                row.has_accuracy = true;
            }
        }
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.push_back(row);
    }
    return log;
}

SearchResult hyperparam_search(const std::vector<ModelDims>& candidates,
                               DecoderStrategy strategy, const TrainingSet& data,
                               std::uint64_t seed, int batch_size) {
    if (candidates.empty()) throw std::invalid_argument("hyperparam_search: no candidates");
    SearchResult res;
    res.candidates.reserve(candidates.size());
    for (const ModelDims& dims : candidates) {
        if (dims.input != data.dim())
            throw std::invalid_argument("hyperparam_search: candidate input dim mismatch");
        Model m = init_model(dims, strategy, seed);
        std::vector<FeatureRecord> feats = extract_features(m, data, batch_size);
        std::vector<FeatureRecord> gallery, queries;
        for (int i = 0; i < data.size(); ++i)
            (data.split[i] == Split::Train ? gallery : queries).push_back(feats[i]);
        if (gallery.empty() || queries.empty())
            throw std::invalid_argument("hyperparam_search: need both splits");
        SearchCandidate c;
        c.dims = dims;
        c.accuracy = evaluate(gallery, queries).accuracy;
        c.params = parameter_count(m);
        res.candidates.push_back(c);
    }
    res.ranking.resize(candidates.size());
    std::iota(res.ranking.begin(), res.ranking.end(), 0);
    std::stable_sort(res.ranking.begin(), res.ranking.end(), [&](int a, int b) {
        if (res.candidates[a].accuracy != res.candidates[b].accuracy)
            return res.candidates[a].accuracy > res.candidates[b].accuracy;
        return res.candidates[a].params < res.candidates[b].params;
    });
    return res;
}

}  // namespace skelrec
