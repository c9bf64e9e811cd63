#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelrec/model.hpp"
#include "skelrec/skeleton.hpp"

namespace skelrec {

// Preprocessed dataset in model-ready form: one flattened T x D matrix per
// sequence, all the same length.
struct TrainingSet {
    std::vector<Eigen::MatrixXd> x;
    std::vector<std::vector<bool>> mask;
    std::vector<int> labels;
    std::vector<std::string> ids;
    std::vector<Split> split;
    int steps = 0;
    int joints = 0;

    int size() const { return static_cast<int>(x.size()); }
    int dim() const { return joints * 3; }
    std::vector<int> indices_of(Split s) const;
};

TrainingSet make_training_set(const Dataset& ds);

SequenceBatch make_batch(const TrainingSet& ts, const std::vector<int>& indices);

struct TrainConfig {
    LossKind loss = LossKind::MSE;
    int batch_size = 64;
    double learning_rate = 1e-4;
    double decay = 0.95;
    int decay_interval = 1000;
    double clip_norm = 25.0;
    int max_iterations = 0;
    int eval_interval = 0;  // 0 disables accuracy probes
    std::uint64_t seed = 1;
    int threads = 1;
};

struct TrainLogRow {
    int iteration = 0;  // 1-based
    double loss = 0.0;
    double lr = 0.0;
    double accuracy = 0.0;
    bool has_accuracy = false;
    double seconds = 0.0;
};

double lr_schedule(double lr0, double decay, int interval, long long iteration);

// Scales the whole set down to clip_norm when the global L2 norm exceeds it;
// returns the pre-clip norm.
double clip_gradients(const std::vector<TensorRef>& grads, double clip_norm);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<Eigen::VectorXd> m, v;

    static AdamState init(const std::vector<TensorRef>& params);
};

void adam_update(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                 AdamState& state, double lr);

// Mini-batch training over the train split. Seeded epoch shuffling, remainder
// batches kept, one log row per iteration. Throws DivergenceError when the
// loss goes non-finite.
std::vector<TrainLogRow> train(Model& model, const TrainingSet& data, const TrainConfig& cfg);

// Averaged backward over row chunks with a fixed combine order; equals the
// single-call result up to summation order. Exposed for the trainer and the
// CLI --threads plumbing.
BackwardResult chunked_backward(const Model& model, const SequenceBatch& batch, LossKind kind,
                                int threads);

struct SearchCandidate {
    ModelDims dims;
    double accuracy = 0.0;
    long long params = 0;
};

struct SearchResult {
    std::vector<SearchCandidate> candidates;  // input order
    std::vector<int> ranking;                 // candidate indices, best first
};

// Ranks architectures by 1-NN accuracy of the untrained random encoder,
// descending; ties go to the smaller parameter count.
SearchResult hyperparam_search(const std::vector<ModelDims>& candidates,
                               DecoderStrategy strategy, const TrainingSet& data,
                               std::uint64_t seed, int batch_size);

}  // namespace skelrec
