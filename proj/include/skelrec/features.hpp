#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelrec/trainer.hpp"

namespace skelrec {

struct FeatureRecord {
    std::string id;
    int label = -1;
    Eigen::VectorXd feature;
};

// Final encoder state E_T per sequence, in dataset order.
std::vector<FeatureRecord> extract_features(const Model& model, const TrainingSet& data,
                                            int batch_size = 64);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// 1-NN under cosine similarity; equal similarity resolves to the gallery
// record with the smallest id. Returns the gallery index.
int knn_classify(const Eigen::VectorXd& query, const std::vector<FeatureRecord>& gallery);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<int> label_values;  // sorted distinct labels, confusion axes
    Eigen::MatrixXi confusion;      // rows = truth, cols = predicted
};

EvalResult evaluate(const std::vector<FeatureRecord>& gallery,
                    const std::vector<FeatureRecord>& queries);

// Feature-level autoencoder: affine chain D, D/2, D/4, D/8, D/4, D/2, D with
// tanh after every layer except the last. D must be divisible by 8.
struct AecParams {
    std::vector<Eigen::MatrixXd> w;  // out x in per layer
    std::vector<Eigen::VectorXd> b;

    int input_dim() const { return w.empty() ? 0 : static_cast<int>(w.front().cols()); }
    int bottleneck_dim() const { return w.size() < 3 ? 0 : static_cast<int>(w[2].rows()); }
};

AecParams init_aec(int input_dim, std::uint64_t seed);

// Rows of x are samples. When acts is non-null it receives the post-activation
// output of every layer.
Eigen::MatrixXd aec_forward(const AecParams& aec, const Eigen::MatrixXd& x,
                            std::vector<Eigen::MatrixXd>* acts = nullptr);

// Post-tanh output of the third layer.
Eigen::MatrixXd aec_bottleneck(const AecParams& aec, const Eigen::MatrixXd& x);

// Mean absolute reconstruction error over all entries of x and its exact
// gradient (grads shaped like the parameters; may be null for loss only).
double aec_loss(const AecParams& aec, const Eigen::MatrixXd& x, AecParams* grads = nullptr);

// Full-batch Adam on mean absolute reconstruction error. Returns epochs + 1
// losses: entry e is the loss going into update e, the last is the final loss.
std::vector<double> train_autoencoder(AecParams& aec, const Eigen::MatrixXd& x, int epochs,
                                      double learning_rate, std::uint64_t seed);

struct PcaResult {
    Eigen::MatrixXd projected;   // n x k
    Eigen::MatrixXd axes;        // d x k, unit columns, descending variance
    Eigen::VectorXd explained;   // k variance ratios
    Eigen::VectorXd mean;        // d
};

// Principal components of the rows of x. Axis signs are canonicalized so the
// largest-magnitude component of each axis is positive; rank-deficient
// directions come out as zero axes with zero explained variance.
PcaResult pca_project(const Eigen::MatrixXd& x, int components = 3);

}  // namespace skelrec
