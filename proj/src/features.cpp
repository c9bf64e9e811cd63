#include "skelrec/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace skelrec {

std::vector<FeatureRecord> extract_features(const Model& model, const TrainingSet& data,
                                            int batch_size) {
    if (batch_size < 1) throw std::invalid_argument("extract_features: bad batch size");
    std::vector<FeatureRecord> out(data.size());
    for (int lo = 0; lo < data.size(); lo += batch_size) {
        const int hi = std::min(lo + batch_size, data.size());
        std::vector<int> idx(hi - lo);
        std::iota(idx.begin(), idx.end(), lo);
        SequenceBatch batch = make_batch(data, idx);
        EncoderState es = encode(model.encoder, batch);
        for (int i = lo; i < hi; ++i) {
            out[i].id = data.ids[i];
            out[i].label = data.labels[i];
            out[i].feature = es.e_t.row(i - lo);
        }
    }
    return out;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: size mismatch");
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine_similarity: zero vector");
    return a.dot(b) / (na * nb);
}

int knn_classify(const Eigen::VectorXd& query, const std::vector<FeatureRecord>& gallery) {
    if (gallery.empty()) throw std::invalid_argument("knn_classify: empty gallery");
    int best = -1;
    double best_sim = 0.0;
    for (int i = 0; i < static_cast<int>(gallery.size()); ++i) {
        const double sim = cosine_similarity(query, gallery[i].feature);
        if (best < 0 || sim > best_sim ||
            (sim == best_sim && gallery[i].id < gallery[best].id)) {
            best = i;
            best_sim = sim;
        }
    }
    return best;
}

EvalResult evaluate(const std::vector<FeatureRecord>& gallery,
                    const std::vector<FeatureRecord>& queries) {
    if (gallery.empty() || queries.empty())
        throw std::invalid_argument("evaluate: empty gallery or query set");
    std::map<int, int> label_index;
    for (const FeatureRecord& r : gallery) label_index.emplace(r.label, 0);
    for (const FeatureRecord& r : queries) label_index.emplace(r.label, 0);
    EvalResult res;
    for (auto& [label, idx] : label_index) {
        idx = static_cast<int>(res.label_values.size());
        res.label_values.push_back(label);
    }
    const int k = static_cast<int>(res.label_values.size());
    res.confusion = Eigen::MatrixXi::Zero(k, k);
    int correct = 0;
    for (const FeatureRecord& q : queries) {
        const int predicted = gallery[knn_classify(q.feature, gallery)].label;
        if (predicted == q.label) ++correct;
        res.confusion(label_index.at(q.label), label_index.at(predicted)) += 1;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(queries.size());
    return res;
}

AecParams init_aec(int input_dim, std::uint64_t seed) {
    if (input_dim < 8 || input_dim % 8 != 0)
        throw std::invalid_argument("init_aec: input dim must be a positive multiple of 8");
    const int d = input_dim;
    const int dims[7] = {d, d / 2, d / 4, d / 8, d / 4, d / 2, d};
    AecParams aec;
    Rng rng(seed);
    for (int l = 0; l < 6; ++l) {
        Eigen::MatrixXd w(dims[l + 1], dims[l]);
        fill_uniform(w, dims[l], rng);
        Eigen::VectorXd b(dims[l + 1]);
        fill_uniform(b, dims[l], rng);
        aec.w.push_back(std::move(w));
        aec.b.push_back(std::move(b));
    }
    return aec;
}

Eigen::MatrixXd aec_forward(const AecParams& aec, const Eigen::MatrixXd& x,
                            std::vector<Eigen::MatrixXd>* acts) {
    if (x.cols() != aec.input_dim()) throw std::invalid_argument("aec_forward: width mismatch");
    if (acts) acts->clear();
    Eigen::MatrixXd a = x;
    const int last = static_cast<int>(aec.w.size()) - 1;
    for (int l = 0; l <= last; ++l) {
        a = (a * aec.w[l].transpose()).rowwise() + aec.b[l].transpose();
        if (l < last) a = a.array().tanh();
        if (acts) acts->push_back(a);
    }
    return a;
}

Eigen::MatrixXd aec_bottleneck(const AecParams& aec, const Eigen::MatrixXd& x) {
    if (x.cols() != aec.input_dim())
        throw std::invalid_argument("aec_bottleneck: width mismatch");
    Eigen::MatrixXd a = x;
    for (int l = 0; l < 3; ++l)
        a = (((a * aec.w[l].transpose()).rowwise() + aec.b[l].transpose()).array().tanh());
    return a;
}

double aec_loss(const AecParams& aec, const Eigen::MatrixXd& x, AecParams* grads) {
    if (x.rows() < 1) throw std::invalid_argument("aec_loss: empty input");
    const int layers = static_cast<int>(aec.w.size());
    const double denom = static_cast<double>(x.rows()) * static_cast<double>(x.cols());

    std::vector<Eigen::MatrixXd> acts;
    Eigen::MatrixXd out = aec_forward(aec, x, &acts);
    Eigen::MatrixXd err = out - x;
    const double loss = err.cwiseAbs().sum() / denom;
    if (!grads) return loss;

    grads->w.assign(layers, Eigen::MatrixXd());
    grads->b.assign(layers, Eigen::VectorXd());
    Eigen::MatrixXd da = err.unaryExpr([](double v) {
                             return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
                         }) /
                         denom;
    for (int l = layers - 1; l >= 0; --l) {
        Eigen::MatrixXd dz =
            l < layers - 1 ? (da.array() * (1.0 - acts[l].array().square())).matrix() : da;
        const Eigen::MatrixXd& in = l > 0 ? acts[l - 1] : x;
        grads->w[l] = dz.transpose() * in;
        grads->b[l] = dz.colwise().sum().transpose();
        if (l > 0) da = dz * aec.w[l];
    }
    return loss;
}

std::vector<double> train_autoencoder(AecParams& aec, const Eigen::MatrixXd& x, int epochs,
                                      double learning_rate, std::uint64_t seed) {
    if (x.rows() < 1) throw std::invalid_argument("train_autoencoder: empty input");
    if (epochs < 0) throw std::invalid_argument("train_autoencoder: negative epochs");
    (void)seed;  // init happens in init_aec; full-batch training draws nothing

    const int layers = static_cast<int>(aec.w.size());

    // Adam state over the flattened layer parameters
    std::vector<Eigen::MatrixXd> mw(layers), vw(layers);
    std::vector<Eigen::VectorXd> mb(layers), vb(layers);
    for (int l = 0; l < layers; ++l) {
        mw[l] = Eigen::MatrixXd::Zero(aec.w[l].rows(), aec.w[l].cols());
        vw[l] = mw[l];
        mb[l] = Eigen::VectorXd::Zero(aec.b[l].size());
        vb[l] = mb[l];
    }
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    std::vector<double> losses;
    losses.reserve(epochs + 1);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        AecParams g;
        losses.push_back(aec_loss(aec, x, &g));
        const double bc1 = 1.0 - std::pow(beta1, epoch + 1);
        const double bc2 = 1.0 - std::pow(beta2, epoch + 1);
        for (int l = 0; l < layers; ++l) {
            mw[l] = beta1 * mw[l] + (1 - beta1) * g.w[l];
            vw[l] = beta2 * vw[l] + (1 - beta2) * g.w[l].cwiseProduct(g.w[l]);
            aec.w[l] -= (learning_rate * (mw[l] / bc1).array() /
                         ((vw[l] / bc2).array().sqrt() + adam_eps))
                            .matrix();
            mb[l] = beta1 * mb[l] + (1 - beta1) * g.b[l];
            vb[l] = beta2 * vb[l] + (1 - beta2) * g.b[l].cwiseProduct(g.b[l]);
            aec.b[l] -= (learning_rate * (mb[l] / bc1).array() /
                         ((vb[l] / bc2).array().sqrt() + adam_eps))
                            .matrix();
        }
    }
    losses.push_back(aec_loss(aec, x));
    return losses;
}

PcaResult pca_project(const Eigen::MatrixXd& x, int components) {
    if (x.rows() < 2) throw std::invalid_argument("pca_project: need at least two samples");
    if (components < 1) throw std::invalid_argument("pca_project: need at least one component");
    const Eigen::Index n = x.rows(), d = x.cols();

    PcaResult res;
    res.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - res.mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pca_project: eigendecomposition failed");
    // solver returns ascending order; flip to descending
    Eigen::VectorXd evals = solver.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

    const double total = evals.sum();
    const double tol = evals.size() > 0 ? evals[0] * 1e-12 : 0.0;

    res.axes = Eigen::MatrixXd::Zero(d, components);
    res.explained = Eigen::VectorXd::Zero(components);
    for (int c = 0; c < components && c < d; ++c) {
        if (evals[c] <= tol) continue;  // rank deficient: leave zero
        Eigen::VectorXd axis = evecs.col(c);
        Eigen::Index peak;
        axis.cwiseAbs().maxCoeff(&peak);
        if (axis[peak] < 0) axis = -axis;
        res.axes.col(c) = axis;
        res.explained[c] = total > 0 ? evals[c] / total : 0.0;
    }
    res.projected = centered * res.axes;
    return res;
}

}  // namespace skelrec
