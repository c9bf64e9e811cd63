#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skelrec/model.hpp"

using namespace skelrec;

namespace {

SequenceBatch random_batch(int steps, int b, int d, std::uint64_t seed, int valid_from_row0 = -1) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 0.5);
    SequenceBatch batch;
    for (int t = 0; t < steps; ++t) {
        Eigen::MatrixXd m(b, d);
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index i = 0; i < b; ++i) m(i, j) = n(rng);
        batch.x.push_back(std::move(m));
    }
    batch.mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(b, steps, true);
    if (valid_from_row0 >= 0)
        for (int t = valid_from_row0; t < steps; ++t) {
            batch.mask(0, t) = false;
            batch.x[t].row(0).setZero();
        }
    return batch;
}

double forward_loss(const Model& model, const SequenceBatch& batch, LossKind kind) {
    EncoderState es = encode(model.encoder, batch);
    auto recon = decode(model.decoder, es.e_t, batch.steps(), batch.dim());
    return batch_reconstruction_loss(batch.x, recon, batch.mask, kind);
}

// Central-difference check over every trainable parameter.
void gradcheck(Model& model, const SequenceBatch& batch, LossKind kind) {
    BackwardResult res = backward(model, batch, kind);
    CHECK(res.loss == doctest::Approx(forward_loss(model, batch, kind)).epsilon(1e-12));

    auto params = trainable_tensors(model);
    auto grads = grad_tensors(res.grads, model, /*trainable_only=*/true);
    REQUIRE(params.size() == grads.size());

    const double eps = 1e-6;
    int checked = 0;
    for (size_t t = 0; t < params.size(); ++t) {
        REQUIRE(params[t].size() == grads[t].size());
        for (Eigen::Index i = 0; i < params[t].size(); ++i) {
            double& slot = params[t].data[i];
            const double keep = slot;
            slot = keep + eps;
            const double up = forward_loss(model, batch, kind);
            slot = keep - eps;
            const double down = forward_loss(model, batch, kind);
            slot = keep;
            const double fd = (up - down) / (2 * eps);
            const double got = grads[t].data[i];
            const double tol = std::max(1e-4, 1e-5 * std::max(std::abs(fd), std::abs(got)));
            if (std::abs(got - fd) > tol) {
                CAPTURE(params[t].name);
                CAPTURE(i);
                CHECK(got == doctest::Approx(fd));
            }
            ++checked;
        }
    }
    CHECK(checked > 0);
}

}  // namespace

TEST_CASE("fixed-weights gradients match finite differences under MSE") {
    Model m = init_model(ModelDims{3, 3, 4}, DecoderStrategy::FixedWeights, 101);
    SequenceBatch batch = random_batch(5, 2, 4, 7);
    gradcheck(m, batch, LossKind::MSE);
}

TEST_CASE("fixed-weights gradients match finite differences under MAE") {
    Model m = init_model(ModelDims{2, 3, 4}, DecoderStrategy::FixedWeights, 102);
    SequenceBatch batch = random_batch(4, 2, 4, 8);
    gradcheck(m, batch, LossKind::MAE);
}

TEST_CASE("fixed-states gradients match finite differences under MSE") {
    Model m = init_model(ModelDims{3, 3, 4}, DecoderStrategy::FixedStates, 103);
    SequenceBatch batch = random_batch(5, 2, 4, 9);
    gradcheck(m, batch, LossKind::MSE);
}

TEST_CASE("fixed-states gradients match finite differences under MAE") {
    Model m = init_model(ModelDims{2, 3, 4}, DecoderStrategy::FixedStates, 104);
    SequenceBatch batch = random_batch(4, 2, 4, 10);
    gradcheck(m, batch, LossKind::MAE);
}

TEST_CASE("gradients respect padding masks") {
    Model m = init_model(ModelDims{2, 3, 4}, DecoderStrategy::FixedStates, 105);
    SequenceBatch batch = random_batch(6, 2, 4, 11, /*valid_from_row0=*/3);
    gradcheck(m, batch, LossKind::MSE);
}

TEST_CASE("a frozen decoder yields no decoder gradients") {
    Model m = init_model(ModelDims{2, 3, 4}, DecoderStrategy::FixedWeights, 106);
    SequenceBatch batch = random_batch(5, 2, 4, 12);
    BackwardResult res = backward(m, batch, LossKind::MSE);

    CHECK_FALSE(res.grads.decoder_present);
    CHECK(res.grads.w_y.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.grads.b_y.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.grads.decoder.w_r.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.grads.e_t.cwiseAbs().maxCoeff() > 0.0);  // still flows to the encoder
    double enc = 0.0;
    for (auto& layer : res.grads.encoder)
        for (auto& cell : layer) enc = std::max(enc, cell.w_h.cwiseAbs().maxCoeff());
    CHECK(enc > 0.0);

    Model fs = init_model(ModelDims{2, 3, 4}, DecoderStrategy::FixedStates, 106);
    BackwardResult rfs = backward(fs, batch, LossKind::MSE);
    CHECK(rfs.grads.decoder_present);
    CHECK(rfs.grads.w_y.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("exact reconstruction zeroes the fixed-states gradient") {
    // Train target = the decoder's own output, so loss and grads must vanish.
    Model m = init_model(ModelDims{2, 3, 4}, DecoderStrategy::FixedStates, 107);
    SequenceBatch batch = random_batch(5, 2, 4, 13);
    EncoderState es = encode(m.encoder, batch);
    batch.x = decode(m.decoder, es.e_t, 5, 4);

    // Encoding changed with the new inputs, so re-fix the targets once more.
    for (int fix = 0; fix < 50; ++fix) {
        es = encode(m.encoder, batch);
        auto out = decode(m.decoder, es.e_t, 5, 4);
        double shift = 0.0;
        for (int t = 0; t < 5; ++t) shift = std::max(shift, (out[t] - batch.x[t]).cwiseAbs().maxCoeff());
        batch.x = std::move(out);
        if (shift < 1e-14) break;
    }

    BackwardResult res = backward(m, batch, LossKind::MSE);
    CHECK(res.loss < 1e-20);
    auto grads = grad_tensors(res.grads, m, true);
    for (auto& g : grads)
        for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(std::abs(g.data[i]) < 1e-10);
}

TEST_CASE("backward throws on non-finite loss") {
    Model m = init_model(ModelDims{1, 2, 3}, DecoderStrategy::FixedWeights, 108);
    SequenceBatch batch = random_batch(3, 1, 3, 14);
    batch.x[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(backward(m, batch, LossKind::MSE), DivergenceError);
}

TEST_CASE("e_t gradient matches finite differences through the decoder alone") {
    Model m = init_model(ModelDims{2, 3, 4}, DecoderStrategy::FixedWeights, 109);
    SequenceBatch batch = random_batch(5, 2, 4, 15);
    BackwardResult res = backward(m, batch, LossKind::MSE);

    EncoderState es = encode(m.encoder, batch);
    auto loss_at = [&](const Eigen::MatrixXd& e) {
        auto recon = decode(m.decoder, e, 5, 4);
        return batch_reconstruction_loss(batch.x, recon, batch.mask, LossKind::MSE);
    };
    const double eps = 1e-6;
    for (Eigen::Index i = 0; i < es.e_t.rows(); ++i)
        for (Eigen::Index j = 0; j < es.e_t.cols(); ++j) {
            Eigen::MatrixXd up = es.e_t, down = es.e_t;
            up(i, j) += eps;
            down(i, j) -= eps;
            const double fd = (loss_at(up) - loss_at(down)) / (2 * eps);
            CHECK(res.grads.e_t(i, j) == doctest::Approx(fd).epsilon(1e-4));
        }
}
