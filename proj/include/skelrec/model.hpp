#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "skelrec/gru.hpp"
#include "skelrec/loss.hpp"

namespace skelrec {

enum class DecoderStrategy { FixedWeights, FixedStates };

std::string strategy_name(DecoderStrategy s);
DecoderStrategy strategy_from_name(const std::string& name);

struct ModelDims {
    int layers = 3;
    int hidden = 1024;
    int input = 75;  // joints * 3 after flattening
};

// Bi-directional stack: cells[layer][dir], dir 0 = forward, 1 = backward.
// Layer 0 consumes the input, layers above consume the 2H concat of both
// directions below.
struct EncoderParams {
    std::vector<std::array<GruCell, 2>> cells;

    int layers() const { return static_cast<int>(cells.size()); }
    int hidden() const { return cells.empty() ? 0 : cells[0][0].hidden_dim(); }
};

// Single weak decoder cell over the 2H encoding plus a linear readout back to
// input space. Under FixedWeights everything here is frozen after init; under
// FixedStates everything trains but the recurrent state is pinned to E_T.
struct DecoderParams {
    DecoderStrategy strategy = DecoderStrategy::FixedWeights;
    GruCell cell;            // hidden 2H, input D
    Eigen::MatrixXd w_y;     // D x 2H
    Eigen::VectorXd b_y;     // D

    bool trainable() const { return strategy == DecoderStrategy::FixedStates; }
};

struct Model {
    ModelDims dims;
    EncoderParams encoder;
    DecoderParams decoder;
    std::uint64_t seed = 0;
};

Model init_model(const ModelDims& dims, DecoderStrategy strategy, std::uint64_t seed);

// Time-major batch: x[t] is B x D, mask is B x T (true = real frame).
struct SequenceBatch {
    std::vector<Eigen::MatrixXd> x;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;

    int steps() const { return static_cast<int>(x.size()); }
    Eigen::Index batch() const { return x.empty() ? 0 : x[0].rows(); }
    Eigen::Index dim() const { return x.empty() ? 0 : x[0].cols(); }
};

struct EncoderState {
    Eigen::MatrixXd e_t;                     // B x 2H
    std::vector<Eigen::MatrixXd> trajectory; // per-step top-layer concat, optional
};

// Everything the backward pass needs to replay the encoder.
struct EncoderTrace {
    // gates[layer][dir][t], h[layer][dir][t]: state after consuming step t in
    // that direction's order. out[layer][t]: B x 2H concat fed upward.
    std::vector<std::array<std::vector<GruStepTrace>, 2>> gates;
    std::vector<std::array<std::vector<Eigen::MatrixXd>, 2>> h;
    std::vector<std::vector<Eigen::MatrixXd>> out;
};

EncoderState encode(const EncoderParams& enc, const SequenceBatch& batch,
                    bool record_trajectory = false, EncoderTrace* trace = nullptr);

struct DecoderTrace {
    std::vector<GruStepTrace> gates;
    std::vector<Eigen::MatrixXd> h;       // cell state per step, B x 2H
    std::vector<Eigen::MatrixXd> y_tanh;  // FixedStates only: tanh readout pre skip
    std::vector<Eigen::MatrixXd> out;     // reconstruction per step, B x D
    std::vector<Eigen::MatrixXd> state_in;  // recorded only when requested
    bool record_state_in = false;
};

// FixedWeights: h_0 = E_T, zero input each step, frozen linear readout.
std::vector<Eigen::MatrixXd> decode_fw(const DecoderParams& dec, const Eigen::MatrixXd& e_t,
                                       int steps, Eigen::Index input_dim,
                                       DecoderTrace* trace = nullptr);

// FixedStates: recurrent state pinned to E_T every step, tanh readout with a
// skip connection, previous output fed back as next input (x_1 = 0).
std::vector<Eigen::MatrixXd> decode_fs(const DecoderParams& dec, const Eigen::MatrixXd& e_t,
                                       int steps, Eigen::Index input_dim,
                                       DecoderTrace* trace = nullptr);

std::vector<Eigen::MatrixXd> decode(const DecoderParams& dec, const Eigen::MatrixXd& e_t,
                                    int steps, Eigen::Index input_dim,
                                    DecoderTrace* trace = nullptr);

struct ModelGrads {
    std::vector<std::array<GruCellGrads, 2>> encoder;
    GruCellGrads decoder;
    Eigen::MatrixXd w_y;
    Eigen::VectorXd b_y;
    Eigen::MatrixXd e_t;  // gradient reaching the encoding, B x 2H
    bool decoder_present = false;

    static ModelGrads zeros(const Model& model, Eigen::Index batch);
};

struct BackwardResult {
    double loss = 0.0;
    ModelGrads grads;
};

// Runs encode -> decode -> loss -> full BPTT. Throws DivergenceError when the
// loss goes non-finite.
BackwardResult backward(const Model& model, const SequenceBatch& batch, LossKind kind);

// Flat views over parameters and their gradients, in one fixed order so the
// optimizer and checkpoints agree.
struct TensorRef {
    std::string name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;

    Eigen::Index size() const { return rows * cols; }
};

std::vector<TensorRef> model_tensors(Model& model);
std::vector<TensorRef> trainable_tensors(Model& model);
std::vector<TensorRef> grad_tensors(ModelGrads& grads, const Model& model, bool trainable_only);

long long parameter_count(const Model& model);

}  // namespace skelrec
