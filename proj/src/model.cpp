#include "skelrec/model.hpp"

#include <cmath>
#include <stdexcept>

#include "skelrec/common.hpp"

namespace skelrec {

std::string strategy_name(DecoderStrategy s) {
    return s == DecoderStrategy::FixedWeights ? "fixed_weights" : "fixed_states";
}

DecoderStrategy strategy_from_name(const std::string& name) {
    if (name == "fixed_weights" || name == "fw") return DecoderStrategy::FixedWeights;
    if (name == "fixed_states" || name == "fs") return DecoderStrategy::FixedStates;
    throw ParseError("unknown decoder strategy: " + name);
}

Model init_model(const ModelDims& dims, DecoderStrategy strategy, std::uint64_t seed) {
    if (dims.layers < 1 || dims.hidden < 1 || dims.input < 1)
        throw std::invalid_argument("init_model: dims must be positive");
    Model m;
    m.dims = dims;
    m.seed = seed;
    Rng rng(seed);
    m.encoder.cells.resize(dims.layers);
    for (int l = 0; l < dims.layers; ++l) {
        const int in = l == 0 ? dims.input : 2 * dims.hidden;
        for (int dir = 0; dir < 2; ++dir)
            m.encoder.cells[l][dir] = GruCell::random(dims.hidden, in, rng);
    }
    m.decoder.strategy = strategy;
    m.decoder.cell = GruCell::random(2 * dims.hidden, dims.input, rng);
    m.decoder.w_y.resize(dims.input, 2 * dims.hidden);
    fill_uniform(m.decoder.w_y, 2 * dims.hidden, rng);
    m.decoder.b_y.resize(dims.input);
    fill_uniform(m.decoder.b_y, 2 * dims.hidden, rng);
    return m;
}

EncoderState encode(const EncoderParams& enc, const SequenceBatch& batch,
                    bool record_trajectory, EncoderTrace* trace) {
    const int layers = enc.layers();
    if (layers == 0) throw std::invalid_argument("encode: empty encoder");
    const int steps = batch.steps();
    if (steps == 0) throw std::invalid_argument("encode: empty batch");
    const Eigen::Index b = batch.batch();
    if (batch.mask.rows() != b || batch.mask.cols() != steps)
        throw std::invalid_argument("encode: mask shape mismatch");
    const int h_dim = enc.hidden();

    if (trace) {
        trace->gates.assign(layers, {});
        trace->h.assign(layers, {});
        trace->out.assign(layers, {});
    }

    std::vector<Eigen::MatrixXd> input = batch.x;
    EncoderState state;
    for (int l = 0; l < layers; ++l) {
        if (input[0].cols() != enc.cells[l][0].input_dim())
            throw std::invalid_argument("encode: layer input width mismatch");
        std::array<std::vector<Eigen::MatrixXd>, 2> hs;
        std::array<std::vector<GruStepTrace>, 2> gs;
        for (int dir = 0; dir < 2; ++dir) {
            const GruCell& cell = enc.cells[l][dir];
            hs[dir].assign(steps, Eigen::MatrixXd());
            if (trace) gs[dir].assign(steps, GruStepTrace());
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(b, h_dim);
            for (int k = 0; k < steps; ++k) {
                const int t = dir == 0 ? k : steps - 1 - k;
                Eigen::MatrixXd h_new =
                    gru_step(cell, input[t], h, trace ? &gs[dir][t] : nullptr);
                // padded frames hold the state unchanged
                for (Eigen::Index i = 0; i < b; ++i)
                    if (!batch.mask(i, t)) h_new.row(i) = h.row(i);
                h = std::move(h_new);
                hs[dir][t] = h;
            }
        }
        std::vector<Eigen::MatrixXd> out(steps);
        for (int t = 0; t < steps; ++t) {
            out[t].resize(b, 2 * h_dim);
            out[t] << hs[0][t], hs[1][t];
        }
        if (l == layers - 1) {
            state.e_t.resize(b, 2 * h_dim);
            state.e_t << hs[0][steps - 1], hs[1][0];
            if (record_trajectory) state.trajectory = out;
        }
        if (trace) {
            trace->gates[l] = std::move(gs);
            trace->h[l] = std::move(hs);
            trace->out[l] = out;
        }
        input = std::move(out);
    }
    return state;
}

namespace {

void check_decoder_shapes(const DecoderParams& dec, const Eigen::MatrixXd& e_t,
                          Eigen::Index input_dim, const char* where) {
    if (e_t.cols() != dec.cell.hidden_dim())
        throw std::invalid_argument(std::string(where) + ": encoding width mismatch");
    if (input_dim != dec.cell.input_dim() || dec.w_y.rows() != input_dim ||
        dec.w_y.cols() != dec.cell.hidden_dim() || dec.b_y.size() != input_dim)
        throw std::invalid_argument(std::string(where) + ": output width mismatch");
}

}  // namespace

std::vector<Eigen::MatrixXd> decode_fw(const DecoderParams& dec, const Eigen::MatrixXd& e_t,
                                       int steps, Eigen::Index input_dim, DecoderTrace* trace) {
    if (dec.strategy != DecoderStrategy::FixedWeights)
        throw std::invalid_argument("decode_fw: decoder built for a different strategy");
    check_decoder_shapes(dec, e_t, input_dim, "decode_fw");
    const Eigen::Index b = e_t.rows();
    const Eigen::MatrixXd zero_in = Eigen::MatrixXd::Zero(b, input_dim);

    if (trace) {
        trace->gates.assign(steps, GruStepTrace());
        trace->h.assign(steps, Eigen::MatrixXd());
        trace->y_tanh.clear();
        if (trace->record_state_in) trace->state_in.assign(steps, Eigen::MatrixXd());
    }

    std::vector<Eigen::MatrixXd> out(steps);
    Eigen::MatrixXd h = e_t;
    for (int t = 0; t < steps; ++t) {
        if (trace && trace->record_state_in) trace->state_in[t] = h;
        h = gru_step(dec.cell, zero_in, h, trace ? &trace->gates[t] : nullptr);
        out[t] = (h * dec.w_y.transpose()).rowwise() + dec.b_y.transpose();
        if (trace) trace->h[t] = h;
    }
    if (trace) trace->out = out;
    return out;
}

std::vector<Eigen::MatrixXd> decode_fs(const DecoderParams& dec, const Eigen::MatrixXd& e_t,
                                       int steps, Eigen::Index input_dim, DecoderTrace* trace) {
    if (dec.strategy != DecoderStrategy::FixedStates)
        throw std::invalid_argument("decode_fs: decoder built for a different strategy");
    check_decoder_shapes(dec, e_t, input_dim, "decode_fs");
    const Eigen::Index b = e_t.rows();

    if (trace) {
        trace->gates.assign(steps, GruStepTrace());
        trace->h.assign(steps, Eigen::MatrixXd());
        trace->y_tanh.assign(steps, Eigen::MatrixXd());
        if (trace->record_state_in) trace->state_in.assign(steps, Eigen::MatrixXd());
    }

    std::vector<Eigen::MatrixXd> out(steps);
    Eigen::MatrixXd xhat = Eigen::MatrixXd::Zero(b, input_dim);
    for (int t = 0; t < steps; ++t) {
        if (trace && trace->record_state_in) trace->state_in[t] = e_t;
        Eigen::MatrixXd h = gru_step(dec.cell, xhat, e_t, trace ? &trace->gates[t] : nullptr);
        Eigen::MatrixXd y =
            ((h * dec.w_y.transpose()).rowwise() + dec.b_y.transpose()).array().tanh();
        out[t] = y + xhat;
        if (trace) {
            trace->h[t] = std::move(h);
            trace->y_tanh[t] = std::move(y);
        }
        xhat = out[t];
    }
    if (trace) trace->out = out;
    return out;
}

std::vector<Eigen::MatrixXd> decode(const DecoderParams& dec, const Eigen::MatrixXd& e_t,
                                    int steps, Eigen::Index input_dim, DecoderTrace* trace) {
    return dec.strategy == DecoderStrategy::FixedWeights
               ? decode_fw(dec, e_t, steps, input_dim, trace)
               : decode_fs(dec, e_t, steps, input_dim, trace);
}

ModelGrads ModelGrads::zeros(const Model& model, Eigen::Index batch) {
    ModelGrads g;
    const int h = model.dims.hidden;
    const int d = model.dims.input;
    g.encoder.resize(model.dims.layers);
    for (int l = 0; l < model.dims.layers; ++l)
        for (int dir = 0; dir < 2; ++dir)
            g.encoder[l][dir] = GruCellGrads::zeros(h, l == 0 ? d : 2 * h);
    g.decoder = GruCellGrads::zeros(2 * h, d);
    g.w_y = Eigen::MatrixXd::Zero(d, 2 * h);
    g.b_y = Eigen::VectorXd::Zero(d);
    g.e_t = Eigen::MatrixXd::Zero(batch, 2 * h);
    return g;
}

BackwardResult backward(const Model& model, const SequenceBatch& batch, LossKind kind) {
    const int steps = batch.steps();
    const Eigen::Index b = batch.batch();
    const Eigen::Index d = batch.dim();
    const int h_dim = model.encoder.hidden();
    const int layers = model.encoder.layers();

    EncoderTrace etr;
    EncoderState es = encode(model.encoder, batch, false, &etr);
    DecoderTrace dtr;
    std::vector<Eigen::MatrixXd> recon = decode(model.decoder, es.e_t, steps, d, &dtr);

    std::vector<Eigen::MatrixXd> dout;
    BackwardResult res;
    res.loss = batch_reconstruction_loss(batch.x, recon, batch.mask, kind, &dout);
    if (!std::isfinite(res.loss)) throw DivergenceError("non-finite loss");

    res.grads = ModelGrads::zeros(model, b);
    ModelGrads& g = res.grads;

    if (model.decoder.strategy == DecoderStrategy::FixedWeights) {
        // params are frozen; only the gradient reaching E_T matters
        Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(b, 2 * h_dim);
        const Eigen::MatrixXd zero_in = Eigen::MatrixXd::Zero(b, d);
        for (int t = steps - 1; t >= 0; --t) {
            dh.noalias() += dout[t] * model.decoder.w_y;
            const Eigen::MatrixXd& h_prev = t > 0 ? dtr.h[t - 1] : es.e_t;
            Eigen::MatrixXd dh_prev;
            gru_step_backward(model.decoder.cell, dtr.gates[t], zero_in, h_prev, dh, nullptr,
                              nullptr, &dh_prev);
            dh = std::move(dh_prev);
        }
        g.e_t = std::move(dh);
        g.decoder_present = false;
    } else {
        g.decoder_present = true;
        const Eigen::MatrixXd zero_in = Eigen::MatrixXd::Zero(b, d);
        Eigen::MatrixXd dxhat = Eigen::MatrixXd::Zero(b, d);
        for (int t = steps - 1; t >= 0; --t) {
            // the step output feeds both the loss and the next step's input
            Eigen::MatrixXd dyhat = dout[t] + dxhat;
            Eigen::MatrixXd dp = dyhat.array() * (1.0 - dtr.y_tanh[t].array().square());
            g.w_y.noalias() += dp.transpose() * dtr.h[t];
            g.b_y.noalias() += dp.colwise().sum().transpose();
            Eigen::MatrixXd dh = dp * model.decoder.w_y;
            const Eigen::MatrixXd& xhat_t = t > 0 ? dtr.out[t - 1] : zero_in;
            Eigen::MatrixXd dx_cell, dh_state;
            gru_step_backward(model.decoder.cell, dtr.gates[t], xhat_t, es.e_t, dh, &g.decoder,
                              &dx_cell, &dh_state);
            g.e_t.noalias() += dh_state;
            dxhat = dyhat + dx_cell;
        }
    }

    // encoder, top layer down; d_out carries dL/d(layer output) per step
    std::vector<Eigen::MatrixXd> d_out(steps, Eigen::MatrixXd::Zero(b, 2 * h_dim));
    const Eigen::MatrixXd zero_h = Eigen::MatrixXd::Zero(b, h_dim);
    for (int l = layers - 1; l >= 0; --l) {
        const bool top = l == layers - 1;
        const bool want_dx = l > 0;
        std::vector<Eigen::MatrixXd> d_in;
        if (want_dx)
            d_in.assign(steps, Eigen::MatrixXd::Zero(b, 2 * h_dim));
        const std::vector<Eigen::MatrixXd>& layer_in = l == 0 ? batch.x : etr.out[l - 1];
        for (int dir = 0; dir < 2; ++dir) {
            const GruCell& cell = model.encoder.cells[l][dir];
            const auto& gates = etr.gates[l][dir];
            const auto& hs = etr.h[l][dir];
            Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(b, h_dim);
            if (top) {
                if (dir == 0)
                    dh = g.e_t.leftCols(h_dim);
                else
                    dh = g.e_t.rightCols(h_dim);
            }
            for (int k = steps - 1; k >= 0; --k) {
                const int t = dir == 0 ? k : steps - 1 - k;
                if (dir == 0)
                    dh += d_out[t].leftCols(h_dim);
                else
                    dh += d_out[t].rightCols(h_dim);
                // held steps pass their gradient straight through the carry
                Eigen::MatrixXd dh_cell = dh;
                Eigen::MatrixXd dh_carry = Eigen::MatrixXd::Zero(b, h_dim);
                for (Eigen::Index i = 0; i < b; ++i) {
                    if (!batch.mask(i, t)) {
                        dh_carry.row(i) = dh.row(i);
                        dh_cell.row(i).setZero();
                    }
                }
                const Eigen::MatrixXd* h_prev;
                if (dir == 0)
                    h_prev = t > 0 ? &hs[t - 1] : &zero_h;
                else
                    h_prev = t < steps - 1 ? &hs[t + 1] : &zero_h;
                Eigen::MatrixXd dx, dh_prev;
                gru_step_backward(cell, gates[t], layer_in[t], *h_prev, dh_cell,
                                  &g.encoder[l][dir], want_dx ? &dx : nullptr, &dh_prev);
                dh = dh_prev + dh_carry;
                if (want_dx) d_in[t] += dx;
            }
        }
        if (want_dx) d_out = std::move(d_in);
    }
    return res;
}

namespace {

template <typename CellT>
void append_cell_tensors(std::vector<TensorRef>& v, const std::string& prefix, CellT& c) {
    auto add = [&](const char* n, auto& m) {
        v.push_back({prefix + "." + n, m.data(), m.rows(), m.cols()});
    };
    add("w_r", c.w_r);
    add("w_z", c.w_z);
    add("w_h", c.w_h);
    add("u_r", c.u_r);
    add("u_z", c.u_z);
    add("u_h", c.u_h);
    add("b_r", c.b_r);
    add("b_z", c.b_z);
    add("b_h", c.b_h);
}

std::string enc_prefix(int layer, int dir) {
    return "enc.l" + std::to_string(layer) + (dir == 0 ? ".fw" : ".bw");
}

}  // namespace

std::vector<TensorRef> model_tensors(Model& model) {
    std::vector<TensorRef> v;
    for (int l = 0; l < model.encoder.layers(); ++l)
        for (int dir = 0; dir < 2; ++dir)
            append_cell_tensors(v, enc_prefix(l, dir), model.encoder.cells[l][dir]);
    append_cell_tensors(v, "dec", model.decoder.cell);
    v.push_back({"dec.w_y", model.decoder.w_y.data(), model.decoder.w_y.rows(),
                 model.decoder.w_y.cols()});
    v.push_back({"dec.b_y", model.decoder.b_y.data(), model.decoder.b_y.size(), 1});
    return v;
}

std::vector<TensorRef> trainable_tensors(Model& model) {
    if (model.decoder.trainable()) return model_tensors(model);
    std::vector<TensorRef> v;
    for (int l = 0; l < model.encoder.layers(); ++l)
        for (int dir = 0; dir < 2; ++dir)
            append_cell_tensors(v, enc_prefix(l, dir), model.encoder.cells[l][dir]);
    return v;
}

std::vector<TensorRef> grad_tensors(ModelGrads& grads, const Model& model, bool trainable_only) {
    std::vector<TensorRef> v;
    for (int l = 0; l < static_cast<int>(grads.encoder.size()); ++l)
        for (int dir = 0; dir < 2; ++dir)
            append_cell_tensors(v, enc_prefix(l, dir), grads.encoder[l][dir]);
    if (!trainable_only || model.decoder.trainable()) {
        append_cell_tensors(v, "dec", grads.decoder);
        v.push_back({"dec.w_y", grads.w_y.data(), grads.w_y.rows(), grads.w_y.cols()});
        v.push_back({"dec.b_y", grads.b_y.data(), grads.b_y.size(), 1});
    }
    return v;
}

long long parameter_count(const Model& model) {
    auto cell = [](long long h, long long in) { return 3 * (h * in + h * h + h); };
    const long long h = model.dims.hidden;
    const long long d = model.dims.input;
    long long n = 0;
    for (int l = 0; l < model.dims.layers; ++l) n += 2 * cell(h, l == 0 ? d : 2 * h);
    n += cell(2 * h, d);
    n += d * 2 * h + d;
    return n;
}

}  // namespace skelrec
