#pragma once

#include "skelrec/common.hpp"

namespace skelrec {

// Standard GRU cell. Gate convention used throughout:
//   r = sigmoid(W_r x + U_r h + b_r)
//   z = sigmoid(W_z x + U_z h + b_z)
//   c = tanh(W_h x + U_h (r .* h) + b_h)
//   h' = (1 - z) .* h + z .* c
struct GruCell {
    Eigen::MatrixXd w_r, w_z, w_h;  // H x D
    Eigen::MatrixXd u_r, u_z, u_h;  // H x H
    Eigen::VectorXd b_r, b_z, b_h;  // H

    int hidden_dim() const { return static_cast<int>(w_r.rows()); }
    int input_dim() const { return static_cast<int>(w_r.cols()); }

    static GruCell zeros(int hidden, int input);
    static GruCell random(int hidden, int input, Rng& rng);
};

struct GruCellGrads {
    Eigen::MatrixXd w_r, w_z, w_h;
    Eigen::MatrixXd u_r, u_z, u_h;
    Eigen::VectorXd b_r, b_z, b_h;

    static GruCellGrads zeros(int hidden, int input);
    void add(const GruCellGrads& other);
};

// Gate activations of one step for the whole batch (rows = batch elements).
struct GruStepTrace {
    Eigen::MatrixXd r, z, c;  // B x H
};

// Batched step: x is B x D, h is B x H; returns the new B x H state.
// |h'| <= max(|h|, 1) elementwise since h' is a convex mix of h and tanh.
Eigen::MatrixXd gru_step(const GruCell& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& h,
                         GruStepTrace* trace = nullptr);

// Single-vector convenience overload.
Eigen::VectorXd gru_step(const GruCell& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h);

// Reverse-mode step. dh_next is the loss gradient at the produced state; the
// gradients w.r.t. the inputs are written to dx / dh_prev when non-null, and
// parameter gradients accumulate into *grads when non-null (rows of dh_next
// that are zero contribute nothing, which is how masked elements are skipped).
void gru_step_backward(const GruCell& p, const GruStepTrace& trace, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& dh_next,
                       GruCellGrads* grads, Eigen::MatrixXd* dx, Eigen::MatrixXd* dh_prev);

}  // namespace skelrec
