#include "skelrec/gru.hpp"

namespace skelrec {

GruCell GruCell::zeros(int hidden, int input) {
    GruCell p;
    p.w_r = Eigen::MatrixXd::Zero(hidden, input);
    p.w_z = p.w_r;
    p.w_h = p.w_r;
    p.u_r = Eigen::MatrixXd::Zero(hidden, hidden);
    p.u_z = p.u_r;
    p.u_h = p.u_r;
    p.b_r = Eigen::VectorXd::Zero(hidden);
    p.b_z = p.b_r;
    p.b_h = p.b_r;
    return p;
}

GruCell GruCell::random(int hidden, int input, Rng& rng) {
    GruCell p = zeros(hidden, input);
    // One fan-in per cell, the hidden width, as is conventional for GRUs.
    for (auto* m : {&p.w_r, &p.w_z, &p.w_h, &p.u_r, &p.u_z, &p.u_h}) fill_uniform(*m, hidden, rng);
    for (auto* v : {&p.b_r, &p.b_z, &p.b_h}) fill_uniform(*v, hidden, rng);
    return p;
}

GruCellGrads GruCellGrads::zeros(int hidden, int input) {
    GruCellGrads g;
    g.w_r = Eigen::MatrixXd::Zero(hidden, input);
    g.w_z = g.w_r;
    g.w_h = g.w_r;
    g.u_r = Eigen::MatrixXd::Zero(hidden, hidden);
    g.u_z = g.u_r;
    g.u_h = g.u_r;
    g.b_r = Eigen::VectorXd::Zero(hidden);
    g.b_z = g.b_r;
    g.b_h = g.b_r;
    return g;
}

void GruCellGrads::add(const GruCellGrads& o) {
    w_r += o.w_r;
    w_z += o.w_z;
    w_h += o.w_h;
    u_r += o.u_r;
    u_z += o.u_z;
    u_h += o.u_h;
    b_r += o.b_r;
    b_z += o.b_z;
    b_h += o.b_h;
}

Eigen::MatrixXd gru_step(const GruCell& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& h,
                         GruStepTrace* trace) {
    if (x.cols() != p.input_dim() || h.cols() != p.hidden_dim() || x.rows() != h.rows())
        throw std::invalid_argument("gru_step: shape mismatch");

    Eigen::MatrixXd r =
        (((x * p.w_r.transpose() + h * p.u_r.transpose()).rowwise() + p.b_r.transpose()).array())
            .unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); })
            .matrix();
    Eigen::MatrixXd z =
        (((x * p.w_z.transpose() + h * p.u_z.transpose()).rowwise() + p.b_z.transpose()).array())
            .unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); })
            .matrix();
    Eigen::MatrixXd c =
        (((x * p.w_h.transpose() + (r.array() * h.array()).matrix() * p.u_h.transpose()).rowwise() +
          p.b_h.transpose())
             .array())
            .tanh()
            .matrix();
    Eigen::MatrixXd h_next =
        ((1.0 - z.array()) * h.array() + z.array() * c.array()).matrix();
    if (trace) {
        trace->r = std::move(r);
        trace->z = std::move(z);
        trace->c = std::move(c);
    }
    return h_next;
}

Eigen::VectorXd gru_step(const GruCell& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
    return gru_step(p, Eigen::MatrixXd(x.transpose()), Eigen::MatrixXd(h.transpose()))
        .row(0)
        .transpose();
}

void gru_step_backward(const GruCell& p, const GruStepTrace& t, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& h_prev, const Eigen::MatrixXd& dh_next,
                       GruCellGrads* grads, Eigen::MatrixXd* dx, Eigen::MatrixXd* dh_prev) {
    const auto& r = t.r.array();
    const auto& z = t.z.array();
    const auto& c = t.c.array();
    const auto g = dh_next.array();

    Eigen::MatrixXd da_z = (g * (c - h_prev.array()) * z * (1.0 - z)).matrix();
    Eigen::MatrixXd da_c = (g * z * (1.0 - c * c)).matrix();
    Eigen::MatrixXd drh = da_c * p.u_h;  // gradient at r .* h_prev
    Eigen::MatrixXd da_r = (drh.array() * h_prev.array() * r * (1.0 - r)).matrix();

    if (dh_prev) {
        dh_prev->noalias() = da_r * p.u_r;
        dh_prev->noalias() += da_z * p.u_z;
        *dh_prev += (g * (1.0 - z) + drh.array() * r).matrix();
    }
    if (dx) {
        dx->noalias() = da_r * p.w_r;
        dx->noalias() += da_z * p.w_z;
        dx->noalias() += da_c * p.w_h;
    }
    if (grads) {
        Eigen::MatrixXd rh = (r * h_prev.array()).matrix();
        grads->w_r.noalias() += da_r.transpose() * x;
        grads->w_z.noalias() += da_z.transpose() * x;
        grads->w_h.noalias() += da_c.transpose() * x;
        grads->u_r.noalias() += da_r.transpose() * h_prev;
        grads->u_z.noalias() += da_z.transpose() * h_prev;
        grads->u_h.noalias() += da_c.transpose() * rh;
        grads->b_r += da_r.colwise().sum().transpose();
        grads->b_z += da_z.colwise().sum().transpose();
        grads->b_h += da_c.colwise().sum().transpose();
    }
}

}  // namespace skelrec
