#include "skelrec/loss.hpp"

#include <cmath>

namespace skelrec {

namespace {

inline double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

std::string loss_name(LossKind kind) { return kind == LossKind::MSE ? "mse" : "mae"; }

LossKind loss_from_name(const std::string& name) {
    if (name == "mse") return LossKind::MSE;
    if (name == "mae") return LossKind::MAE;
    throw ParseError("unknown loss kind: " + name);
}

double reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xhat,
                           const std::vector<bool>& mask, LossKind kind) {
    if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
        throw std::invalid_argument("reconstruction_loss: shape mismatch");
    if (static_cast<Eigen::Index>(mask.size()) != x.rows())
        throw std::invalid_argument("reconstruction_loss: mask length mismatch");

    double total = 0.0;
    int frames = 0;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        if (!mask[t]) continue;
        Eigen::ArrayXd err = (xhat.row(t) - x.row(t)).array();
        total += (kind == LossKind::MSE ? err.square().mean() : err.abs().mean());
        ++frames;
    }
    if (frames == 0) throw std::invalid_argument("reconstruction_loss: all frames masked");
    return total / frames;
}

double batch_reconstruction_loss(const std::vector<Eigen::MatrixXd>& x,
                                 const std::vector<Eigen::MatrixXd>& xhat,
                                 const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                                 LossKind kind, std::vector<Eigen::MatrixXd>* dout) {
    const int steps = static_cast<int>(x.size());
    if (steps == 0 || xhat.size() != x.size())
        throw std::invalid_argument("batch_reconstruction_loss: shape mismatch");
    const Eigen::Index b = x[0].rows();
    const Eigen::Index d = x[0].cols();

    Eigen::VectorXd frames = Eigen::VectorXd::Zero(b);
    for (Eigen::Index i = 0; i < b; ++i)
        for (int t = 0; t < steps; ++t) frames[i] += mask(i, t) ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < b; ++i)
        if (frames[i] == 0.0)
            throw std::invalid_argument("batch_reconstruction_loss: all frames masked");

    if (dout) dout->assign(steps, Eigen::MatrixXd::Zero(b, d));
    double loss = 0.0;
    for (int t = 0; t < steps; ++t) {
        Eigen::MatrixXd err = xhat[t] - x[t];
        for (Eigen::Index i = 0; i < b; ++i) {
            if (!mask(i, t)) continue;
            const double w = 1.0 / (frames[i] * d * b);
            if (kind == LossKind::MSE) {
                loss += err.row(i).squaredNorm() * w;
                if (dout) (*dout)[t].row(i) = 2.0 * w * err.row(i);
            } else {
                loss += err.row(i).cwiseAbs().sum() * w;
                if (dout) (*dout)[t].row(i) = w * err.row(i).unaryExpr([](double v) { return sgn(v); });
            }
        }
    }
    return loss;
}

}  // namespace skelrec
