#pragma once

#include <string>
#include <vector>

#include "skelrec/common.hpp"

namespace skelrec {

enum class LossKind { MSE, MAE };

std::string loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

// Mean over unmasked frames of the per-frame mean over coordinates of the
// squared (MSE) or absolute (MAE) error. Throws if every frame is masked.
double reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xhat,
                           const std::vector<bool>& mask, LossKind kind);

// Batched variant: mean over batch elements of the per-sequence loss above.
// When dout is non-null it receives d(loss)/d(xhat) per step, zero at masked
// frames.
double batch_reconstruction_loss(const std::vector<Eigen::MatrixXd>& x,
                                 const std::vector<Eigen::MatrixXd>& xhat,
                                 const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                                 LossKind kind, std::vector<Eigen::MatrixXd>* dout = nullptr);

}  // namespace skelrec
