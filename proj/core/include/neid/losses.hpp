#pragma once

#include "neid/model.hpp"
#include "neid/tensor.hpp"

namespace neid {

struct LossConfig {
  double delta = 1.0;        // Huber threshold
  double lambda_mse = 0.1;   // weight of the DR reconstruction term
  double lambda_color = 0.1; // weight of the hue/saturation term

  void validate() const {
    if (delta <= 0.0) throw InvalidSize("LossConfig: delta must be positive");
    if (lambda_mse < 0.0 || lambda_color < 0.0) {
      throw InvalidSize("LossConfig: weights must be nonnegative");
    }
  }
};

struct LossBreakdown {
  double huber = 0.0;
  double mse = 0.0;
  double color_h = 0.0;
  double color_s = 0.0;
  double total = 0.0;
};

/// Piecewise robust loss, mean over all elements: for a = gt - pred,
/// 0.5 a^2 when |a| <= delta, else delta |a| - 0.5 delta^2.
/// When grad is non-null it receives dL/dpred.
template <typename T>
double huber_loss(const Tensor<T>& pred, const Tensor<T>& gt, double delta,
                  Tensor<T>* grad = nullptr);

template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                Tensor<T>* grad = nullptr);

/// Cosine distance of the flattened Hue and Saturation channels in HSV
/// space, averaged over the batch: 1 - cos(H_p, H_gt) and 1 - cos(S_p, S_gt).
/// Zero-norm vectors count as cosine 1 (zero loss, zero gradient). When grad
/// is non-null it receives dL/dpred for the combined H + S terms.
template <typename T>
void color_loss(const Tensor<T>& pred, const Tensor<T>& gt, double& loss_h,
                double& loss_s, Tensor<T>* grad = nullptr);

/// Huber on (le_image, target_le), MSE on (dr_image, target_dr), color on
/// (le_image, target_le); total = huber + lambda_mse * mse +
/// lambda_color * (color_h + color_s). Variants without a DR branch pass
/// variant_has_dr = false and get mse = 0. Throws MissingDrOutput when the
/// MSE term is active but the DR image is absent.
template <typename T>
LossBreakdown total_loss(const ModelOutputs<T>& outputs,
                         const Tensor<T>& target_le, const Tensor<T>& target_dr,
                         const LossConfig& cfg, bool variant_has_dr,
                         Tensor<T>* grad_le = nullptr,
                         Tensor<T>* grad_dr = nullptr);

}  // namespace neid
