#include "neid/losses.hpp"

#include <cmath>

#include "neid/image.hpp"

namespace neid {

template <typename T>
double huber_loss(const Tensor<T>& pred, const Tensor<T>& gt, double delta,
                  Tensor<T>* grad) {
  if (!pred.same_shape(gt)) throw ShapeMismatch("huber_loss: shape mismatch");
  if (delta <= 0.0) throw InvalidSize("huber_loss: delta must be positive");
  const double inv_m = 1.0 / static_cast<double>(pred.size());
  if (grad) *grad = Tensor<T>::zeros_like(pred);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double a = static_cast<double>(gt.data[i]) - pred.data[i];
    const double abs_a = std::abs(a);
    if (abs_a <= delta) {
      acc += 0.5 * a * a;
      if (grad) grad->data[i] = static_cast<T>(-a * inv_m);
    } else {
      acc += delta * abs_a - 0.5 * delta * delta;
      if (grad) grad->data[i] = static_cast<T>(-(a > 0 ? delta : -delta) * inv_m);
    }
  }
  return acc * inv_m;
}

template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& gt, Tensor<T>* grad) {
  if (!pred.same_shape(gt)) throw ShapeMismatch("mse_loss: shape mismatch");
  const double inv_m = 1.0 / static_cast<double>(pred.size());
  if (grad) *grad = Tensor<T>::zeros_like(pred);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - gt.data[i];
    acc += d * d;
    if (grad) grad->data[i] = static_cast<T>(2.0 * d * inv_m);
  }
  return acc * inv_m;
}

namespace {

/// Partial derivatives of the hexcone H and S channels w.r.t. (r, g, b).
/// Branch selection mirrors rgb_to_hsv_pixel. Pixels within kDegenerate of
/// the achromatic/black set get zero partials: the exact derivative explodes
/// as 1/delta there and carries no usable signal.
constexpr double kDegenerate = 1e-12;

void hsv_partials(double r, double g, double b, double dh[3], double ds[3]) {
  dh[0] = dh[1] = dh[2] = 0.0;
  ds[0] = ds[1] = ds[2] = 0.0;
  const double mx = std::max(r, std::max(g, b));
  const double mn = std::min(r, std::min(g, b));
  const double delta = mx - mn;
  const int max_c = (r >= g && r >= b) ? 0 : (g >= b ? 1 : 2);
  const int min_c = (r <= g && r <= b) ? 0 : (g <= b ? 1 : 2);

  if (mx > kDegenerate && delta > kDegenerate) {
    // S = 1 - mn / mx
    ds[max_c] += mn / (mx * mx);
    ds[min_c] -= 1.0 / mx;
  }

  if (delta > kDegenerate) {
    // H = (q + offset) / 6 with q = (x - y) / delta; the offset (and the
    // +6 wrap) is constant within a branch.
    int xc, yc;
    double q;
    if (max_c == 0) {
      xc = 1; yc = 2; q = (g - b) / delta;
    } else if (max_c == 1) {
      xc = 2; yc = 0; q = (b - r) / delta;
    } else {
      xc = 0; yc = 1; q = (r - g) / delta;
    }
    const double inv6d = 1.0 / (6.0 * delta);
    dh[xc] += inv6d;
    dh[yc] -= inv6d;
    dh[max_c] -= q * inv6d;
    dh[min_c] += q * inv6d;
  }
}

}  // namespace

template <typename T>
void color_loss(const Tensor<T>& pred, const Tensor<T>& gt, double& loss_h,
                double& loss_s, Tensor<T>* grad) {
  if (!pred.same_shape(gt)) throw ShapeMismatch("color_loss: shape mismatch");
  if (pred.c != 3) throw ShapeMismatch("color_loss: inputs must be RGB");
  constexpr double kNormEps = 1e-24;  // squared-norm guard for zero vectors

  const int n = pred.n;
  const std::int64_t pixels = pred.plane_size();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad) *grad = Tensor<T>::zeros_like(pred);

  std::vector<double> hp(pixels), sp(pixels), hg(pixels), sg(pixels);
  loss_h = 0.0;
  loss_s = 0.0;

  for (int ni = 0; ni < n; ++ni) {
    const T* pr = pred.plane(ni, 0);
    const T* pg = pred.plane(ni, 1);
    const T* pb = pred.plane(ni, 2);
    const T* tr = gt.plane(ni, 0);
    const T* tg = gt.plane(ni, 1);
    const T* tb = gt.plane(ni, 2);

    double dot_h = 0.0, np_h = 0.0, ng_h = 0.0;
    double dot_s = 0.0, np_s = 0.0, ng_s = 0.0;
    for (std::int64_t i = 0; i < pixels; ++i) {
      double h, s, v;
      rgb_to_hsv_pixel<double>(pr[i], pg[i], pb[i], h, s, v);
      hp[i] = h;
      sp[i] = s;
      rgb_to_hsv_pixel<double>(tr[i], tg[i], tb[i], h, s, v);
      hg[i] = h;
      sg[i] = s;
      dot_h += hp[i] * hg[i];
      np_h += hp[i] * hp[i];
      ng_h += hg[i] * hg[i];
      dot_s += sp[i] * sg[i];
      np_s += sp[i] * sp[i];
      ng_s += sg[i] * sg[i];
    }

    const bool h_ok = np_h > kNormEps && ng_h > kNormEps;
    const bool s_ok = np_s > kNormEps && ng_s > kNormEps;
    const double pn_h = h_ok ? std::sqrt(np_h) : 1.0;
    const double gn_h = h_ok ? std::sqrt(ng_h) : 1.0;
    const double pn_s = s_ok ? std::sqrt(np_s) : 1.0;
    const double gn_s = s_ok ? std::sqrt(ng_s) : 1.0;
    const double cos_h = h_ok ? dot_h / (pn_h * gn_h) : 1.0;
    const double cos_s = s_ok ? dot_s / (pn_s * gn_s) : 1.0;
    loss_h += (1.0 - cos_h) * inv_n;
    loss_s += (1.0 - cos_s) * inv_n;

    if (!grad) continue;

    // dL/dh_k = (1/n) * (dot * h_k / |p|^3 |g|  -  g_k / (|p| |g|))
    const double ch1 = h_ok ? inv_n / (pn_h * gn_h) : 0.0;
    const double ch2 = h_ok ? inv_n * dot_h / (np_h * pn_h * gn_h) : 0.0;
    const double cs1 = s_ok ? inv_n / (pn_s * gn_s) : 0.0;
    const double cs2 = s_ok ? inv_n * dot_s / (np_s * pn_s * gn_s) : 0.0;

    T* gr = grad->plane(ni, 0);
    T* gg = grad->plane(ni, 1);
    T* gb = grad->plane(ni, 2);
    for (std::int64_t i = 0; i < pixels; ++i) {
      const double dl_dh = ch2 * hp[i] - ch1 * hg[i];
      const double dl_ds = cs2 * sp[i] - cs1 * sg[i];
      if (dl_dh == 0.0 && dl_ds == 0.0) continue;
      double dh[3], ds[3];
      hsv_partials(pr[i], pg[i], pb[i], dh, ds);
      gr[i] += static_cast<T>(dl_dh * dh[0] + dl_ds * ds[0]);
      gg[i] += static_cast<T>(dl_dh * dh[1] + dl_ds * ds[1]);
      gb[i] += static_cast<T>(dl_dh * dh[2] + dl_ds * ds[2]);
    }
  }
}

template <typename T>
LossBreakdown total_loss(const ModelOutputs<T>& outputs,
                         const Tensor<T>& target_le, const Tensor<T>& target_dr,
                         const LossConfig& cfg, bool variant_has_dr,
                         Tensor<T>* grad_le, Tensor<T>* grad_dr) {
  cfg.validate();
  LossBreakdown bd;

  Tensor<T> color_grad;
  bd.huber = huber_loss(outputs.le_image, target_le, cfg.delta, grad_le);
  color_loss(outputs.le_image, target_le, bd.color_h, bd.color_s,
             grad_le ? &color_grad : nullptr);
  if (grad_le) {
    const T lc = static_cast<T>(cfg.lambda_color);
    for (std::size_t i = 0; i < grad_le->data.size(); ++i) {
      grad_le->data[i] += lc * color_grad.data[i];
    }
  }

  if (variant_has_dr && cfg.lambda_mse > 0.0) {
    if (!outputs.dr_image.has_value()) {
      throw MissingDrOutput("total_loss: DR image required by the MSE term");
    }
    bd.mse = mse_loss(*outputs.dr_image, target_dr, grad_dr);
    if (grad_dr) {
      const T lm = static_cast<T>(cfg.lambda_mse);
      for (T& v : grad_dr->data) v *= lm;
    }
  } else if (grad_dr && outputs.dr_image.has_value()) {
    *grad_dr = Tensor<T>::zeros_like(*outputs.dr_image);
  }

  bd.total = bd.huber + cfg.lambda_mse * bd.mse +
             cfg.lambda_color * (bd.color_h + bd.color_s);
  return bd;
}

#define NEID_INSTANTIATE_LOSSES(T)                                            \
  template double huber_loss<T>(const Tensor<T>&, const Tensor<T>&, double,   \
                                Tensor<T>*);                                  \
  template double mse_loss<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);\
  template void color_loss<T>(const Tensor<T>&, const Tensor<T>&, double&,    \
                              double&, Tensor<T>*);                           \
  template LossBreakdown total_loss<T>(const ModelOutputs<T>&, const Tensor<T>&, \
                                       const Tensor<T>&, const LossConfig&,   \
                                       bool, Tensor<T>*, Tensor<T>*);

NEID_INSTANTIATE_LOSSES(float)
NEID_INSTANTIATE_LOSSES(double)

#undef NEID_INSTANTIATE_LOSSES

}  // namespace neid
