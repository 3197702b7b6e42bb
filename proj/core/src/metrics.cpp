#include "neid/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace neid {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void check_same_shape(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch("metric inputs must have identical geometry");
  }
}

/// 1-D Gaussian, normalized to sum 1 over the 11-tap support. The separable
/// outer product equals the normalized 2-D window.
const std::vector<double>& gaussian_taps() {
  static const std::vector<double> taps = [] {
    std::vector<double> t(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += t[i];
    }
    for (double& v : t) v /= sum;
    return t;
  }();
  return taps;
}

/// Valid-window separable Gaussian filter of an H x W plane:
/// output is (H - 10) x (W - 10).
std::vector<double> gaussian_valid(const std::vector<double>& plane, int h, int w) {
  const auto& taps = gaussian_taps();
  const int mw = w - kWindow + 1;
  const int mh = h - kWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(h) * mw);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < mw; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * plane[y * w + x + k];
      horiz[static_cast<std::size_t>(y) * mw + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(mh) * mw);
  for (int y = 0; y < mh; ++y) {
    for (int x = 0; x < mw; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        acc += taps[k] * horiz[static_cast<std::size_t>(y + k) * mw + x];
      }
      out[static_cast<std::size_t>(y) * mw + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& pred, const Image& gt) {
  check_same_shape(pred, gt);
  double se = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - gt.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(pred.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& pred, const Image& gt) {
  check_same_shape(pred, gt);
  if (pred.height < kWindow || pred.width < kWindow) {
    throw TooSmall("ssim requires min(H, W) >= 11");
  }
  const int h = pred.height;
  const int w = pred.width;
  const double c1 = kK1 * kK1;  // L = 1
  const double c2 = kK2 * kK2;

  const std::size_t plane_size = static_cast<std::size_t>(h) * w;
  std::vector<double> x(plane_size), y(plane_size), xx(plane_size),
      yy(plane_size), xy(plane_size);

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        const std::size_t i = static_cast<std::size_t>(py) * w + px;
        const double a = pred.at(py, px, c);
        const double b = gt.at(py, px, c);
        x[i] = a;
        y[i] = b;
        xx[i] = a * a;
        yy[i] = b * b;
        xy[i] = a * b;
      }
    }
    const auto mu_x = gaussian_valid(x, h, w);
    const auto mu_y = gaussian_valid(y, h, w);
    const auto m_xx = gaussian_valid(xx, h, w);
    const auto m_yy = gaussian_valid(yy, h, w);
    const auto m_xy = gaussian_valid(xy, h, w);

    double acc = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
      const double mx = mu_x[i];
      const double my = mu_y[i];
      const double var_x = m_xx[i] - mx * mx;
      const double var_y = m_yy[i] - my * my;
      const double cov = m_xy[i] - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
      const double den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
      acc += num / den;
    }
    total += acc / static_cast<double>(mu_x.size());
  }
  return total / 3.0;
}

void MetricsReport::compute_means() {
  double ps = 0.0;
  double ss = 0.0;
  for (const auto& e : per_image) {
    ps += e.psnr;
    ss += e.ssim;
  }
  const double n = per_image.empty() ? 1.0 : static_cast<double>(per_image.size());
  mean_psnr = ps / n;
  mean_ssim = ss / n;
}

namespace {

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double parse_number_or_inf(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IoError("unexpected metric value: " + s);
  }
  return j.get<double>();
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["per_image"] = nlohmann::json::array();
  for (const auto& e : per_image) {
    j["per_image"].push_back({{"id", e.id},
                              {"psnr", number_or_inf(e.psnr)},
                              {"ssim", number_or_inf(e.ssim)}});
  }
  j["mean_psnr"] = number_or_inf(mean_psnr);
  j["mean_ssim"] = number_or_inf(mean_ssim);
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport report;
  for (const auto& e : j.at("per_image")) {
    report.per_image.push_back({e.at("id").get<std::string>(),
                                parse_number_or_inf(e.at("psnr")),
                                parse_number_or_inf(e.at("ssim"))});
  }
  report.mean_psnr = parse_number_or_inf(j.at("mean_psnr"));
  report.mean_ssim = parse_number_or_inf(j.at("mean_ssim"));
  return report;
}

void MetricsReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json() << '\n';
}

MetricsReport MetricsReport::read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot read " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

void MetricsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,psnr,ssim\n";
  for (const auto& e : per_image) {
    out << e.id << ',' << e.psnr << ',' << e.ssim << '\n';
  }
}

}  // namespace neid
