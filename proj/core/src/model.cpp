#include "neid/model.hpp"

#include <algorithm>

namespace neid {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::unet_baseline: return "unet_baseline";
    case Variant::le_only: return "le_only";
    case Variant::le_dr: return "le_dr";
    case Variant::full: return "full";
  }
  throw InvalidCode("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "unet_baseline" || name == "unet") return Variant::unet_baseline;
  if (name == "le_only" || name == "le") return Variant::le_only;
  if (name == "le_dr") return Variant::le_dr;
  if (name == "full") return Variant::full;
  throw InvalidCode("unknown variant name: " + name);
}

void ArchConfig::validate() const {
  if (levels < 2) throw InvalidSize("ArchConfig: levels must be >= 2");
  if (base_channels < 4) throw InvalidSize("ArchConfig: base_channels must be >= 4");
  if (scale != 2) throw InvalidSize("ArchConfig: only scale 2 is supported");
}

std::string ArchConfig::canonical() const {
  return "levels=" + std::to_string(levels) +
         ";base=" + std::to_string(base_channels) +
         ";scale=" + std::to_string(scale) + ";variant=" + variant_name(variant);
}

std::uint64_t ArchConfig::fingerprint() const {
  // FNV-1a 64.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : canonical()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
Model<T>::Model(const ArchConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

template <typename T>
int Model<T>::proj_channels(int k) const {
  // Double per halving, capped at the bottleneck width.
  return std::min(cfg_.base_channels << (k + 1), cfg_.bottleneck_channels());
}

template <typename T>
auto Model<T>::param_schema() const -> std::vector<ParamSpec> {
  std::vector<ParamSpec> schema;
  auto conv = [&](const std::string& name, int c_out, int c_in) {
    schema.push_back({name + ".w", c_out, c_in, 3, 3, false});
    schema.push_back({name + ".b", c_out, 1, 1, 1, true});
  };
  auto tconv = [&](const std::string& name, int c_in, int c_out) {
    schema.push_back({name + ".w", c_in, c_out, 2, 2, false});
    schema.push_back({name + ".b", c_out, 1, 1, 1, true});
  };
  auto linear = [&](const std::string& name, int c_out, int c_in) {
    schema.push_back({name + ".w", c_out, c_in, 1, 1, false});
    schema.push_back({name + ".b", c_out, 1, 1, 1, true});
  };

  for (int i = 0; i < cfg_.levels; ++i) {
    const int ch = cfg_.channels(i);
    const int in_ch = i == 0 ? 3 : cfg_.channels(i - 1);
    const std::string base = "enc.l" + std::to_string(i);
    conv(base + ".conv1", ch, in_ch);
    conv(base + ".conv2", ch, ch);
  }

  auto decoder = [&](const std::string& prefix) {
    for (int i = cfg_.levels - 1; i >= 0; --i) {
      const int ch = cfg_.channels(i);
      const int up_in = i == cfg_.levels - 1 ? cfg_.bottleneck_channels()
                                             : cfg_.channels(i + 1);
      const std::string base = prefix + ".l" + std::to_string(i);
      tconv(base + ".up", up_in, ch);
      conv(base + ".conv1", ch, 2 * ch);
      conv(base + ".conv2", ch, ch);
    }
  };

  decoder("dec_le");
  const int head_out =
      cfg_.variant == Variant::unet_baseline ? 3 : 3 * cfg_.scale * cfg_.scale;
  conv("le.head", head_out, cfg_.base_channels);

  if (cfg_.has_dr()) {
    decoder("dec_dr");
    conv("dr.head", 3 * cfg_.scale * cfg_.scale, cfg_.base_channels);
  }

  if (cfg_.has_ff()) {
    const int c0 = cfg_.base_channels;
    linear("ff.fc1", 2 * c0, c0);
    linear("ff.fc2", cfg_.bottleneck_channels(), 2 * c0);
    for (int k = 0; k < cfg_.levels; ++k) {
      conv("ff.proj" + std::to_string(k), proj_channels(k),
           k == 0 ? c0 : proj_channels(k - 1));
    }
  }
  return schema;
}

template <typename T>
ParamMap<T> Model<T>::init_params(Rng& rng) const {
  ParamMap<T> params;
  for (const auto& spec : param_schema()) {
    Tensor<T> t(spec.n, spec.c, spec.h, spec.w);
    if (!spec.is_bias) {
      for (T& v : t.data) v = static_cast<T>(rng.normal(0.0, 0.02));
    }
    params.emplace(spec.name, std::move(t));
  }
  return params;
}

template <typename T>
const Tensor<T>& Model<T>::p(const ParamMap<T>& params, const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw KeyMismatch("missing parameter: " + name);
  return it->second;
}

template <typename T>
std::vector<T> Model<T>::bias_vec(const ParamMap<T>& params,
                                  const std::string& name) const {
  const Tensor<T>& t = p(params, name);
  return t.data;
}

template <typename T>
auto Model<T>::encode(const ParamMap<T>& params, const Tensor<T>& x) const
    -> EncodeResult {
  ForwardCache<T> cache;
  cache.input = x;
  if (x.c != 3) throw ShapeMismatch("encode: input must have 3 channels");
  if (x.h < cfg_.divisor() || x.w < cfg_.divisor() ||
      x.h % cfg_.divisor() != 0 || x.w % cfg_.divisor() != 0) {
    throw ShapeMismatch("encode: spatial dims must be positive multiples of " +
                        std::to_string(cfg_.divisor()));
  }
  cache.enc_in.resize(cfg_.levels);
  cache.enc_a1.resize(cfg_.levels);
  cache.enc_a2.resize(cfg_.levels);
  cache.pool_argmax.resize(cfg_.levels);
  cache.pooled.resize(cfg_.levels);
  const Tensor<T>* cur = &x;
  for (int i = 0; i < cfg_.levels; ++i) {
    const std::string base = "enc.l" + std::to_string(i);
    cache.enc_in[i] = *cur;
    cache.enc_a1[i] = nn::relu(nn::conv3x3_forward(
        cache.enc_in[i], p(params, base + ".conv1.w"), bias_vec(params, base + ".conv1.b")));
    cache.enc_a2[i] = nn::relu(nn::conv3x3_forward(
        cache.enc_a1[i], p(params, base + ".conv2.w"), bias_vec(params, base + ".conv2.b")));
    cache.pooled[i] = nn::maxpool2_forward(cache.enc_a2[i], cache.pool_argmax[i]);
    cur = &cache.pooled[i];
  }
  return {cache.enc_a2, cache.pooled.back()};
}

template <typename T>
void Model<T>::decode_branch(const ParamMap<T>& params, const std::string& prefix,
                             const Tensor<T>& entry,
                             const std::vector<Tensor<T>>& skips,
                             typename ForwardCache<T>::Branch& cache) const {
  cache.up_in.resize(cfg_.levels);
  cache.cat.resize(cfg_.levels);
  cache.a1.resize(cfg_.levels);
  cache.a2.resize(cfg_.levels);
  const Tensor<T>* cur = &entry;
  for (int i = cfg_.levels - 1; i >= 0; --i) {
    const std::string base = prefix + ".l" + std::to_string(i);
    cache.up_in[i] = *cur;
    Tensor<T> up = nn::tconv2x2_forward(cache.up_in[i], p(params, base + ".up.w"),
                                        bias_vec(params, base + ".up.b"));
    cache.cat[i] = nn::concat_channels(skips[i], up);
    cache.a1[i] = nn::relu(nn::conv3x3_forward(
        cache.cat[i], p(params, base + ".conv1.w"), bias_vec(params, base + ".conv1.b")));
    cache.a2[i] = nn::relu(nn::conv3x3_forward(
        cache.a1[i], p(params, base + ".conv2.w"), bias_vec(params, base + ".conv2.b")));
    cur = &cache.a2[i];
  }
}

template <typename T>
Tensor<T> Model<T>::ff_fuse(const ParamMap<T>& params, const Tensor<T>& bottleneck,
                            const Tensor<T>& dr_features) const {
  ForwardCache<T> scratch;
  scratch.ff_squeeze = nn::global_avg_pool(dr_features);
  scratch.ff_e1 = nn::relu(nn::linear_forward(
      scratch.ff_squeeze, p(params, "ff.fc1.w"), bias_vec(params, "ff.fc1.b")));
  scratch.ff_w = nn::sigmoid(nn::linear_forward(
      scratch.ff_e1, p(params, "ff.fc2.w"), bias_vec(params, "ff.fc2.b")));

  const Tensor<T>* cur = &dr_features;
  scratch.ff_proj_in.resize(cfg_.levels);
  scratch.ff_proj_out.resize(cfg_.levels);
  for (int k = 0; k < cfg_.levels; ++k) {
    const std::string base = "ff.proj" + std::to_string(k);
    scratch.ff_proj_in[k] = *cur;
    scratch.ff_proj_out[k] = nn::relu(nn::conv3x3_forward(
        scratch.ff_proj_in[k], p(params, base + ".w"), bias_vec(params, base + ".b"),
        /*stride=*/2));
    cur = &scratch.ff_proj_out[k];
  }
  return nn::channel_blend(scratch.ff_w, bottleneck, scratch.ff_proj_out.back());
}

template <typename T>
ModelOutputs<T> Model<T>::forward(const ParamMap<T>& params, const Tensor<T>& x,
                                  Mode mode, ForwardCache<T>* cache_out) const {
  ForwardCache<T> local;
  ForwardCache<T>& cache = cache_out ? *cache_out : local;
  cache = ForwardCache<T>{};
  cache.input = x;

  // --- shared encoder ---------------------------------------------------
  if (x.c != 3) throw ShapeMismatch("forward: input must have 3 channels");
  if (x.h < cfg_.divisor() || x.w < cfg_.divisor() ||
      x.h % cfg_.divisor() != 0 || x.w % cfg_.divisor() != 0) {
    throw ShapeMismatch("forward: spatial dims must be positive multiples of " +
                        std::to_string(cfg_.divisor()));
  }
  cache.enc_in.resize(cfg_.levels);
  cache.enc_a1.resize(cfg_.levels);
  cache.enc_a2.resize(cfg_.levels);
  cache.pool_argmax.resize(cfg_.levels);
  cache.pooled.resize(cfg_.levels);
  {
    const Tensor<T>* cur = &x;
    for (int i = 0; i < cfg_.levels; ++i) {
      const std::string base = "enc.l" + std::to_string(i);
      cache.enc_in[i] = *cur;
      cache.enc_a1[i] = nn::relu(nn::conv3x3_forward(
          cache.enc_in[i], p(params, base + ".conv1.w"), bias_vec(params, base + ".conv1.b")));
      cache.enc_a2[i] = nn::relu(nn::conv3x3_forward(
          cache.enc_a1[i], p(params, base + ".conv2.w"), bias_vec(params, base + ".conv2.b")));
      cache.pooled[i] = nn::maxpool2_forward(cache.enc_a2[i], cache.pool_argmax[i]);
      cur = &cache.pooled[i];
    }
  }
  const Tensor<T>& bottleneck = cache.pooled.back();

  ModelOutputs<T> out;

  // --- detail refinement branch ------------------------------------------
  const bool run_dr = cfg_.has_dr() && (mode == Mode::train || cfg_.has_ff());
  if (run_dr) {
    decode_branch(params, "dec_dr", bottleneck, cache.enc_a2, cache.dr);
    out.dr_features = cache.dr.a2[0];
    if (mode == Mode::train) {
      Tensor<T> logits = nn::conv3x3_forward(
          cache.dr.a2[0], p(params, "dr.head.w"), bias_vec(params, "dr.head.b"));
      out.dr_image = nn::sigmoid(nn::pixel_shuffle(logits, cfg_.scale));
    }
  }

  // --- feature fusing ------------------------------------------------------
  const Tensor<T>* le_entry = &bottleneck;
  if (cfg_.has_ff()) {
    cache.ff_squeeze = nn::global_avg_pool(cache.dr.a2[0]);
    cache.ff_e1 = nn::relu(nn::linear_forward(
        cache.ff_squeeze, p(params, "ff.fc1.w"), bias_vec(params, "ff.fc1.b")));
    cache.ff_w = nn::sigmoid(nn::linear_forward(
        cache.ff_e1, p(params, "ff.fc2.w"), bias_vec(params, "ff.fc2.b")));
    cache.ff_proj_in.resize(cfg_.levels);
    cache.ff_proj_out.resize(cfg_.levels);
    const Tensor<T>* cur = &cache.dr.a2[0];
    for (int k = 0; k < cfg_.levels; ++k) {
      const std::string base = "ff.proj" + std::to_string(k);
      cache.ff_proj_in[k] = *cur;
      cache.ff_proj_out[k] = nn::relu(nn::conv3x3_forward(
          cache.ff_proj_in[k], p(params, base + ".w"), bias_vec(params, base + ".b"),
          /*stride=*/2));
      cur = &cache.ff_proj_out[k];
    }
    cache.fused = nn::channel_blend(cache.ff_w, bottleneck, cache.ff_proj_out.back());
    le_entry = &cache.fused;
  }

  // --- light enhancement branch -------------------------------------------
  decode_branch(params, "dec_le", *le_entry, cache.enc_a2, cache.le);
  Tensor<T> logits = nn::conv3x3_forward(
      cache.le.a2[0], p(params, "le.head.w"), bias_vec(params, "le.head.b"));
  if (cfg_.variant == Variant::unet_baseline) {
    out.le_image = nn::sigmoid(nn::bicubic_up2_forward(logits));
  } else {
    out.le_image = nn::sigmoid(nn::pixel_shuffle(logits, cfg_.scale));
  }
  return out;
}

template <typename T>
Tensor<T> Model<T>::decode_branch_backward(
    const ParamMap<T>& params, const std::string& prefix,
    const typename ForwardCache<T>::Branch& cache, const Tensor<T>& grad_features,
    std::vector<Tensor<T>>& grad_skips, ParamMap<T>& grads) const {
  Tensor<T> g = grad_features;
  Tensor<T> entry_grad;
  for (int i = 0; i < cfg_.levels; ++i) {
    const std::string base = prefix + ".l" + std::to_string(i);
    // conv2
    g = nn::relu_backward(g, cache.a2[i]);
    Tensor<T> g_a1, gw;
    std::vector<T> gb;
    nn::conv3x3_backward(cache.a1[i], p(params, base + ".conv2.w"), g, 1, &g_a1,
                         &gw, &gb);
    grads[base + ".conv2.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads[base + ".conv2.b"].data[j] += gb[j];
    // conv1
    g_a1 = nn::relu_backward(g_a1, cache.a1[i]);
    Tensor<T> g_cat;
    nn::conv3x3_backward(cache.cat[i], p(params, base + ".conv1.w"), g_a1, 1,
                         &g_cat, &gw, &gb);
    grads[base + ".conv1.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads[base + ".conv1.b"].data[j] += gb[j];
    // concat split: skip channels first, then the upsampled map
    Tensor<T> g_skip, g_up;
    nn::split_channels(g_cat, cfg_.channels(i), g_skip, g_up);
    grad_skips[i].add_(g_skip);
    // transposed conv
    Tensor<T> g_in;
    nn::tconv2x2_backward(cache.up_in[i], p(params, base + ".up.w"), g_up, &g_in,
                          &gw, &gb);
    grads[base + ".up.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads[base + ".up.b"].data[j] += gb[j];
    if (i == cfg_.levels - 1) {
      entry_grad = std::move(g_in);
    } else {
      g = std::move(g_in);
    }
  }
  return entry_grad;
}

template <typename T>
ParamMap<T> Model<T>::backward(const ParamMap<T>& params,
                               const ForwardCache<T>& cache,
                               const ModelOutputs<T>& outputs,
                               const Tensor<T>& grad_le,
                               const Tensor<T>* grad_dr) const {
  ParamMap<T> grads;
  for (const auto& spec : param_schema()) {
    grads.emplace(spec.name, Tensor<T>(spec.n, spec.c, spec.h, spec.w));
  }

  std::vector<Tensor<T>> grad_skips;
  grad_skips.reserve(cfg_.levels);
  for (int i = 0; i < cfg_.levels; ++i) {
    grad_skips.push_back(Tensor<T>::zeros_like(cache.enc_a2[i]));
  }
  Tensor<T> grad_bottleneck = Tensor<T>::zeros_like(cache.pooled.back());

  // --- LE head -------------------------------------------------------------
  Tensor<T> g = nn::sigmoid_backward(grad_le, outputs.le_image);
  if (cfg_.variant == Variant::unet_baseline) {
    g = nn::bicubic_up2_backward(g);
  } else {
    g = nn::pixel_unshuffle(g, cfg_.scale);
  }
  {
    Tensor<T> g_feat, gw;
    std::vector<T> gb;
    nn::conv3x3_backward(cache.le.a2[0], p(params, "le.head.w"), g, 1, &g_feat,
                         &gw, &gb);
    grads["le.head.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads["le.head.b"].data[j] += gb[j];
    g = std::move(g_feat);
  }

  // --- LE decoder ------------------------------------------------------------
  Tensor<T> grad_le_entry =
      decode_branch_backward(params, "dec_le", cache.le, g, grad_skips, grads);

  Tensor<T> grad_dr_features;
  const bool dr_ran = !cache.dr.a2.empty();
  if (dr_ran) grad_dr_features = Tensor<T>::zeros_like(cache.dr.a2[0]);

  // --- feature fusing ---------------------------------------------------------
  if (cfg_.has_ff()) {
    Tensor<T> g_w, g_bn, g_proj;
    nn::channel_blend_backward(cache.ff_w, cache.pooled.back(),
                               cache.ff_proj_out.back(), grad_le_entry, g_w,
                               g_bn, g_proj);
    grad_bottleneck.add_(g_bn);
    // excitation
    g_w = nn::sigmoid_backward(g_w, cache.ff_w);
    Tensor<T> g_e1, gw;
    std::vector<T> gb;
    nn::linear_backward(cache.ff_e1, p(params, "ff.fc2.w"), g_w, &g_e1, &gw, &gb);
    grads["ff.fc2.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads["ff.fc2.b"].data[j] += gb[j];
    g_e1 = nn::relu_backward(g_e1, cache.ff_e1);
    Tensor<T> g_sq;
    nn::linear_backward(cache.ff_squeeze, p(params, "ff.fc1.w"), g_e1, &g_sq,
                        &gw, &gb);
    grads["ff.fc1.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads["ff.fc1.b"].data[j] += gb[j];
    grad_dr_features.add_(nn::global_avg_pool_backward(
        g_sq, cache.dr.a2[0].h, cache.dr.a2[0].w));
    // projection chain
    for (int k = cfg_.levels - 1; k >= 0; --k) {
      const std::string base = "ff.proj" + std::to_string(k);
      g_proj = nn::relu_backward(g_proj, cache.ff_proj_out[k]);
      Tensor<T> g_in;
      nn::conv3x3_backward(cache.ff_proj_in[k], p(params, base + ".w"), g_proj,
                           2, &g_in, &gw, &gb);
      grads[base + ".w"].add_(gw);
      for (std::size_t j = 0; j < gb.size(); ++j) grads[base + ".b"].data[j] += gb[j];
      g_proj = std::move(g_in);
    }
    grad_dr_features.add_(g_proj);
  } else {
    grad_bottleneck.add_(grad_le_entry);
  }

  // --- DR head -------------------------------------------------------------
  if (dr_ran && grad_dr != nullptr && outputs.dr_image.has_value()) {
    Tensor<T> gd = nn::sigmoid_backward(*grad_dr, *outputs.dr_image);
    gd = nn::pixel_unshuffle(gd, cfg_.scale);
    Tensor<T> g_feat, gw;
    std::vector<T> gb;
    nn::conv3x3_backward(cache.dr.a2[0], p(params, "dr.head.w"), gd, 1, &g_feat,
                         &gw, &gb);
    grads["dr.head.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads["dr.head.b"].data[j] += gb[j];
    grad_dr_features.add_(g_feat);
  }

  // --- DR decoder ------------------------------------------------------------
  if (dr_ran) {
    Tensor<T> grad_dr_entry = decode_branch_backward(
        params, "dec_dr", cache.dr, grad_dr_features, grad_skips, grads);
    grad_bottleneck.add_(grad_dr_entry);
  }

  // --- encoder ------------------------------------------------------------
  Tensor<T> grad_pooled = std::move(grad_bottleneck);
  for (int i = cfg_.levels - 1; i >= 0; --i) {
    const std::string base = "enc.l" + std::to_string(i);
    Tensor<T> g_a2 = nn::maxpool2_backward(grad_pooled, cache.pool_argmax[i],
                                           cache.enc_a2[i].h, cache.enc_a2[i].w);
    g_a2.add_(grad_skips[i]);
    g_a2 = nn::relu_backward(g_a2, cache.enc_a2[i]);
    Tensor<T> g_a1, gw;
    std::vector<T> gb;
    nn::conv3x3_backward(cache.enc_a1[i], p(params, base + ".conv2.w"), g_a2, 1,
                         &g_a1, &gw, &gb);
    grads[base + ".conv2.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads[base + ".conv2.b"].data[j] += gb[j];
    g_a1 = nn::relu_backward(g_a1, cache.enc_a1[i]);
    Tensor<T> g_prev;
    nn::conv3x3_backward(cache.enc_in[i], p(params, base + ".conv1.w"), g_a1, 1,
                         i > 0 ? &g_prev : nullptr, &gw, &gb);
    grads[base + ".conv1.w"].add_(gw);
    for (std::size_t j = 0; j < gb.size(); ++j) grads[base + ".conv1.b"].data[j] += gb[j];
    if (i > 0) grad_pooled = std::move(g_prev);
  }

  return grads;
}

template class Model<float>;
template class Model<double>;

}  // namespace neid
