#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specreg/cube.hpp"
#include "specreg/error.hpp"
#include "specreg/io.hpp"
#include "specreg/rng.hpp"

namespace specreg::nn {

// Residual encoder + MLP coefficient head:
//
//   input (in_planes x H x W)
//   stem:     conv3x3(in -> C) + ReLU
//   stage s:  avgpool2x2 -> p;  out = ReLU(p + conv3x3(ReLU(conv3x3(p))))
//   pool:     global average -> f (C)
//   head:     fc1(C -> hidden) + ReLU -> fc2(hidden -> out_dim)
//
// Every convolution is 3x3, stride 1, zero padding 1, with bias.
struct EncoderConfig {
  std::size_t in_planes = 1;
  std::size_t stem_channels = 16;
  std::size_t num_stages = 3;
  std::size_t head_hidden = 128;
  std::size_t out_dim = 1;

  std::size_t spatial_divisor() const noexcept { return std::size_t{1} << num_stages; }

  void validate() const {
    require(in_planes >= 1 && stem_channels >= 1 && head_hidden >= 1 && out_dim >= 1,
            "encoder sizes must be >= 1");
    require(num_stages >= 1 && num_stages <= 16, "encoder num_stages must be in [1, 16]");
  }

  bool operator==(const EncoderConfig&) const = default;
};

// Configuration for a pretext encoder on B-band cubes: B-1 planes in,
// B-1 coefficients out.
inline EncoderConfig pretext_config(std::size_t bands, std::size_t stem_channels = 16,
                                    std::size_t num_stages = 3, std::size_t head_hidden = 128) {
  require(bands >= 2, "pretext encoder needs bands >= 2");
  return EncoderConfig{bands - 1, stem_channels, num_stages, head_hidden, bands - 1};
}

struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const noexcept { return value.size(); }
};

// Dense C x H x W activation.
struct Planes {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> v;

  Planes() = default;
  Planes(std::size_t c_, std::size_t h_, std::size_t w_) : c(c_), h(h_), w(w_), v(c_ * h_ * w_, 0.0) {}

  double* plane(std::size_t i) noexcept { return v.data() + i * h * w; }
  const double* plane(std::size_t i) const noexcept { return v.data() + i * h * w; }
};

namespace detail {

// out[o] = bias[o] + sum_i W[o, i] * in[i]  (3x3 correlation, zero padding).
inline Planes conv3x3_forward(const Planes& in, std::span<const double> weight,
                              std::span<const double> bias, std::size_t out_c) {
  Planes out(out_c, in.h, in.w);
  const std::size_t hw = in.h * in.w;
  for (std::size_t o = 0; o < out_c; ++o) {
    double* dst = out.plane(o);
    std::fill(dst, dst + hw, bias[o]);
    for (std::size_t i = 0; i < in.c; ++i) {
      const double* src = in.plane(i);
      const double* k = weight.data() + (o * in.c + i) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::size_t y_lo = ky == 0 ? 1 : 0;
        const std::size_t y_hi = ky == 2 ? in.h - 1 : in.h;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double wk = k[ky * 3 + kx];
          const std::size_t x_lo = kx == 0 ? 1 : 0;
          const std::size_t x_hi = kx == 2 ? in.w - 1 : in.w;
          for (std::size_t y = y_lo; y < y_hi; ++y) {
            const double* row = src + (y + ky - 1) * in.w;
            double* out_row = dst + y * in.w;
            for (std::size_t x = x_lo; x < x_hi; ++x) out_row[x] += wk * row[x + kx - 1];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates dW and db; writes d(input) into grad_in when given.
inline void conv3x3_backward(const Planes& in, const Planes& grad_out, std::span<const double> weight,
                             std::span<double> grad_weight, std::span<double> grad_bias,
                             Planes* grad_in) {
  const std::size_t hw = in.h * in.w;
  if (grad_in) *grad_in = Planes(in.c, in.h, in.w);
  for (std::size_t o = 0; o < grad_out.c; ++o) {
    const double* g = grad_out.plane(o);
    double gb = 0.0;
    for (std::size_t p = 0; p < hw; ++p) gb += g[p];
    grad_bias[o] += gb;
    for (std::size_t i = 0; i < in.c; ++i) {
      const double* src = in.plane(i);
      const std::size_t kbase = (o * in.c + i) * 9;
      double* gsrc = grad_in ? grad_in->plane(i) : nullptr;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::size_t y_lo = ky == 0 ? 1 : 0;
        const std::size_t y_hi = ky == 2 ? in.h - 1 : in.h;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t x_lo = kx == 0 ? 1 : 0;
          const std::size_t x_hi = kx == 2 ? in.w - 1 : in.w;
          const double wk = weight[kbase + ky * 3 + kx];
          double acc = 0.0;
          for (std::size_t y = y_lo; y < y_hi; ++y) {
            const std::size_t off = (y + ky - 1) * in.w;
            const double* row = src + off;
            const double* grow = g + y * in.w;
            for (std::size_t x = x_lo; x < x_hi; ++x) acc += grow[x] * row[x + kx - 1];
            if (gsrc) {
              double* gin_row = gsrc + off;
              for (std::size_t x = x_lo; x < x_hi; ++x) gin_row[x + kx - 1] += wk * grow[x];
            }
          }
          grad_weight[kbase + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

inline Planes relu(const Planes& x) {
  Planes y = x;
  for (double& v : y.v) v = v > 0.0 ? v : 0.0;
  return y;
}

// grad *= (pre > 0)
inline void relu_backward(const Planes& pre, Planes& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i) {
    if (!(pre.v[i] > 0.0)) grad.v[i] = 0.0;
  }
}

inline Planes avgpool2(const Planes& x) {
  Planes y(x.c, x.h / 2, x.w / 2);
  for (std::size_t c = 0; c < x.c; ++c) {
    const double* src = x.plane(c);
    double* dst = y.plane(c);
    for (std::size_t yy = 0; yy < y.h; ++yy) {
      for (std::size_t xx = 0; xx < y.w; ++xx) {
        const double* p = src + 2 * yy * x.w + 2 * xx;
        dst[yy * y.w + xx] = 0.25 * (p[0] + p[1] + p[x.w] + p[x.w + 1]);
      }
    }
  }
  return y;
}

inline Planes avgpool2_backward(const Planes& grad, std::size_t h, std::size_t w) {
  Planes g(grad.c, h, w);
  for (std::size_t c = 0; c < grad.c; ++c) {
    const double* src = grad.plane(c);
    double* dst = g.plane(c);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) dst[y * w + x] = 0.25 * src[(y / 2) * grad.w + x / 2];
    }
  }
  return g;
}

}  // namespace detail

class Encoder {
 public:
  // All parameters zero.
  static Encoder zeros(const EncoderConfig& config) { return Encoder(config); }

  // Fan-in scaled uniform weights (He bound sqrt(6 / fan_in) before ReLUs,
  // 1 / sqrt(fan_in) for the output layer), zero biases. Each tensor draws
  // from its own stream derived from `seed`.
  static Encoder initialize(const EncoderConfig& config, std::uint64_t seed) {
    Encoder enc(config);
    for (std::size_t k = 0; k < enc.params_.size(); ++k) {
      auto& p = enc.params_[k];
      if (p.shape.size() < 2) continue;
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < p.shape.size(); ++d) fan_in *= p.shape[d];
      const bool output_layer = p.name == "head.fc2.weight";
      const double bound = output_layer ? 1.0 / std::sqrt(static_cast<double>(fan_in))
                                        : std::sqrt(6.0 / static_cast<double>(fan_in));
      Rng rng(derive_seed(seed, {k}));
      for (double& v : p.value) v = rng.uniform(-bound, bound);
    }
    return enc;
  }

  const EncoderConfig& config() const noexcept { return config_; }
  std::span<Parameter> parameters() noexcept { return params_; }
  std::span<const Parameter> parameters() const noexcept { return params_; }

  Parameter& parameter(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return p;
    }
    fail(ErrorKind::Validation, "no parameter named '" + std::string(name) + "'");
  }
  const Parameter& parameter(std::string_view name) const {
    return const_cast<Encoder*>(this)->parameter(name);
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  // Predicts the coefficient vector and caches activations for backward().
  std::vector<double> forward(const BandStack& input) {
    Activations act;
    auto out = run(input, act);
    cache_ = std::move(act);
    return out;
  }

  // Globally pooled features (the input of the head); no caching.
  std::vector<double> features(const BandStack& input) const {
    Activations act;
    run(input, act);
    return act.pooled;
  }

  // Back-propagates d(loss)/d(output) from the most recent forward() and
  // ADDS the result to every parameter's grad buffer. Call zero_grad() to
  // start a fresh accumulation.
  void backward(std::span<const double> grad_output) {
    if (!cache_) fail(ErrorKind::State, "backward() called before forward()");
    require(grad_output.size() == config_.out_dim, "upstream gradient length must equal out_dim");
    const auto& a = *cache_;
    const std::size_t C = config_.stem_channels;
    const std::size_t H = config_.head_hidden;
    const std::size_t S = config_.num_stages;

    // Head.
    auto& w2 = param(head_index() + 2);
    auto& b2 = param(head_index() + 3);
    auto& w1 = param(head_index());
    auto& b1 = param(head_index() + 1);
    std::vector<double> gz(H, 0.0);
    for (std::size_t o = 0; o < config_.out_dim; ++o) {
      const double g = grad_output[o];
      b2.grad[o] += g;
      for (std::size_t j = 0; j < H; ++j) {
        w2.grad[o * H + j] += g * a.hidden[j];
        gz[j] += w2.value[o * H + j] * g;
      }
    }
    std::vector<double> gf(C, 0.0);
    for (std::size_t j = 0; j < H; ++j) {
      if (!(a.hidden_pre[j] > 0.0)) continue;
      b1.grad[j] += gz[j];
      for (std::size_t c = 0; c < C; ++c) {
        w1.grad[j * C + c] += gz[j] * a.pooled[c];
        gf[c] += w1.value[j * C + c] * gz[j];
      }
    }

    // Global average pool.
    const Planes& last = a.stages.back().out;
    Planes g(last.c, last.h, last.w);
    const double inv = 1.0 / static_cast<double>(last.h * last.w);
    for (std::size_t c = 0; c < C; ++c) {
      double* gp = g.plane(c);
      std::fill(gp, gp + last.h * last.w, gf[c] * inv);
    }

    // Residual stages, last to first.
    for (std::size_t s = S; s-- > 0;) {
      const auto& st = a.stages[s];
      auto& cw1 = param(stage_index(s));
      auto& cb1 = param(stage_index(s) + 1);
      auto& cw2 = param(stage_index(s) + 2);
      auto& cb2 = param(stage_index(s) + 3);
      detail::relu_backward(st.sum, g);
      Planes g_r1;
      detail::conv3x3_backward(st.r1, g, cw2.value, cw2.grad, cb2.grad, &g_r1);
      detail::relu_backward(st.a1, g_r1);
      Planes g_p;
      detail::conv3x3_backward(st.pooled, g_r1, cw1.value, cw1.grad, cb1.grad, &g_p);
      for (std::size_t i = 0; i < g_p.v.size(); ++i) g_p.v[i] += g.v[i];
      const Planes& stage_in = s == 0 ? a.stem_out : a.stages[s - 1].out;
      g = detail::avgpool2_backward(g_p, stage_in.h, stage_in.w);
    }

    // Stem.
    detail::relu_backward(a.stem_pre, g);
    detail::conv3x3_backward(a.input, g, param(0).value, param(0).grad, param(1).grad, nullptr);
  }

  void zero_grad() noexcept {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }

  bool has_cache() const noexcept { return cache_.has_value(); }

  // Sign pattern of every ReLU input in the last forward pass. Two inputs
  // with the same pattern lie on the same linear piece of the network.
  std::vector<std::uint8_t> activation_pattern() const {
    if (!cache_) fail(ErrorKind::State, "activation_pattern() called before forward()");
    std::vector<std::uint8_t> pattern;
    auto add = [&](const std::vector<double>& v) {
      for (double x : v) pattern.push_back(x > 0.0 ? 1 : 0);
    };
    add(cache_->stem_pre.v);
    for (const auto& st : cache_->stages) {
      add(st.a1.v);
      add(st.sum.v);
    }
    add(cache_->hidden_pre);
    return pattern;
  }

 private:
  struct StageActivations {
    Planes pooled, a1, r1, sum, out;
  };
  struct Activations {
    Planes input, stem_pre, stem_out;
    std::vector<StageActivations> stages;
    std::vector<double> pooled, hidden_pre, hidden;
  };

  explicit Encoder(const EncoderConfig& config) : config_(config) {
    config_.validate();
    const std::size_t C = config_.stem_channels;
    add("stem.weight", {C, config_.in_planes, 3, 3});
    add("stem.bias", {C});
    for (std::size_t s = 0; s < config_.num_stages; ++s) {
      const std::string prefix = "stage" + std::to_string(s);
      add(prefix + ".conv1.weight", {C, C, 3, 3});
      add(prefix + ".conv1.bias", {C});
      add(prefix + ".conv2.weight", {C, C, 3, 3});
      add(prefix + ".conv2.bias", {C});
    }
    add("head.fc1.weight", {config_.head_hidden, C});
    add("head.fc1.bias", {config_.head_hidden});
    add("head.fc2.weight", {config_.out_dim, config_.head_hidden});
    add("head.fc2.bias", {config_.out_dim});
  }

  void add(std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    params_.push_back(Parameter{std::move(name), std::move(shape), std::vector<double>(n, 0.0),
                                std::vector<double>(n, 0.0)});
  }

  Parameter& param(std::size_t i) noexcept { return params_[i]; }
  const Parameter& param(std::size_t i) const noexcept { return params_[i]; }
  std::size_t stage_index(std::size_t s) const noexcept { return 2 + 4 * s; }
  std::size_t head_index() const noexcept { return 2 + 4 * config_.num_stages; }

  std::vector<double> run(const BandStack& input, Activations& a) const {
    if (input.bands() != config_.in_planes) {
      fail(ErrorKind::Validation, "encoder expects " + std::to_string(config_.in_planes) +
                                      " input planes, got " + std::to_string(input.bands()));
    }
    const std::size_t div = config_.spatial_divisor();
    if (input.height() % div != 0 || input.width() % div != 0) {
      fail(ErrorKind::Validation, "input height and width must be divisible by " +
                                      std::to_string(div) + ", got " +
                                      std::to_string(input.height()) + "x" +
                                      std::to_string(input.width()));
    }
    const std::size_t C = config_.stem_channels;
    a.input = Planes(input.bands(), input.height(), input.width());
    std::copy(input.data().begin(), input.data().end(), a.input.v.begin());
    a.stem_pre = detail::conv3x3_forward(a.input, param(0).value, param(1).value, C);
    a.stem_out = detail::relu(a.stem_pre);

    a.stages.clear();
    const Planes* x = &a.stem_out;
    for (std::size_t s = 0; s < config_.num_stages; ++s) {
      StageActivations st;
      st.pooled = detail::avgpool2(*x);
      st.a1 = detail::conv3x3_forward(st.pooled, param(stage_index(s)).value,
                                      param(stage_index(s) + 1).value, C);
      st.r1 = detail::relu(st.a1);
      st.sum = detail::conv3x3_forward(st.r1, param(stage_index(s) + 2).value,
                                       param(stage_index(s) + 3).value, C);
      for (std::size_t i = 0; i < st.sum.v.size(); ++i) st.sum.v[i] += st.pooled.v[i];
      st.out = detail::relu(st.sum);
      a.stages.push_back(std::move(st));
      x = &a.stages.back().out;
    }

    a.pooled.assign(C, 0.0);
    const double inv = 1.0 / static_cast<double>(x->h * x->w);
    for (std::size_t c = 0; c < C; ++c) {
      const double* p = x->plane(c);
      double s = 0.0;
      for (std::size_t i = 0; i < x->h * x->w; ++i) s += p[i];
      a.pooled[c] = s * inv;
    }

    const std::size_t H = config_.head_hidden;
    const auto& w1 = param(head_index()).value;
    const auto& b1 = param(head_index() + 1).value;
    const auto& w2 = param(head_index() + 2).value;
    const auto& b2 = param(head_index() + 3).value;
    a.hidden_pre.assign(H, 0.0);
    a.hidden.assign(H, 0.0);
    for (std::size_t j = 0; j < H; ++j) {
      double s = b1[j];
      for (std::size_t c = 0; c < C; ++c) s += w1[j * C + c] * a.pooled[c];
      a.hidden_pre[j] = s;
      a.hidden[j] = s > 0.0 ? s : 0.0;
    }
    std::vector<double> out(config_.out_dim);
    for (std::size_t o = 0; o < config_.out_dim; ++o) {
      double s = b2[o];
      for (std::size_t j = 0; j < H; ++j) s += w2[o * H + j] * a.hidden[j];
      out[o] = s;
    }
    return out;
  }

  EncoderConfig config_;
  std::vector<Parameter> params_;
  std::optional<Activations> cache_;
};

// ---------------------------------------------------------------------------
// Pretext losses

struct LossResult {
  double value = 0.0;
  // d(value)/d(beta_hat)
  std::vector<double> grad;
};

constexpr double sign0(double x) noexcept { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Coefficient regression: sum_i |beta_hat_i - beta_tilde_i|. The subgradient
// at a tie is 0.
inline LossResult loss_cr(std::span<const double> beta_hat, std::span<const double> beta_tilde) {
  if (beta_hat.size() != beta_tilde.size()) {
    fail(ErrorKind::Validation, "loss_cr: predicted length " + std::to_string(beta_hat.size()) +
                                    " != target length " + std::to_string(beta_tilde.size()));
  }
  LossResult r;
  r.grad.resize(beta_hat.size());
  for (std::size_t i = 0; i < beta_hat.size(); ++i) {
    const double d = beta_hat[i] - beta_tilde[i];
    r.value += std::abs(d);
    r.grad[i] = sign0(d);
  }
  return r;
}

// Band regression: || target - sum_i remaining_i * beta_hat_i ||_1 over all
// pixels. d/d beta_i = -sum_p sign(residual_p) * remaining_i[p].
inline LossResult loss_br(std::span<const double> beta_hat, const BandStack& remaining,
                          const BandImage& target) {
  if (beta_hat.size() != remaining.bands()) {
    fail(ErrorKind::Validation, "loss_br: " + std::to_string(beta_hat.size()) +
                                    " coefficients for " + std::to_string(remaining.bands()) +
                                    " bands");
  }
  if (target.height != remaining.height() || target.width != remaining.width()) {
    fail(ErrorKind::Validation, "loss_br: target band shape does not match the remaining bands");
  }
  const std::size_t n = remaining.pixels();
  std::vector<double> resid(target.data.begin(), target.data.end());
  for (std::size_t i = 0; i < beta_hat.size(); ++i) {
    auto plane = remaining.band(i);
    for (std::size_t p = 0; p < n; ++p) resid[p] -= plane[p] * beta_hat[i];
  }
  LossResult r;
  r.grad.assign(beta_hat.size(), 0.0);
  for (std::size_t p = 0; p < n; ++p) r.value += std::abs(resid[p]);
  for (std::size_t i = 0; i < beta_hat.size(); ++i) {
    auto plane = remaining.band(i);
    double g = 0.0;
    for (std::size_t p = 0; p < n; ++p) g -= sign0(resid[p]) * plane[p];
    r.grad[i] = g;
  }
  return r;
}

// ---------------------------------------------------------------------------
// AdamW

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  AdamWOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  AdamWState() = default;
  AdamWState(const Encoder& enc, AdamWOptions opts) : options(opts) {
    for (const auto& p : enc.parameters()) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }
};

// One AdamW update:
//   theta <- theta - lr * wd * theta                      (decoupled decay)
//   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)     (bias-corrected)
// Gradients are checked for finiteness before anything is modified.
inline void adamw_step(std::span<Parameter> params, AdamWState& state, double lr) {
  require(state.m.size() == params.size(), "optimizer state does not match the parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    require(state.m[k].size() == p.size(), "optimizer state shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        fail(ErrorKind::NonFinite, "non-finite gradient at " + p.name + "[" + std::to_string(i) +
                                       "] = " + io::format_double(p.grad[i]));
      }
    }
  }
  state.step += 1;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      p.value[i] -= lr * o.weight_decay * p.value[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

inline constexpr double kDefaultLr = 1e-4;
inline constexpr double kDefaultGamma = 0.99;

// Exponential decay: lr0 * gamma^epoch (epoch counted from 0).
inline double lr_schedule(std::size_t epoch, double lr0 = kDefaultLr, double gamma = kDefaultGamma) {
  return lr0 * std::pow(gamma, static_cast<double>(epoch));
}

}  // namespace specreg::nn
