#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "madqrl/errors.hpp"
#include "madqrl/policy.hpp"

namespace madqrl::policy {

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::size_t in_size() const = 0;
  virtual std::size_t out_size() const = 0;
  virtual std::size_t param_count() const { return 0; }
  virtual ParamKind param_kind() const { return ParamKind::Classical; }
  virtual void init(std::span<double> /*params*/, std::mt19937_64& /*rng*/) const {}
  virtual void forward(std::span<const double> params, std::span<const double> in,
                       std::span<double> out) const = 0;
  // grad_in is overwritten, grad_params accumulated. grad_in may be empty
  // when the caller has no use for it.
  virtual void backward(std::span<const double> params, std::span<const double> in,
                        std::span<const double> out, std::span<const double> grad_out,
                        std::span<double> grad_in, std::span<double> grad_params) const = 0;
};

namespace {

class Linear final : public Layer {
 public:
  Linear(std::size_t in, std::size_t out, double init_scale = 1.0)
      : in_(in), out_(out), init_scale_(init_scale) {}

  std::size_t in_size() const override { return in_; }
  std::size_t out_size() const override { return out_; }
  std::size_t param_count() const override { return in_ * out_ + out_; }

  void init(std::span<double> params, std::mt19937_64& rng) const override {
    const double bound = init_scale_ / std::sqrt(static_cast<double>(in_));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < in_ * out_; ++i) params[i] = dist(rng);
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(in_ * out_), params.end(), 0.0);
  }

  void forward(std::span<const double> params, std::span<const double> in,
               std::span<double> out) const override {
    const double* w = params.data();
    const double* b = params.data() + in_ * out_;
    for (std::size_t o = 0; o < out_; ++o) {
      double acc = b[o];
      const double* row = w + o * in_;
      for (std::size_t i = 0; i < in_; ++i) acc += row[i] * in[i];
      out[o] = acc;
    }
  }

  void backward(std::span<const double> params, std::span<const double> in,
                std::span<const double> /*out*/, std::span<const double> grad_out,
                std::span<double> grad_in, std::span<double> grad_params) const override {
    const double* w = params.data();
    double* gw = grad_params.data();
    double* gb = grad_params.data() + in_ * out_;
    if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = grad_out[o];
      if (g == 0.0) continue;
      gb[o] += g;
      double* grow = gw + o * in_;
      for (std::size_t i = 0; i < in_; ++i) grow[i] += g * in[i];
      if (!grad_in.empty()) {
        const double* row = w + o * in_;
        for (std::size_t i = 0; i < in_; ++i) grad_in[i] += row[i] * g;
      }
    }
  }

 private:
  std::size_t in_;
  std::size_t out_;
  double init_scale_;
};

class Relu final : public Layer {
 public:
  explicit Relu(std::size_t size) : size_(size) {}
  std::size_t in_size() const override { return size_; }
  std::size_t out_size() const override { return size_; }

  void forward(std::span<const double>, std::span<const double> in,
               std::span<double> out) const override {
    for (std::size_t i = 0; i < size_; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  }

  void backward(std::span<const double>, std::span<const double> in, std::span<const double>,
                std::span<const double> grad_out, std::span<double> grad_in,
                std::span<double>) const override {
    if (grad_in.empty()) return;
    for (std::size_t i = 0; i < size_; ++i) grad_in[i] = in[i] > 0.0 ? grad_out[i] : 0.0;
  }

 private:
  std::size_t size_;
};

// pi * tanh(x): bounded encoder angles.
class TanhPi final : public Layer {
 public:
  explicit TanhPi(std::size_t size) : size_(size) {}
  std::size_t in_size() const override { return size_; }
  std::size_t out_size() const override { return size_; }

  void forward(std::span<const double>, std::span<const double> in,
               std::span<double> out) const override {
    for (std::size_t i = 0; i < size_; ++i) out[i] = std::numbers::pi * std::tanh(in[i]);
  }

  void backward(std::span<const double>, std::span<const double>, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in,
                std::span<double>) const override {
    if (grad_in.empty()) return;
    for (std::size_t i = 0; i < size_; ++i) {
      const double t = out[i] / std::numbers::pi;
      grad_in[i] = grad_out[i] * std::numbers::pi * (1.0 - t * t);
    }
  }

 private:
  std::size_t size_;
};

class Vqc final : public Layer {
 public:
  explicit Vqc(qsim::AnsatzConfig config) : config_(config) {}
  std::size_t in_size() const override { return static_cast<std::size_t>(config_.n_qubits); }
  std::size_t out_size() const override { return static_cast<std::size_t>(config_.n_qubits); }
  std::size_t param_count() const override { return config_.parameter_count(); }
  ParamKind param_kind() const override { return ParamKind::Quantum; }

  void init(std::span<double> params, std::mt19937_64& rng) const override {
    std::uniform_real_distribution<double> dist(0.0, 2.0 * std::numbers::pi);
    for (auto& p : params) p = dist(rng);
  }

  void forward(std::span<const double> params, std::span<const double> in,
               std::span<double> out) const override {
    const auto z = qsim::run_vqc(in, params, config_);
    std::copy(z.begin(), z.end(), out.begin());
  }

  void backward(std::span<const double> params, std::span<const double> in,
                std::span<const double>, std::span<const double> grad_out,
                std::span<double> grad_in, std::span<double> grad_params) const override {
    const auto grad = qsim::vqc_gradient(in, params, config_, grad_out);
    for (std::size_t k = 0; k < grad.params.size(); ++k) grad_params[k] += grad.params[k];
    if (!grad_in.empty()) std::copy(grad.features.begin(), grad.features.end(), grad_in.begin());
  }

 private:
  qsim::AnsatzConfig config_;
};

// Valid (unpadded) strided convolution over a CHW tensor.
class Conv2d final : public Layer {
 public:
  Conv2d(int in_c, int in_h, int in_w, ConvSpec spec)
      : in_c_(in_c), in_h_(in_h), in_w_(in_w), spec_(spec),
        out_h_((in_h - spec.kernel) / spec.stride + 1),
        out_w_((in_w - spec.kernel) / spec.stride + 1) {}

  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }

  std::size_t in_size() const override { return static_cast<std::size_t>(in_c_) * in_h_ * in_w_; }
  std::size_t out_size() const override {
    return static_cast<std::size_t>(spec_.channels) * out_h_ * out_w_;
  }
  std::size_t param_count() const override { return weight_count() + spec_.channels; }

  void init(std::span<double> params, std::mt19937_64& rng) const override {
    const double fan_in = static_cast<double>(in_c_) * spec_.kernel * spec_.kernel;
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (std::size_t i = 0; i < weight_count(); ++i) params[i] = dist(rng);
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(weight_count()), params.end(), 0.0);
  }

  void forward(std::span<const double> params, std::span<const double> in,
               std::span<double> out) const override {
    const int k = spec_.kernel;
    for (int oc = 0; oc < spec_.channels; ++oc) {
      const double bias = params[weight_count() + oc];
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          double acc = bias;
          for (int ic = 0; ic < in_c_; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
              const double* src = &in[input_index(ic, oy * spec_.stride + ky, ox * spec_.stride)];
              const double* w = &params[weight_index(oc, ic, ky, 0)];
              for (int kx = 0; kx < k; ++kx) acc += w[kx] * src[kx];
            }
          }
          out[output_index(oc, oy, ox)] = acc;
        }
      }
    }
  }

  void backward(std::span<const double> params, std::span<const double> in,
                std::span<const double>, std::span<const double> grad_out,
                std::span<double> grad_in, std::span<double> grad_params) const override {
    const int k = spec_.kernel;
    if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (int oc = 0; oc < spec_.channels; ++oc) {
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          const double g = grad_out[output_index(oc, oy, ox)];
          if (g == 0.0) continue;
          grad_params[weight_count() + oc] += g;
          for (int ic = 0; ic < in_c_; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
              const std::size_t src = input_index(ic, oy * spec_.stride + ky, ox * spec_.stride);
              const std::size_t w = weight_index(oc, ic, ky, 0);
              for (int kx = 0; kx < k; ++kx) {
                grad_params[w + kx] += g * in[src + kx];
                if (!grad_in.empty()) grad_in[src + kx] += g * params[w + kx];
              }
            }
          }
        }
      }
    }
  }

 private:
  std::size_t weight_count() const {
    return static_cast<std::size_t>(spec_.channels) * in_c_ * spec_.kernel * spec_.kernel;
  }
  std::size_t input_index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * in_h_ + y) * in_w_ + x;
  }
  std::size_t output_index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * out_h_ + y) * out_w_ + x;
  }
  std::size_t weight_index(int oc, int ic, int ky, int kx) const {
    return ((static_cast<std::size_t>(oc) * in_c_ + ic) * spec_.kernel + ky) * spec_.kernel + kx;
  }

  int in_c_, in_h_, in_w_;
  ConvSpec spec_;
  int out_h_, out_w_;
};

}  // namespace

void ModelSpec::validate() const {
  if (obs_h <= 0 || obs_w <= 0) throw ValidationError("observation dimensions must be positive");
  if (!critic_only && n_actions < 2) throw ValidationError("n_actions must be at least 2");
  for (int h : hidden_dims) {
    if (h <= 0) throw ValidationError("hidden dimensions must be positive");
  }
  if (kind == ModelKind::HybridQNN) {
    if (n_hybrid_layers < 1) throw ValidationError("need at least one hybrid layer");
    if (hidden_dims.size() != static_cast<std::size_t>(n_hybrid_layers)) {
      throw ValidationError("hybrid model needs one hidden dimension per hybrid layer");
    }
    ansatz.validate();
  } else {
    int h = obs_h;
    int w = obs_w;
    for (const auto& c : conv) {
      if (c.channels <= 0 || c.kernel <= 0 || c.stride <= 0) {
        throw ValidationError("conv channels, kernel and stride must be positive");
      }
      if (c.kernel > h || c.kernel > w) throw ValidationError("conv kernel larger than its input");
      h = (h - c.kernel) / c.stride + 1;
      w = (w - c.kernel) / c.stride + 1;
    }
  }
}

void ParamLayout::add(std::string layer, ParamKind kind, std::size_t size) {
  slices_.push_back({std::move(layer), kind, total_, size});
  total_ += size;
}

std::size_t ParamLayout::count(ParamKind kind) const {
  std::size_t n = 0;
  for (const auto& s : slices_) {
    if (s.kind == kind) n += s.size;
  }
  return n;
}

HybridPolicyParams ParamLayout::split(std::span<const double> flat) const {
  if (flat.size() != total_) throw ShapeError("parameter vector does not match layout");
  HybridPolicyParams out;
  for (const auto& s : slices_) {
    auto& dst = s.kind == ParamKind::Quantum ? out.quantum_weights : out.classical_weights;
    dst.insert(dst.end(), flat.begin() + static_cast<std::ptrdiff_t>(s.offset),
               flat.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size));
  }
  return out;
}

std::vector<double> ParamLayout::merge(const HybridPolicyParams& params) const {
  if (params.classical_weights.size() != count(ParamKind::Classical) ||
      params.quantum_weights.size() != count(ParamKind::Quantum)) {
    throw ShapeError("classical/quantum weights do not match layout");
  }
  std::vector<double> flat(total_);
  std::size_t ci = 0;
  std::size_t qi = 0;
  for (const auto& s : slices_) {
    const auto& src = s.kind == ParamKind::Quantum ? params.quantum_weights
                                                   : params.classical_weights;
    std::size_t& cursor = s.kind == ParamKind::Quantum ? qi : ci;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(cursor), s.size,
                flat.begin() + static_cast<std::ptrdiff_t>(s.offset));
    cursor += s.size;
  }
  return flat;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  auto push = [&](std::unique_ptr<Layer> layer, const std::string& name) {
    trunk_offsets_.push_back(layout_.total());
    if (layer->param_count() > 0) layout_.add(name, layer->param_kind(), layer->param_count());
    trunk_.push_back(std::move(layer));
  };

  std::size_t width = obs_size();
  if (spec_.kind == ModelKind::HybridQNN) {
    const auto nq = static_cast<std::size_t>(spec_.ansatz.n_qubits);
    for (int l = 0; l < spec_.n_hybrid_layers; ++l) {
      const std::string prefix = "hybrid" + std::to_string(l) + ".";
      const auto hidden = static_cast<std::size_t>(spec_.hidden_dims[l]);
      push(std::make_unique<Linear>(width, nq), prefix + "linear_in");
      push(std::make_unique<TanhPi>(nq), prefix + "scale");
      push(std::make_unique<Vqc>(spec_.ansatz), prefix + "vqc");
      push(std::make_unique<Relu>(nq), prefix + "relu_q");
      push(std::make_unique<Linear>(nq, hidden), prefix + "linear_out");
      push(std::make_unique<Relu>(hidden), prefix + "relu_out");
      width = hidden;
    }
  } else {
    int c = 1;
    int h = spec_.obs_h;
    int w = spec_.obs_w;
    for (std::size_t i = 0; i < spec_.conv.size(); ++i) {
      auto conv = std::make_unique<Conv2d>(c, h, w, spec_.conv[i]);
      c = spec_.conv[i].channels;
      h = conv->out_h();
      w = conv->out_w();
      const auto out = conv->out_size();
      push(std::move(conv), "conv" + std::to_string(i));
      push(std::make_unique<Relu>(out), "conv" + std::to_string(i) + ".relu");
    }
    width = static_cast<std::size_t>(c) * h * w;
    for (std::size_t i = 0; i < spec_.hidden_dims.size(); ++i) {
      const auto hidden = static_cast<std::size_t>(spec_.hidden_dims[i]);
      push(std::make_unique<Linear>(width, hidden), "fc" + std::to_string(i));
      push(std::make_unique<Relu>(hidden), "fc" + std::to_string(i) + ".relu");
      width = hidden;
    }
  }

  if (!spec_.critic_only) {
    policy_head_ = std::make_unique<Linear>(width, static_cast<std::size_t>(spec_.n_actions), 0.01);
    policy_offset_ = layout_.total();
    layout_.add("policy_head", ParamKind::Classical, policy_head_->param_count());
  }
  value_head_ = std::make_unique<Linear>(width, 1);
  value_offset_ = layout_.total();
  layout_.add("value_head", ParamKind::Classical, value_head_->param_count());
}

Model::~Model() = default;

std::vector<double> Model::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<double> params(layout_.total(), 0.0);
  std::span<double> all(params);
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    trunk_[i]->init(all.subspan(trunk_offsets_[i], trunk_[i]->param_count()), rng);
  }
  if (policy_head_) policy_head_->init(all.subspan(policy_offset_, policy_head_->param_count()), rng);
  value_head_->init(all.subspan(value_offset_, value_head_->param_count()), rng);
  return params;
}

PolicyOutput Model::forward(std::span<const double> params, std::span<const double> obs,
                            ForwardCache* cache) const {
  if (params.size() != layout_.total()) {
    throw ShapeError("expected " + std::to_string(layout_.total()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  if (obs.size() != obs_size()) {
    throw ShapeError("expected observation of " + std::to_string(spec_.obs_h) + "x" +
                     std::to_string(spec_.obs_w) + ", got " + std::to_string(obs.size()) +
                     " values");
  }
  for (double v : obs) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError("observation values must be finite and within [0, 1]");
    }
  }

  std::vector<std::vector<double>> local;
  auto& acts = cache ? cache->activations_ : local;
  acts.resize(trunk_.size() + 1);
  acts[0].assign(obs.begin(), obs.end());
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    acts[i + 1].resize(trunk_[i]->out_size());
    trunk_[i]->forward(params.subspan(trunk_offsets_[i], trunk_[i]->param_count()), acts[i],
                       acts[i + 1]);
  }

  PolicyOutput out;
  const auto& features = acts.back();
  if (policy_head_) {
    out.logits.resize(policy_head_->out_size());
    policy_head_->forward(params.subspan(policy_offset_, policy_head_->param_count()), features,
                          out.logits);
  }
  double value = 0.0;
  value_head_->forward(params.subspan(value_offset_, value_head_->param_count()), features,
                       std::span<double>(&value, 1));
  out.value = value;
  return out;
}

std::vector<double> Model::backward(std::span<const double> params, const ForwardCache& cache,
                                    std::span<const double> upstream_logits,
                                    double upstream_value) const {
  std::vector<double> grad(layout_.total(), 0.0);
  accumulate_gradient(params, cache, upstream_logits, upstream_value, grad);
  return grad;
}

void Model::accumulate_gradient(std::span<const double> params, const ForwardCache& cache,
                                std::span<const double> upstream_logits, double upstream_value,
                                std::span<double> grad) const {
  if (cache.empty()) throw StateError("backward called without a forward cache");
  if (params.size() != layout_.total() || grad.size() != layout_.total()) {
    throw ShapeError("parameter/gradient size does not match model layout");
  }
  const std::size_t n_logits = policy_head_ ? policy_head_->out_size() : 0;
  if (upstream_logits.size() != n_logits) throw ShapeError("upstream logits size mismatch");
  const auto& acts = cache.activations_;
  if (acts.size() != trunk_.size() + 1) throw StateError("forward cache belongs to another model");

  const auto& features = acts.back();
  std::vector<double> grad_features(features.size(), 0.0);
  std::vector<double> scratch(features.size(), 0.0);
  if (policy_head_) {
    double out_dummy = 0.0;  // heads don't read their outputs in backward
    policy_head_->backward(params.subspan(policy_offset_, policy_head_->param_count()), features,
                           std::span<const double>(&out_dummy, 0), upstream_logits, scratch,
                           grad.subspan(policy_offset_, policy_head_->param_count()));
    for (std::size_t i = 0; i < scratch.size(); ++i) grad_features[i] += scratch[i];
  }
  if (upstream_value != 0.0) {
    value_head_->backward(params.subspan(value_offset_, value_head_->param_count()), features, {},
                          std::span<const double>(&upstream_value, 1), scratch,
                          grad.subspan(value_offset_, value_head_->param_count()));
    for (std::size_t i = 0; i < scratch.size(); ++i) grad_features[i] += scratch[i];
  }

  std::vector<double> grad_out = std::move(grad_features);
  std::vector<double> grad_in;
  for (std::size_t i = trunk_.size(); i-- > 0;) {
    const auto& layer = *trunk_[i];
    // The first layer's input is the observation; no gradient is needed there.
    if (i > 0) {
      grad_in.assign(layer.in_size(), 0.0);
    } else {
      grad_in.clear();
    }
    layer.backward(params.subspan(trunk_offsets_[i], layer.param_count()), acts[i], acts[i + 1],
                   grad_out, grad_in, grad.subspan(trunk_offsets_[i], layer.param_count()));
    std::swap(grad_out, grad_in);
  }
}

ParamCounts count_parameters(const ModelSpec& spec) {
  const Model model(spec);
  return {model.layout().count(ParamKind::Classical), model.layout().count(ParamKind::Quantum)};
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const auto top = std::max_element(logits.begin(), logits.end());
  const double mx = *top;
  double rest = 0.0;
  for (auto it = logits.begin(); it != logits.end(); ++it) {
    if (it != top) rest += std::exp(*it - mx);
  }
  const double log_norm = std::log1p(rest);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - mx) - log_norm;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (auto& v : out) v = std::exp(v);
  return out;
}

double entropy(std::span<const double> logits) {
  const auto logp = log_softmax(logits);
  double h = 0.0;
  for (double lp : logp) h -= std::exp(lp) * lp;
  return h;
}

SampledAction sample_action(std::span<const double> logits, std::mt19937_64& rng, bool greedy) {
  const auto logp = log_softmax(logits);
  int action = 0;
  if (greedy) {
    action = static_cast<int>(std::max_element(logp.begin(), logp.end()) - logp.begin());
  } else {
    // 53-bit uniform in [0, 1) independent of the standard library's
    // distribution implementation.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double cumulative = 0.0;
    action = static_cast<int>(logp.size()) - 1;
    for (std::size_t i = 0; i < logp.size(); ++i) {
      cumulative += std::exp(logp[i]);
      if (u < cumulative) {
        action = static_cast<int>(i);
        break;
      }
    }
  }
  return {action, logp[static_cast<std::size_t>(action)]};
}

SampledAction sample_action(const PolicyOutput& output, std::mt19937_64& rng, bool greedy) {
  if (output.logits.empty()) throw StateError("critic-only model has no policy head");
  return sample_action(std::span<const double>(output.logits), rng, greedy);
}

const char* to_string(ModelKind kind) {
  return kind == ModelKind::HybridQNN ? "quantum" : "classical";
}

const char* to_string(ParamKind kind) {
  return kind == ParamKind::Quantum ? "quantum" : "classical";
}

}  // namespace madqrl::policy
