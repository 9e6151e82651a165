#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "madqrl/qsim.hpp"

namespace madqrl::policy {

enum class ModelKind { HybridQNN, ClassicalCNN };

struct ConvSpec {
  int channels = 8;
  int kernel = 3;
  int stride = 1;

  bool operator==(const ConvSpec&) const = default;
};

struct ModelSpec {
  ModelKind kind = ModelKind::HybridQNN;
  int n_hybrid_layers = 3;
  qsim::AnsatzConfig ansatz{};
  int obs_h = 64;
  int obs_w = 64;
  int n_actions = 3;
  // Hybrid: width of the post-VQC linear layer, one entry per hybrid layer.
  // Classical: fully connected widths following the conv stack.
  std::vector<int> hidden_dims{16, 16, 16};
  std::vector<ConvSpec> conv;  // classical only; empty means a plain MLP
  // Centralized critics carry only the value head.
  bool critic_only = false;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

enum class ParamKind { Classical, Quantum };

struct ParamSlice {
  std::string layer;
  ParamKind kind = ParamKind::Classical;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// All parameters, split into classical and quantum weights.
struct HybridPolicyParams {
  std::vector<double> classical_weights;
  std::vector<double> quantum_weights;
};

class ParamLayout {
 public:
  void add(std::string layer, ParamKind kind, std::size_t size);

  const std::vector<ParamSlice>& slices() const { return slices_; }
  std::size_t total() const { return total_; }
  std::size_t count(ParamKind kind) const;

  HybridPolicyParams split(std::span<const double> flat) const;
  std::vector<double> merge(const HybridPolicyParams& params) const;

 private:
  std::vector<ParamSlice> slices_;
  std::size_t total_ = 0;
};

struct PolicyOutput {
  std::vector<double> logits;  // empty for critic-only models
  double value = 0.0;
};

class Layer;

// Activations recorded by forward() for a later backward().
class ForwardCache {
 public:
  bool empty() const { return activations_.empty(); }
  void clear() { activations_.clear(); }

 private:
  friend class Model;
  std::vector<std::vector<double>> activations_;
};

class Model {
 public:
  explicit Model(ModelSpec spec);
  ~Model();
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.total(); }
  std::size_t obs_size() const { return static_cast<std::size_t>(spec_.obs_h) * spec_.obs_w; }

  std::vector<double> init_params(std::uint64_t seed) const;

  // Throws ShapeError on size mismatch and ValidationError on non-finite or
  // out-of-range observations.
  PolicyOutput forward(std::span<const double> params, std::span<const double> obs,
                       ForwardCache* cache = nullptr) const;

  // Gradient of upstream_logits . logits + upstream_value * value with
  // respect to every parameter. Throws StateError when the cache is empty.
  std::vector<double> backward(std::span<const double> params, const ForwardCache& cache,
                               std::span<const double> upstream_logits,
                               double upstream_value) const;

  // Same as backward() but adds into `grad`.
  void accumulate_gradient(std::span<const double> params, const ForwardCache& cache,
                           std::span<const double> upstream_logits, double upstream_value,
                           std::span<double> grad) const;

  // One line per parameterized layer: name, kind, count.
  std::vector<ParamSlice> summary() const { return layout_.slices(); }

 private:
  ModelSpec spec_;
  ParamLayout layout_;
  std::vector<std::unique_ptr<Layer>> trunk_;
  std::unique_ptr<Layer> policy_head_;
  std::unique_ptr<Layer> value_head_;
  std::vector<std::size_t> trunk_offsets_;
  std::size_t policy_offset_ = 0;
  std::size_t value_offset_ = 0;
};

struct ParamCounts {
  std::size_t classical = 0;
  std::size_t quantum = 0;
  std::size_t total() const { return classical + quantum; }
};

ParamCounts count_parameters(const ModelSpec& spec);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
double entropy(std::span<const double> logits);

struct SampledAction {
  int action = 0;
  double log_prob = 0.0;
};

// Draws from softmax(logits), or takes the argmax when greedy.
SampledAction sample_action(const PolicyOutput& output, std::mt19937_64& rng, bool greedy = false);
SampledAction sample_action(std::span<const double> logits, std::mt19937_64& rng,
                            bool greedy = false);

const char* to_string(ModelKind kind);
const char* to_string(ParamKind kind);

}  // namespace madqrl::policy
