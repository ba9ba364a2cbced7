#pragma once

#include "watt/block.hpp"

namespace watt {

// Descriptor of one WATT-EffNet-d-k variant: d stages whose internal widths
// are k * base_widths[i], projecting to stage_outputs[i] channels. The
// default width/output tables reproduce the published parameter counts
// exactly for every d in {1,3,5}, k in {2..7} (see calibrate.hpp).
struct ArchConfig {
  int d = 3;
  int k = 6;
  bool attention = true;
  int64_t input_h = 224, input_w = 224, input_c = 3;
  int num_classes = 5;
  int stem_filters = 32;
  int se_ratio = 4;
  int attention_reduction = 8;
  std::vector<int64_t> base_widths;    // per-stage l_i, internal width is k*l_i
  std::vector<int64_t> stage_outputs;  // per-stage projection channels o_i

  static ArchConfig make(int d, int k, bool attention = true);

  void validate() const;  // throws ConfigError on bad d/k/table sizes/divisibility
  std::string variant_name() const;
};

std::vector<int64_t> default_base_widths(int d);
std::vector<int64_t> default_stage_outputs(int d);

// The trained network: stem conv (3x3, stride 2) + BN + ReLU, d WattStages
// (first stage strides 2 in its depthwise layer), global average pooling and
// a dense softmax head. Parameter initialization is deterministic in `seed`.
template <typename T>
class WattModel {
 public:
  struct Output {
    Tensor<T> logits;  // [N, classes], pre-softmax
    Tensor<T> probs;   // [N, classes], rows sum to 1
  };

  WattModel() = default;
  WattModel(const ArchConfig& cfg, uint64_t seed);

  Output forward(const Tensor<T>& x, bool training = false);

  // Every state tensor in declaration order (the checkpoint order).
  ParamList<T> parameters() const;
  void zero_grad();

  const ArchConfig& config() const { return cfg_; }
  const std::vector<WattStage<T>>& stages() const { return stages_; }

 private:
  ArchConfig cfg_;
  Conv2dLayer<T> stem_;
  BatchNorm2dLayer<T> stem_bn_;
  std::vector<WattStage<T>> stages_;
  DenseLayer<T> head_;

  template <typename U>
  friend struct SummaryWalker;
};

}  // namespace watt
