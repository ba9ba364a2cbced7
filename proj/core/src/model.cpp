#include "watt/model.hpp"

namespace watt {

namespace {
// Calibrated stage tables. Widths follow one shared progression; output
// channels are keyed per depth (the two published d=5 counts pin the d=5
// row only jointly with these choices; see calibrate.cpp for the check).
constexpr int64_t kWidthTable[] = {32, 96, 144, 240, 144};

std::vector<int64_t> outputs_for(int d) {
  switch (d) {
    case 1: return {16};
    case 2: return {16, 24};
    case 3: return {16, 24, 24};
    case 4: return {16, 32, 64, 40};
    case 5: return {16, 32, 64, 40, 16};
    default: break;
  }
  std::vector<int64_t> out = {16, 32, 64, 40, 16};
  while (static_cast<int>(out.size()) < d) out.push_back(16);
  return out;
}
}  // namespace

std::vector<int64_t> default_base_widths(int d) {
  std::vector<int64_t> w;
  for (int i = 0; i < d; ++i) w.push_back(kWidthTable[std::min(i, 4)]);
  return w;
}

std::vector<int64_t> default_stage_outputs(int d) { return outputs_for(d); }

ArchConfig ArchConfig::make(int d, int k, bool attention) {
  ArchConfig cfg;
  cfg.d = d;
  cfg.k = k;
  cfg.attention = attention;
  if (d >= 1) {
    cfg.base_widths = default_base_widths(d);
    cfg.stage_outputs = default_stage_outputs(d);
  }
  return cfg;
}

void ArchConfig::validate() const {
  if (d < 1) throw ConfigError("arch: d must be >= 1, got " + std::to_string(d));
  if (k < 1) throw ConfigError("arch: k must be >= 1, got " + std::to_string(k));
  if (num_classes < 1) throw ConfigError("arch: num_classes must be >= 1");
  if (input_c < 1 || input_h < 2 || input_w < 2)
    throw ConfigError("arch: bad input shape [" + std::to_string(input_h) + "," +
                      std::to_string(input_w) + "," + std::to_string(input_c) + "]");
  if (static_cast<int>(base_widths.size()) != d)
    throw ConfigError("arch: base_widths has " + std::to_string(base_widths.size()) +
                      " entries for d=" + std::to_string(d));
  if (static_cast<int>(stage_outputs.size()) != d)
    throw ConfigError("arch: stage_outputs has " + std::to_string(stage_outputs.size()) +
                      " entries for d=" + std::to_string(d));
  for (int i = 0; i < d; ++i) {
    const int64_t width = static_cast<int64_t>(k) * base_widths[static_cast<size_t>(i)];
    if (width < 1) throw ConfigError("arch: stage " + std::to_string(i + 1) + " width < 1");
    if (width % se_ratio != 0)
      throw ConfigError("arch: stage " + std::to_string(i + 1) + " width " +
                        std::to_string(width) + " not divisible by SE ratio " +
                        std::to_string(se_ratio));
    if (attention && stage_outputs[static_cast<size_t>(i)] % attention_reduction != 0)
      throw ConfigError("arch: stage " + std::to_string(i + 1) + " output channels " +
                        std::to_string(stage_outputs[static_cast<size_t>(i)]) +
                        " not divisible by attention reduction " +
                        std::to_string(attention_reduction));
  }
}

std::string ArchConfig::variant_name() const {
  return "WATT-EffNet-" + std::to_string(d) + "-" + std::to_string(k);
}

template <typename T>
WattModel<T>::WattModel(const ArchConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(seed, /*salt=*/0x1717));
  stem_ = Conv2dLayer<T>(cfg_.input_c, cfg_.stem_filters, 3, 2, Padding::Same,
                         /*with_bias=*/true, 1, rng);
  stem_bn_ = BatchNorm2dLayer<T>(cfg_.stem_filters);
  int64_t channels = cfg_.stem_filters;
  for (int i = 0; i < cfg_.d; ++i) {
    const int64_t width = static_cast<int64_t>(cfg_.k) * cfg_.base_widths[static_cast<size_t>(i)];
    const int64_t out = cfg_.stage_outputs[static_cast<size_t>(i)];
    const int stride = i == 0 ? 2 : 1;
    stages_.emplace_back(channels, width, out, stride, cfg_.se_ratio, cfg_.attention,
                         cfg_.attention_reduction, rng);
    channels = out;
  }
  head_ = DenseLayer<T>(channels, cfg_.num_classes, /*with_bias=*/true, rng);
}

template <typename T>
typename WattModel<T>::Output WattModel<T>::forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 4 || x.dim(1) != cfg_.input_c)
    throw ConfigError("model: input must be [N," + std::to_string(cfg_.input_c) +
                      ",H,W], got " + shape_str(x.shape()));
  Tensor<T> y = relu(stem_bn_.forward(stem_.forward(x), training));
  for (auto& stage : stages_) y = stage.forward(y, training);
  Tensor<T> pooled = reshape(global_avg_pool(y), {y.dim(0), y.dim(1)});
  Tensor<T> logits = head_.forward(pooled);
  return {logits, softmax(logits, 1)};
}

template <typename T>
ParamList<T> WattModel<T>::parameters() const {
  ParamList<T> out;
  stem_.collect(out, "stem");
  stem_bn_.collect(out, "stem_bn");
  for (size_t i = 0; i < stages_.size(); ++i)
    stages_[i].collect(out, "stage" + std::to_string(i + 1));
  head_.collect(out, "head");
  return out;
}

template <typename T>
void WattModel<T>::zero_grad() {
  for (auto& p : parameters()) {
    auto t = p.tensor;
    if (t.has_grad()) t.zero_grad();
  }
}

template class WattModel<float>;
template class WattModel<double>;

}  // namespace watt
