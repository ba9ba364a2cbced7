#include "watt/summary.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

namespace watt {

namespace {

std::string shape_x(const Shape& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out;
}

template <typename T>
int64_t params_of(const ParamList<T>& list) {
  int64_t n = 0;
  for (const auto& p : list) n += p.tensor.numel();
  return n;
}

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace

template <typename T>
struct SummaryWalker {
  const WattModel<T>& m;
  ModelSummary s;

  void add(const std::string& name, Shape out, const ParamList<T>& params, int64_t macs,
           bool attention) {
    int64_t count = params_of(params);
    s.rows.push_back({name, std::move(out), count, macs, attention});
    for (const auto& p : params) {
      if (p.trainable()) s.trainable_params += p.tensor.numel();
      else s.non_trainable_params += p.tensor.numel();
    }
    if (attention) s.attention_params += count;
    else s.total_params += count;
    s.total_macs += macs;
  }

  ModelSummary run() {
    const ArchConfig& cfg = m.config();
    s.variant = cfg.variant_name();
    int64_t h = ceil_div(cfg.input_h, 2), w = ceil_div(cfg.input_w, 2);
    int64_t c = cfg.stem_filters;

    // stem conv 3x3 s2 + BN (activations cost no MACs by convention)
    {
      ParamList<T> p;
      m.stem_.collect(p, "stem");
      add("stem_conv", {c, h, w}, p, h * w * c * (3 * 3 * cfg.input_c), false);
      ParamList<T> pb;
      m.stem_bn_.collect(pb, "stem_bn");
      add("stem_bn", {c, h, w}, pb, h * w * c, false);
    }

    for (size_t i = 0; i < m.stages_.size(); ++i) {
      const auto& stage = m.stages_[i];
      const auto& blk = stage.block;
      const std::string base = "stage" + std::to_string(i + 1);
      const int64_t width = blk.width, out_c = blk.out_channels, in_c = blk.in_channels;

      ParamList<T> p;
      blk.expand.collect(p, base + ".expand");
      add(base + ".expand", {width, h, w}, p, h * w * width * in_c, false);
      p.clear();
      blk.bn_expand.collect(p, base + ".expand_bn");
      add(base + ".expand_bn", {width, h, w}, p, h * w * width, false);

      const int64_t oh = blk.stride == 2 ? ceil_div(h, 2) : h;
      const int64_t ow = blk.stride == 2 ? ceil_div(w, 2) : w;
      p.clear();
      blk.depthwise.collect(p, base + ".depthwise");
      add(base + ".depthwise", {width, oh, ow}, p, oh * ow * width * (5 * 5), false);
      p.clear();
      blk.bn_depthwise.collect(p, base + ".depthwise_bn");
      add(base + ".depthwise_bn", {width, oh, ow}, p, oh * ow * width, false);
      h = oh;
      w = ow;

      p.clear();
      blk.se.collect(p, base + ".se");
      const int64_t se_hidden = width / blk.se.ratio;
      const int64_t se_macs = h * w * width                  // global average pool
                              + width * se_hidden * 2        // bottleneck MLP
                              + width * h * w;               // gating product
      add(base + ".se", {width, h, w}, p, se_macs, false);

      p.clear();
      blk.project.collect(p, base + ".project");
      add(base + ".project", {out_c, h, w}, p, h * w * out_c * width, false);
      p.clear();
      blk.bn_project.collect(p, base + ".project_bn");
      add(base + ".project_bn", {out_c, h, w}, p, h * w * out_c, false);

      if (stage.attention_enabled) {
        p.clear();
        stage.attention.channel.collect(p, base + ".attention.channel");
        const int64_t hidden = out_c / stage.attention.channel.reduction;
        const int64_t mc_macs = 2 * h * w * out_c           // avg + max pooling
                                + 4 * out_c * hidden        // shared MLP, two branches
                                + out_c * h * w;            // gating product
        add(base + ".attention.channel", {out_c, 1, 1}, p, mc_macs, true);

        p.clear();
        stage.attention.spatial.collect(p, base + ".attention.spatial");
        const int64_t ms_macs = 2 * h * w * out_c           // channel mean + max maps
                                + h * w * (7 * 7 * 2)       // 7x7 conv over the 2 maps
                                + out_c * h * w;            // gating product
        add(base + ".attention.spatial", {1, h, w}, p, ms_macs, true);
      }
      c = out_c;
    }

    add("global_avg_pool", {c, 1, 1}, {}, h * w * c, false);
    {
      ParamList<T> p;
      m.head_.collect(p, "head");
      add("head", {static_cast<int64_t>(m.config().num_classes)}, p,
          c * m.config().num_classes, false);
    }
    s.total_with_attention = s.total_params + s.attention_params;
    return s;
  }
};

template <typename T>
ModelSummary summarize(const WattModel<T>& model) {
  return SummaryWalker<T>{model, {}}.run();
}

void ModelSummary::write_csv(std::ostream& os) const {
  os << "layer,out_shape,params,macs\n";
  for (const auto& r : rows)
    os << r.layer << "," << shape_x(r.out_shape) << "," << r.params << "," << r.macs << "\n";
  os << "total,," << total_params << "," << total_macs << "\n";
  os << "attention,," << attention_params << ",\n";
}

void ModelSummary::write_table(std::ostream& os) const {
  os << variant << "\n";
  os << std::left << std::setw(28) << "layer" << std::setw(16) << "out shape" << std::right
     << std::setw(12) << "params" << std::setw(14) << "macs" << "\n";
  os << std::string(70, '-') << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(28) << r.layer << std::setw(16) << shape_x(r.out_shape)
       << std::right << std::setw(12) << r.params << std::setw(14) << r.macs << "\n";
  }
  os << std::string(70, '-') << "\n";
  os << "Attention params: " << attention_params << " (itemized separately)\n";
  os << "Total params: " << total_params << "\n";
  os << "Total params incl. attention: " << total_with_attention << "\n";
  os << "Trainable params: " << trainable_params << "\n";
  os << "Non-trainable params: " << non_trainable_params << "\n";
  os << "MACs: " << total_macs << " (" << std::fixed << std::setprecision(3)
     << static_cast<double>(total_macs) / 1e6 << " MMACs, "
     << static_cast<double>(2 * total_macs) / 1e6 << " MFLOPs)\n";
  os.unsetf(std::ios::fixed);
}

template ModelSummary summarize(const WattModel<float>&);
template ModelSummary summarize(const WattModel<double>&);

}  // namespace watt
