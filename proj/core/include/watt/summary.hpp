#pragma once

#include <iosfwd>

#include "watt/model.hpp"

namespace watt {

struct SummaryRow {
  std::string layer;
  Shape out_shape;  // batch dimension omitted
  int64_t params = 0;
  int64_t macs = 0;
  bool attention = false;
};

// Static analysis of a built model. Parameter counts are exact integers
// summed over the model's enumerated state tensors (batch-norm running
// stats included, as non-trainable). Attention parameters are kept on
// itemized rows and excluded from total_params, mirroring the published
// accounting; total_with_attention carries the grand total.
struct ModelSummary {
  std::string variant;
  std::vector<SummaryRow> rows;
  int64_t total_params = 0;
  int64_t attention_params = 0;
  int64_t total_with_attention = 0;
  int64_t trainable_params = 0;
  int64_t non_trainable_params = 0;
  int64_t total_macs = 0;

  // CSV columns: layer, out_shape (extents joined with 'x'), params, macs.
  void write_csv(std::ostream& os) const;
  void write_table(std::ostream& os) const;
};

template <typename T>
ModelSummary summarize(const WattModel<T>& model);

// Spec-facing aliases: both views come from the same walk.
template <typename T>
ModelSummary count_params(const WattModel<T>& model) { return summarize(model); }
template <typename T>
ModelSummary count_flops(const WattModel<T>& model) { return summarize(model); }

}  // namespace watt
