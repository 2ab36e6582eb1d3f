/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <vector>

#include "jdbm/model.hpp"

namespace jdbm {

/// Per-unit Free/Clamped(value) status of one binary layer.
struct LayerClamp {
  std::vector<std::uint8_t> fixed;  // 1 where clamped
  Vec value;                        // clamped value (0 or 1) where fixed, 0 elsewhere

  static LayerClamp free(int n);
  static LayerClamp all(const Vec& values);

  int size() const { return static_cast<int>(fixed.size()); }
  bool is_fixed(int i) const { return fixed[static_cast<std::size_t>(i)] != 0; }
  void set(int i, double v);
  void release(int i);
  int free_count() const;
  std::vector<int> free_indices() const;
};

/// How the label block is treated. `zero` pins every coordinate of y-hat to 0;
/// it is a mean-field-only device (feature extraction) with no probabilistic
/// meaning, and the exact oracle rejects it.
enum class LabelMode { free, clamped, zero };

/// Assignment status of every variable of the model: the conditioning set of
/// an inference query.
struct ClampSpec {
  LayerClamp v;
  LayerClamp h1;
  LayerClamp h2;
  LabelMode label_mode = LabelMode::free;
  int label = -1;  // class index when label_mode == clamped

  /// Nothing clamped.
  static ClampSpec none(const ModelSpec& spec);
  /// v and (when the model has one) the label clamped to an observation.
  static ClampSpec observed(const ModelSpec& spec, const Example& ex);

  void clamp_label(int cls);
  /// Throws std::invalid_argument if sizes or clamped values are invalid.
  void validate(const ModelSpec& spec) const;
};

/// Partition of the observed variables into conditioned-on and inpainted
/// (masked) sets. The label is masked as a whole block.
struct MaskSet {
  std::vector<int> masked_visibles;  // sorted, unique
  bool label_masked = false;

  bool empty() const { return masked_visibles.empty() && !label_masked; }
  std::size_t masked_count() const { return masked_visibles.size() + (label_masked ? 1 : 0); }
  void validate(const ModelSpec& spec) const;
  friend bool operator==(const MaskSet&, const MaskSet&) = default;
};

/// Conditioned-on observed variables clamped to the example, masked ones and
/// all hidden units free.
ClampSpec inpaint_clamp(const ModelSpec& spec, const Example& ex, const MaskSet& mask);

}  // namespace jdbm
