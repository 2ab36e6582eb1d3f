/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/clamp.hpp"

#include <algorithm>
#include <stdexcept>

namespace jdbm {

LayerClamp LayerClamp::free(int n) {
  return LayerClamp{std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0), Vec::Zero(n)};
}

LayerClamp LayerClamp::all(const Vec& values) {
  return LayerClamp{std::vector<std::uint8_t>(static_cast<std::size_t>(values.size()), 1), values};
}

void LayerClamp::set(int i, double v) {
  fixed.at(static_cast<std::size_t>(i)) = 1;
  value(i) = v;
}

void LayerClamp::release(int i) {
  fixed.at(static_cast<std::size_t>(i)) = 0;
  value(i) = 0.0;
}

int LayerClamp::free_count() const {
  return static_cast<int>(std::count(fixed.begin(), fixed.end(), std::uint8_t{0}));
}

std::vector<int> LayerClamp::free_indices() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!is_fixed(i)) out.push_back(i);
  return out;
}

ClampSpec ClampSpec::none(const ModelSpec& spec) {
  return ClampSpec{LayerClamp::free(spec.n_visible), LayerClamp::free(spec.n_hidden1),
                   LayerClamp::free(spec.n_hidden2), LabelMode::free, -1};
}

ClampSpec ClampSpec::observed(const ModelSpec& spec, const Example& ex) {
  if (ex.v.size() != spec.n_visible) throw std::invalid_argument("ClampSpec: example has the wrong size");
  ClampSpec c = none(spec);
  c.v = LayerClamp::all(ex.v);
  if (spec.has_label()) c.clamp_label(ex.label);
  return c;
}

void ClampSpec::clamp_label(int cls) {
  label_mode = LabelMode::clamped;
  label = cls;
}

void ClampSpec::validate(const ModelSpec& spec) const {
  if (v.size() != spec.n_visible || h1.size() != spec.n_hidden1 || h2.size() != spec.n_hidden2 ||
      v.value.size() != spec.n_visible || h1.value.size() != spec.n_hidden1 || h2.value.size() != spec.n_hidden2)
    throw std::invalid_argument("ClampSpec: layer sizes do not match the model");
  for (const LayerClamp* l : {&v, &h1, &h2})
    for (int i = 0; i < l->size(); ++i)
      if (l->is_fixed(i) && l->value(i) != 0.0 && l->value(i) != 1.0)
        throw std::invalid_argument("ClampSpec: clamped binary value must be 0 or 1");
  if (label_mode != LabelMode::free && !spec.has_label())
    throw std::invalid_argument("ClampSpec: label clamp on a model without labels");
  if (label_mode == LabelMode::clamped && (label < 0 || label >= spec.n_classes))
    throw std::invalid_argument("ClampSpec: clamped class index out of range");
}

void MaskSet::validate(const ModelSpec& spec) const {
  for (std::size_t i = 0; i < masked_visibles.size(); ++i) {
    const int j = masked_visibles[i];
    if (j < 0 || j >= spec.n_visible) throw std::invalid_argument("MaskSet: index out of range");
    if (i > 0 && masked_visibles[i - 1] >= j) throw std::invalid_argument("MaskSet: indices must be sorted and unique");
  }
  if (label_masked && !spec.has_label()) throw std::invalid_argument("MaskSet: label masked on a model without labels");
}

ClampSpec inpaint_clamp(const ModelSpec& spec, const Example& ex, const MaskSet& mask) {
  mask.validate(spec);
  ClampSpec c = ClampSpec::observed(spec, ex);
  for (int j : mask.masked_visibles) c.v.release(j);
  if (mask.label_masked) {
    c.label_mode = LabelMode::free;
    c.label = -1;
  }
  return c;
}

}  // namespace jdbm
