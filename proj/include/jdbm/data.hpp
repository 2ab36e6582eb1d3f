/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "jdbm/model.hpp"

namespace jdbm {

/// Unsigned-byte IDX tensor (the MNIST container). Header: big-endian magic
/// 0x000008NN where NN is the number of dimensions, then NN big-endian uint32
/// sizes, then the raw bytes in row-major order.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t count() const { return dims.empty() ? 0 : dims[0]; }
  /// Product of all dimensions after the first.
  std::size_t item_size() const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

IdxArray parse_idx(std::string_view bytes);
IdxArray load_idx(const std::filesystem::path& path);
/// Reads only the header (magic and dims).
IdxArray load_idx_header(const std::filesystem::path& path);
std::string encode_idx(const IdxArray& a);
void write_idx(const std::filesystem::path& path, const IdxArray& a);

struct BinarizeRule {
  enum class Kind { threshold, bernoulli };
  Kind kind = Kind::threshold;
  /// Pixels strictly above the threshold become 1.
  double threshold = 127.5;
  std::uint64_t seed = 0;
};

BinarizeRule::Kind binarize_kind_from_string(std::string_view s);

/// One row per item; entries are 0 or 1. The Bernoulli rule draws pixel/255
/// from a single stream seeded by rule.seed, in row-major order.
Mat binarize(const IdxArray& images, const BinarizeRule& rule = {});

/// Images and labels of one IDX pair as examples. Errors on a count mismatch
/// or a label outside [0, n_classes).
std::vector<Example> load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                                   const BinarizeRule& rule, int n_classes = 10, std::size_t limit = 0);

/// Two-class toy task on 8x8 binary images: class 0 shows between 1 and 7
/// full horizontal bars, class 1 the same for vertical bars; each pixel is
/// then flipped with probability `noise`.
std::vector<Example> make_bars(std::size_t n, double noise, std::uint64_t seed);

}  // namespace jdbm
