/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jdbm/model.hpp"

namespace jdbm {

/// One named float64 array inside a container file.
struct ArrayField {
  std::string name;
  std::vector<std::int64_t> shape;
  std::string order = "column-major";  // or "row-major"
  std::vector<double> values;
};

/// Single-file container used for checkpoints and feature caches:
///
///   <compact UTF-8 JSON manifest>\n<float64 little-endian arrays>
///
/// The manifest carries {format, version, kind, meta, fields[name, shape,
/// order]}; the binary section is the arrays concatenated in field order.
struct Container {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<ArrayField> fields;

  const ArrayField& field(std::string_view name) const;
  bool has_field(std::string_view name) const;
};

std::string encode_container(const Container& c);
Container decode_container(std::string_view bytes);
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

ArrayField matrix_field(std::string name, const Mat& m);
Mat field_matrix(const ArrayField& f);

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// DBM checkpoint: kind "dbm", meta {spec, scheme, seed, ...extra}.
Container dbm_container(const DbmParams& params, const InitScheme& scheme, std::uint64_t seed,
                        const nlohmann::json& extra = nlohmann::json::object());
DbmParams dbm_from_container(const Container& c);
void save_dbm(const std::filesystem::path& path, const DbmParams& params, const InitScheme& scheme,
              std::uint64_t seed, const nlohmann::json& extra = nlohmann::json::object());
DbmParams load_dbm(const std::filesystem::path& path);

/// Feature cache: kind "features", one row-major [n_examples x n_features] array.
void save_features(const std::filesystem::path& path, const Mat& rows, const nlohmann::json& meta = {});
Mat load_features(const std::filesystem::path& path);

}  // namespace jdbm
