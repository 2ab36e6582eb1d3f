/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace jdbm {
namespace {

constexpr const char* kFormat = "jdbm-container";
constexpr int kVersion = 1;

std::uint64_t to_little(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw std::runtime_error("container: negative dimension");
    n *= d;
  }
  return n;
}

}  // namespace

const ArrayField& Container::field(std::string_view name) const {
  for (const auto& f : fields)
    if (f.name == name) return f;
  throw std::runtime_error("container: missing field '" + std::string(name) + "'");
}

bool Container::has_field(std::string_view name) const {
  for (const auto& f : fields)
    if (f.name == name) return true;
  return false;
}

std::string encode_container(const Container& c) {
  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["kind"] = c.kind;
  manifest["meta"] = c.meta;
  manifest["fields"] = nlohmann::json::array();
  for (const auto& f : c.fields) {
    if (element_count(f.shape) != static_cast<std::int64_t>(f.values.size()))
      throw std::invalid_argument("container: field '" + f.name + "' shape does not match its data");
    manifest["fields"].push_back({{"name", f.name}, {"shape", f.shape}, {"order", f.order}});
  }
  std::string out = manifest.dump();
  out.push_back('\n');
  for (const auto& f : c.fields) {
    for (double v : f.values) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      char buf[8];
      std::memcpy(buf, &bits, 8);
      out.append(buf, 8);
    }
  }
  return out;
}

Container decode_container(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw std::runtime_error("container: missing manifest terminator");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("container: bad manifest: ") + e.what());
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion)
    throw std::runtime_error("container: unsupported format or version");
  Container c;
  c.kind = manifest.at("kind").get<std::string>();
  c.meta = manifest.at("meta");
  std::size_t pos = nl + 1;
  for (const auto& jf : manifest.at("fields")) {
    ArrayField f;
    f.name = jf.at("name").get<std::string>();
    f.shape = jf.at("shape").get<std::vector<std::int64_t>>();
    f.order = jf.value("order", "column-major");
    const auto n = static_cast<std::size_t>(element_count(f.shape));
    if (pos + 8 * n > bytes.size()) throw std::runtime_error("container: truncated data for '" + f.name + "'");
    f.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, bytes.data() + pos + 8 * i, 8);
      f.values[i] = std::bit_cast<double>(to_little(bits));
    }
    pos += 8 * n;
    c.fields.push_back(std::move(f));
  }
  if (pos != bytes.size()) throw std::runtime_error("container: trailing bytes after data");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode_container(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write-then-rename so an interrupted run never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str());
}

ArrayField matrix_field(std::string name, const Mat& m) {
  ArrayField f;
  f.name = std::move(name);
  f.shape = {m.rows(), m.cols()};
  f.values.assign(m.data(), m.data() + m.size());
  return f;
}

Mat field_matrix(const ArrayField& f) {
  if (f.shape.size() != 2) throw std::runtime_error("container: field '" + f.name + "' is not a matrix");
  const auto r = static_cast<Eigen::Index>(f.shape[0]);
  const auto c = static_cast<Eigen::Index>(f.shape[1]);
  if (f.order == "row-major")
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(f.values.data(),
                                                                                                    r, c);
  return Eigen::Map<const Mat>(f.values.data(), r, c);
}

nlohmann::json spec_to_json(const ModelSpec& s) {
  return {{"n_visible", s.n_visible}, {"n_hidden1", s.n_hidden1}, {"n_hidden2", s.n_hidden2},
          {"n_classes", s.n_classes}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s{j.at("n_visible").get<int>(), j.at("n_hidden1").get<int>(), j.at("n_hidden2").get<int>(),
              j.value("n_classes", 0)};
  s.validate();
  return s;
}

Container dbm_container(const DbmParams& params, const InitScheme& scheme, std::uint64_t seed,
                        const nlohmann::json& extra) {
  params.validate();
  Container c;
  c.kind = "dbm";
  c.meta = extra.is_object() ? extra : nlohmann::json::object();
  c.meta["spec"] = spec_to_json(params.spec());
  c.meta["scheme"] = {{"kind", scheme.kind == InitScheme::Kind::zeros ? "zeros" : "gaussian"},
                      {"stddev", scheme.stddev}};
  c.meta["seed"] = seed;
  params.visit([&](std::string_view name, const double* data, Eigen::Index r, Eigen::Index cols) {
    ArrayField f;
    f.name = std::string(name);
    f.shape = {r, cols};
    f.values.assign(data, data + r * cols);
    c.fields.push_back(std::move(f));
  });
  return c;
}

DbmParams dbm_from_container(const Container& c) {
  if (c.kind != "dbm") throw std::runtime_error("container: expected kind 'dbm', got '" + c.kind + "'");
  DbmParams p = DbmParams::zeros(spec_from_json(c.meta.at("spec")));
  p.visit([&](std::string_view name, double* data, Eigen::Index r, Eigen::Index cols) {
    const auto& f = c.field(name);
    if (f.shape != std::vector<std::int64_t>{r, cols})
      throw std::runtime_error("container: field '" + f.name + "' has the wrong shape");
    std::copy(f.values.begin(), f.values.end(), data);
  });
  p.validate();
  return p;
}

void save_dbm(const std::filesystem::path& path, const DbmParams& params, const InitScheme& scheme,
              std::uint64_t seed, const nlohmann::json& extra) {
  write_container(path, dbm_container(params, scheme, seed, extra));
}

DbmParams load_dbm(const std::filesystem::path& path) { return dbm_from_container(read_container(path)); }

void save_features(const std::filesystem::path& path, const Mat& rows, const nlohmann::json& meta) {
  Container c;
  c.kind = "features";
  c.meta = meta.is_object() ? meta : nlohmann::json::object();
  ArrayField f;
  f.name = "features";
  f.shape = {rows.rows(), rows.cols()};
  f.order = "row-major";
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = rows;
  f.values.assign(rm.data(), rm.data() + rm.size());
  c.fields.push_back(std::move(f));
  write_container(path, c);
}

Mat load_features(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (c.kind != "features") throw std::runtime_error("container: expected kind 'features'");
  return field_matrix(c.field("features"));
}

}  // namespace jdbm
