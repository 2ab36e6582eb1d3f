/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "jdbm/data.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "jdbm/random.hpp"

namespace jdbm {

std::size_t IdxArray::item_size() const {
  std::size_t n = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) n *= dims[i];
  return n;
}

namespace {

std::uint32_t read_be32(std::string_view b, std::size_t at) {
  return (std::uint32_t{static_cast<std::uint8_t>(b[at])} << 24) |
         (std::uint32_t{static_cast<std::uint8_t>(b[at + 1])} << 16) |
         (std::uint32_t{static_cast<std::uint8_t>(b[at + 2])} << 8) | std::uint32_t{static_cast<std::uint8_t>(b[at + 3])};
}

void put_be32(std::string& out, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((x >> s) & 0xff));
}

// Parses the header; returns the offset of the payload.
std::size_t parse_header(std::string_view bytes, IdxArray& a) {
  if (bytes.size() < 4) throw std::runtime_error("idx: truncated header");
  const std::uint32_t magic = read_be32(bytes, 0);
  const std::uint32_t nd = magic & 0xff;
  if ((magic & 0xffffff00u) != 0x00000800u || nd < 1 || nd > 4) {
    std::ostringstream m;
    m << "idx: bad magic 0x" << std::hex << magic;
    throw std::runtime_error(m.str());
  }
  if (bytes.size() < 4 + 4 * nd) throw std::runtime_error("idx: truncated header");
  a.dims.clear();
  for (std::uint32_t i = 0; i < nd; ++i) a.dims.push_back(read_be32(bytes, 4 + 4 * i));
  return 4 + 4 * nd;
}

std::string read_file(const std::filesystem::path& path, std::size_t max_bytes = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (max_bytes == 0) {
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }
  std::string buf(max_bytes, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(max_bytes));
  buf.resize(static_cast<std::size_t>(in.gcount()));
  return buf;
}

}  // namespace

IdxArray parse_idx(std::string_view bytes) {
  IdxArray a;
  const std::size_t off = parse_header(bytes, a);
  std::size_t n = a.count() * a.item_size();
  if (bytes.size() - off < n) throw std::runtime_error("idx: truncated payload");
  if (bytes.size() - off > n) throw std::runtime_error("idx: trailing bytes after payload");
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  return a;
}

IdxArray load_idx(const std::filesystem::path& path) { return parse_idx(read_file(path)); }

IdxArray load_idx_header(const std::filesystem::path& path) {
  IdxArray a;
  parse_header(read_file(path, 4 + 4 * 4), a);
  return a;
}

std::string encode_idx(const IdxArray& a) {
  if (a.dims.empty() || a.dims.size() > 4) throw std::invalid_argument("idx: 1 to 4 dimensions");
  if (a.data.size() != a.count() * a.item_size()) throw std::invalid_argument("idx: data size does not match dims");
  std::string out;
  put_be32(out, 0x00000800u | static_cast<std::uint32_t>(a.dims.size()));
  for (std::uint32_t d : a.dims) put_be32(out, d);
  out.append(a.data.begin(), a.data.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& a) {
  std::ofstream out(path, std::ios::binary);
  const std::string bytes = encode_idx(a);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

BinarizeRule::Kind binarize_kind_from_string(std::string_view s) {
  if (s == "threshold") return BinarizeRule::Kind::threshold;
  if (s == "bernoulli") return BinarizeRule::Kind::bernoulli;
  throw std::invalid_argument("unknown binarization rule: " + std::string(s));
}

Mat binarize(const IdxArray& images, const BinarizeRule& rule) {
  const auto n = static_cast<Eigen::Index>(images.count());
  const auto d = static_cast<Eigen::Index>(images.item_size());
  Mat out(n, d);
  Rng rng(rule.seed);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const double px = images.data[static_cast<std::size_t>(i * d + j)];
      const bool on = rule.kind == BinarizeRule::Kind::threshold ? px > rule.threshold : bernoulli(rng, px / 255.0);
      out(i, j) = on ? 1.0 : 0.0;
    }
  return out;
}

std::vector<Example> load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                                   const BinarizeRule& rule, int n_classes, std::size_t limit) {
  IdxArray img = load_idx(images);
  IdxArray lab = load_idx(labels);
  if (img.dims.size() < 2) throw std::runtime_error("idx: " + images.string() + " is not an image file");
  if (lab.dims.size() != 1) throw std::runtime_error("idx: " + labels.string() + " is not a label file");
  if (img.count() != lab.count()) {
    std::ostringstream m;
    m << "idx: " << img.count() << " images but " << lab.count() << " labels";
    throw std::runtime_error(m.str());
  }
  if (limit > 0 && limit < img.count()) {
    img.dims[0] = static_cast<std::uint32_t>(limit);
    img.data.resize(limit * img.item_size());
    lab.dims[0] = static_cast<std::uint32_t>(limit);
    lab.data.resize(limit);
  }
  const Mat bits = binarize(img, rule);
  std::vector<Example> out;
  out.reserve(img.count());
  for (std::size_t i = 0; i < img.count(); ++i) {
    const int y = lab.data[i];
    if (y >= n_classes) throw std::runtime_error("idx: label " + std::to_string(y) + " out of range");
    out.push_back({bits.row(static_cast<Eigen::Index>(i)).transpose(), y});
  }
  return out;
}

std::vector<Example> make_bars(std::size_t n, double noise, std::uint64_t seed) {
  constexpr int side = 8;
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(uniform_index(rng, 2));
    std::uint32_t on = 0;
    int count = 0;
    while (count < 1 || count > side - 1) {
      on = 0;
      count = 0;
      for (int b = 0; b < side; ++b)
        if (bernoulli(rng, 0.5)) on |= 1u << b, ++count;
    }
    Vec v(side * side);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        const bool bar = ((on >> (cls == 0 ? r : c)) & 1u) != 0;
        v(r * side + c) = (bar != bernoulli(rng, noise)) ? 1.0 : 0.0;
      }
    out.push_back({std::move(v), cls});
  }
  return out;
}

}  // namespace jdbm
