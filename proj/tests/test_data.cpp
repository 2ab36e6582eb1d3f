/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <doctest.h>

#include <filesystem>

#include "jdbm/data.hpp"

using namespace jdbm;
namespace fs = std::filesystem;

namespace {

std::string bytes(std::initializer_list<int> b) {
  std::string s;
  for (int x : b) s.push_back(static_cast<char>(x));
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("hand-built image file") {
    // 2 images of 2x3, big-endian header.
    const std::string raw = bytes({0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3,  //
                                   0, 127, 128, 255, 1, 200,                         //
                                   10, 20, 30, 140, 150, 160});
    const IdxArray a = parse_idx(raw);
    CHECK(a.dims == std::vector<std::uint32_t>{2, 2, 3});
    CHECK(a.count() == 2);
    CHECK(a.item_size() == 6);
    CHECK(a.data[3] == 255);
    const Mat bits = binarize(a);
    Mat expect(2, 6);
    expect << 0, 0, 1, 1, 0, 1,  //
        0, 0, 0, 1, 1, 1;
    CHECK(bits == expect);
    CHECK(encode_idx(a) == raw);
  }

  TEST_CASE("label file") {
    const IdxArray a = parse_idx(bytes({0, 0, 8, 1, 0, 0, 0, 3, 7, 0, 9}));
    CHECK(a.dims == std::vector<std::uint32_t>{3});
    CHECK(a.data == std::vector<std::uint8_t>{7, 0, 9});
  }

  TEST_CASE("malformed files") {
    CHECK_THROWS_WITH(parse_idx(bytes({0, 0, 9, 1, 0, 0, 0, 1, 1})), doctest::Contains("bad magic"));
    CHECK_THROWS_WITH(parse_idx(bytes({0, 0, 8, 0})), doctest::Contains("bad magic"));
    CHECK_THROWS_WITH(parse_idx(bytes({0, 0, 8})), doctest::Contains("truncated"));
    CHECK_THROWS_WITH(parse_idx(bytes({0, 0, 8, 1, 0, 0})), doctest::Contains("truncated"));
    CHECK_THROWS_WITH(parse_idx(bytes({0, 0, 8, 1, 0, 0, 0, 3, 1, 2})), doctest::Contains("truncated"));
    CHECK_THROWS_WITH(parse_idx(bytes({0, 0, 8, 1, 0, 0, 0, 1, 1, 2})), doctest::Contains("trailing"));
  }

  TEST_CASE("threshold and bernoulli rules") {
    IdxArray a{{1, 4}, {127, 128, 0, 255}};
    CHECK(binarize(a) == (Mat(1, 4) << 0, 1, 0, 1).finished());
    BinarizeRule r{BinarizeRule::Kind::threshold, 0.5, 0};
    CHECK(binarize(a, r) == (Mat(1, 4) << 1, 1, 0, 1).finished());

    IdxArray big{{200, 50}, std::vector<std::uint8_t>(200 * 50, 64)};
    BinarizeRule b{BinarizeRule::Kind::bernoulli, 0, 42};
    const Mat x = binarize(big, b), y = binarize(big, b);
    CHECK(x == y);
    b.seed = 43;
    CHECK(binarize(big, b) != x);
    CHECK(std::abs(x.mean() - 64.0 / 255.0) < 0.01);  // 10k draws
    CHECK(binarize_kind_from_string("bernoulli") == BinarizeRule::Kind::bernoulli);
    CHECK_THROWS(binarize_kind_from_string("otsu"));
  }

  TEST_CASE("image and label pairs on disk") {
    TempDir dir("jdbm_test_data");
    IdxArray img{{3, 2, 2}, {0, 255, 255, 0, 9, 9, 9, 9, 200, 200, 200, 200}};
    IdxArray lab{{3}, {1, 0, 9}};
    write_idx(dir.path / "img", img);
    write_idx(dir.path / "lab", lab);
    CHECK(load_idx_header(dir.path / "lab").dims == std::vector<std::uint32_t>{3});

    const auto ex = load_idx_pair(dir.path / "img", dir.path / "lab", {});
    REQUIRE(ex.size() == 3);
    CHECK(ex[0].label == 1);
    CHECK(ex[0].v == (Vec(4) << 0, 1, 1, 0).finished());
    CHECK(ex[2].v == Vec::Ones(4));
    CHECK(load_idx_pair(dir.path / "img", dir.path / "lab", {}, 10, 2).size() == 2);
    CHECK_THROWS_WITH(load_idx_pair(dir.path / "img", dir.path / "lab", {}, 5), doctest::Contains("out of range"));

    write_idx(dir.path / "lab2", IdxArray{{2}, {1, 0}});
    CHECK_THROWS_WITH(load_idx_pair(dir.path / "img", dir.path / "lab2", {}), doctest::Contains("3 images but 2"));
    CHECK_THROWS(load_idx(dir.path / "missing"));
  }

  TEST_CASE("synthetic bars") {
    const auto a = make_bars(100, 0.0, 3);
    const auto b = make_bars(100, 0.0, 3);
    int ones = 0, same = 0, constant = 0;
    for (const auto& ex : a) {
      REQUIRE(ex.v.size() == 64);
      const std::size_t i = static_cast<std::size_t>(&ex - a.data());
      ones += ex.label;
      same += ex.v == b[i].v && ex.label == b[i].label;
      // Noise-free rows (class 0) or columns (class 1) are constant.
      bool ok = true;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) ok = ok && ex.v(r * 8 + c) == (ex.label == 0 ? ex.v(r * 8) : ex.v(c));
      constant += ok;
      CHECK(ex.v.sum() >= 8);
      CHECK(ex.v.sum() <= 56);
    }
    CHECK(same == 100);
    CHECK(constant == 100);
    CHECK(ones > 30);
    CHECK(ones < 70);
  }
}
