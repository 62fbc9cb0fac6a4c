#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sepsa/data.hpp"
#include "sepsa/model.hpp"

using namespace sepsa;
using namespace sepsa::data;

namespace {

Dataset counting_dataset(std::size_t n, std::size_t d = 2) {
  Dataset ds;
  ds.name = "count";
  ds.d = d;
  ds.d_o = 1;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s{Vec(d), Vec{static_cast<double>(i)}};
    for (std::size_t j = 0; j < d; ++j) s.x[j] = static_cast<double>(i * d + j);
    ds.samples.push_back(s);
  }
  return ds;
}

std::vector<double> ids(const Dataset& ds) {
  std::vector<double> out;
  for (const auto& s : ds.samples) out.push_back(s.y[0]);
  return out;
}

DataErrc csv_error(const std::string& text, std::vector<std::string> targets) {
  std::istringstream is(text);
  try {
    parse_csv(is, targets);
  } catch (const DataError& e) {
    return e.code();
  }
  FAIL("expected DataError");
  return DataErrc::Io;
}

std::string idx_bytes(const IdxImages& img) {
  std::ostringstream os;
  write_idx_images(os, img);
  return os.str();
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("parse_csv") {
  std::istringstream is("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const std::vector<std::string> targets{"y"};
  const Dataset ds = parse_csv(is, targets, "toy");
  CHECK(ds.size() == 3);
  CHECK(ds.d == 2);
  CHECK(ds.d_o == 1);
  CHECK(ds.samples[1].x == Vec{4, 5});
  CHECK(ds.samples[2].y == Vec{9});
}

TEST_CASE("parse_csv handles target order and quoted headers") {
  std::istringstream is("\"Y2\",X1,\"Y1\"\r\n1,2,3\r\n");
  const std::vector<std::string> targets{"Y1", "Y2"};
  const Dataset ds = parse_csv(is, targets);
  CHECK(ds.d == 1);
  CHECK(ds.samples[0].y == Vec{3, 1});
}

TEST_CASE("parse_csv errors") {
  CHECK(csv_error("a,y\n1,oops\n", {"y"}) == DataErrc::Malformed);
  CHECK(csv_error("a,y\n1\n", {"y"}) == DataErrc::Malformed);
  CHECK(csv_error("a,b\n1,2\n", {"y"}) == DataErrc::MissingColumn);
  CHECK(csv_error("", {"y"}) == DataErrc::Malformed);

  std::istringstream is("a,y\n1,2\n3,x\n");
  try {
    parse_csv(is, std::vector<std::string>{"y"});
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("y") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", std::vector<std::string>{"y"}), DataError);
}

TEST_CASE("csv round trip is exact") {
  const auto synth = gen_synthetic({3, 4, 2, 20, 0.1, 7});
  std::stringstream ss;
  write_csv(ss, synth.data);
  const std::vector<std::string> targets{"y0", "y1"};
  const Dataset back = parse_csv(ss, targets);
  REQUIRE(back.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(back.samples[i].x == synth.data.samples[i].x);
    CHECK(back.samples[i].y == synth.data.samples[i].y);
  }
}

TEST_CASE("idx fixture decodes to bytes / 255") {
  IdxImages img{2, 2, 3, {0, 1, 2, 3, 4, 255, 128, 64, 32, 16, 8, 7}};
  std::istringstream is(idx_bytes(img));
  const IdxImages back = read_idx_images(is);
  CHECK(back.count == 2);
  CHECK(back.rows == 2);
  CHECK(back.cols == 3);
  CHECK(back.pixels == img.pixels);

  const std::string s = idx_bytes(img);
  CHECK(static_cast<unsigned char>(s[2]) == 0x08);
  CHECK(static_cast<unsigned char>(s[3]) == 0x03);

  std::ostringstream labels;
  write_idx_labels(labels, std::vector<std::uint8_t>{3, 9});
  std::istringstream lis(labels.str());
  CHECK(read_idx_labels(lis) == std::vector<std::uint8_t>{3, 9});
}

TEST_CASE("load_idx scales and one-hot encodes") {
  const auto dir = std::filesystem::temp_directory_path() / "sepsa_idx_fixture";
  std::filesystem::create_directories(dir);
  IdxImages img{2, 1, 2, {0, 51, 255, 102}};
  {
    std::ofstream f(dir / "img", std::ios::binary);
    write_idx_images(f, img);
    std::ofstream l(dir / "lbl", std::ios::binary);
    write_idx_labels(l, std::vector<std::uint8_t>{1, 9});
  }
  const Dataset ds = load_idx((dir / "img").string(), (dir / "lbl").string());
  REQUIRE(ds.size() == 2);
  CHECK(ds.d == 2);
  CHECK(ds.d_o == 10);
  CHECK(ds.samples[0].x[1] == 51.0 / 255.0);
  CHECK(ds.samples[1].x[0] == 1.0);
  CHECK(ds.samples[0].y[1] == 1.0);
  CHECK(ds.samples[1].y[9] == 1.0);
  CHECK(std::count(ds.samples[1].y.begin(), ds.samples[1].y.end(), 0.0) == 9);

  {
    std::ofstream l(dir / "lbl3", std::ios::binary);
    write_idx_labels(l, std::vector<std::uint8_t>{1, 2, 3});
  }
  try {
    load_idx((dir / "img").string(), (dir / "lbl3").string());
    FAIL("expected count mismatch");
  } catch (const DataError& e) {
    CHECK(e.code() == DataErrc::CountMismatch);
  }
}

TEST_CASE("idx errors are distinct") {
  std::string bytes = idx_bytes(IdxImages{1, 2, 2, {1, 2, 3, 4}});
  {
    std::string bad = bytes;
    bad[3] = 0x01;
    std::istringstream is(bad);
    try {
      read_idx_images(is);
      FAIL("expected bad magic");
    } catch (const DataError& e) {
      CHECK(e.code() == DataErrc::BadMagic);
    }
  }
  {
    std::istringstream is(bytes.substr(0, bytes.size() - 1));
    try {
      read_idx_images(is);
      FAIL("expected truncation");
    } catch (const DataError& e) {
      CHECK(e.code() == DataErrc::Truncated);
    }
  }
}

TEST_CASE("standardize") {
  Dataset ds;
  ds.d = 2;
  ds.d_o = 1;
  ds.samples = {{Vec{0, 5}, Vec{1}}, {Vec{2, 5}, Vec{2}}};
  const Dataset z = standardize(ds);
  CHECK(z.samples[0].x == Vec{-1, 0});
  CHECK(z.samples[1].x == Vec{1, 0});
  CHECK(z.samples[0].y == Vec{1});

  const Dataset again = standardize(z);
  for (std::size_t i = 0; i < 2; ++i) CHECK(linalg::max_abs_diff(again.samples[i].x, z.samples[i].x) <= 1e-12);
}

TEST_CASE("test split is transformed with training statistics") {
  const auto synth = gen_synthetic({4, 3, 1, 200, 0.1, 3});
  const auto [train, test] = split(synth.data, {0.7, 1});
  const Normalization norm = fit_normalization(train);
  const Dataset t2 = apply_normalization(test, norm);
  for (std::size_t i = 0; i < test.size(); ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(t2.samples[i].x[j] == (test.samples[i].x[j] - norm.mean[j]) / norm.stddev[j]);
  // The test part alone would have given different statistics.
  const Normalization own = fit_normalization(test);
  CHECK(linalg::max_abs_diff(own.mean, norm.mean) > 1e-6);
}

TEST_CASE("split") {
  const Dataset ds = counting_dataset(645);
  const auto [train, test] = split(ds, {0.8, 0});
  CHECK(train.size() == 516);
  CHECK(test.size() == 129);

  const auto [t491, t154] = split(ds, {0.76, 0});
  CHECK(t491.size() == 491);
  CHECK(t154.size() == 154);

  const auto [again, again_test] = split(ds, {0.8, 0});
  CHECK(ids(again) == ids(train));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (std::size_t n : {1u, 2u, 17u, 100u}) {
      for (double f : {0.1, 0.5, 0.76, 0.99}) {
        const auto [a, b] = split(counting_dataset(n), {f, seed});
        CHECK(a.size() == static_cast<std::size_t>(std::ceil(f * n - 1e-9)));
        CHECK(a.size() + b.size() == n);
        std::multiset<double> all;
        for (double v : ids(a)) all.insert(v);
        for (double v : ids(b)) all.insert(v);
        CHECK(all.size() == n);
        CHECK(std::set<double>(all.begin(), all.end()).size() == n);
      }
    }
  }
}

TEST_CASE("batch stream") {
  const Dataset ds = counting_dataset(491);
  BatchStream online(ds.size(), 1, 0);
  std::multiset<std::size_t> seen;
  for (std::size_t i = 0; i < 491; ++i) {
    const auto b = online.next_indices();
    REQUIRE(b.size() == 1);
    seen.insert(b[0]);
  }
  CHECK(online.epoch_finished());
  CHECK(seen.size() == 491);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 491);

  BatchStream mini(491, 32, 4);
  CHECK(mini.batches_per_epoch() == 16);
  for (int e = 1; e <= 2; ++e) {
    std::set<std::size_t> covered;
    for (int b = 0; b < 16; ++b) {
      const auto idx = mini.next_indices();
      CHECK(idx.size() == (b < 15 ? 32u : 11u));
      CHECK(mini.epoch() == static_cast<std::size_t>(e));
      covered.insert(idx.begin(), idx.end());
    }
    CHECK(covered.size() == 491);
  }

  BatchStream a(100, 7, 9), b(100, 7, 9), c(100, 7, 10);
  bool differs = false;
  for (int i = 0; i < 40; ++i) {
    const auto ia = a.next_indices();
    CHECK(ia == b.next_indices());
    if (ia != c.next_indices()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("next_batch references the dataset rows") {
  const Dataset ds = counting_dataset(10);
  BatchStream s(10, 4, 0);
  const model::Batch b = next_batch(s, ds);
  REQUIRE(b.size() == 4);
  for (const Sample& smp : b) CHECK(&smp >= ds.samples.data());
}

TEST_CASE("synthetic generator") {
  const auto exact = gen_synthetic({5, 6, 2, 100, 0.0, 1});
  for (const auto& s : exact.data.samples) CHECK(model::loss(exact.planted, s) == 0.0);

  const auto a = gen_synthetic({5, 6, 2, 50, 0.05, 2});
  const auto b = gen_synthetic({5, 6, 2, 50, 0.05, 2});
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.data.samples[i].x == b.data.samples[i].x);
    CHECK(a.data.samples[i].y == b.data.samples[i].y);
  }

  // E||y - W* h||^2 = d_o sigma^2 for the planted model.
  const auto noisy = gen_synthetic({4, 5, 2, 20000, 0.1, 3});
  double mse = 0;
  for (const auto& s : noisy.data.samples) mse += 2 * model::loss(noisy.planted, s);
  mse /= noisy.data.size();
  CHECK(mse == doctest::Approx(2 * 0.01).epsilon(0.05));
}

}  // TEST_SUITE
