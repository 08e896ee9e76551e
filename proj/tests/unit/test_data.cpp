#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cludi/binary_io.hpp"
#include "cludi/data.hpp"
#include "cludi/error.hpp"

using namespace cludi;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("cludi_test_" + std::to_string(::getpid()) + "_" + name);
}

FeatureDataset small_dataset(bool labels) {
  FeatureDataset d;
  d.features.resize(3, 2);
  d.features << 1.5, -2.0, 0.1, 3.25, 1e-300, 7.0;
  if (labels) d.labels = std::vector<int>{0, 2, 1};
  return d;
}

}  // namespace

TEST_CASE("mixture generator") {
  MixtureSpec spec;
  spec.clusters = 3;
  spec.dim = 4;
  spec.per_cluster = 10;
  const auto a = generate_mixture(spec);
  CHECK(a.size() == 30);
  CHECK(a.dim() == 4);
  REQUIRE(a.labels);
  CHECK((*a.labels)[0] == 0);
  CHECK((*a.labels)[29] == 2);
  const auto b = generate_mixture(spec);
  CHECK((a.features - b.features).norm() == 0.0);
  spec.seed = 8;
  CHECK((generate_mixture(spec).features - a.features).norm() > 0.0);
}

TEST_CASE("CLDF round trip") {
  for (bool labels : {false, true}) {
    const auto d = small_dataset(labels);
    const auto p = temp_path("rt.cldf");
    write_cldf(d, p);
    const auto r = read_cldf(p);
    CHECK((r.features - d.features).norm() == 0.0);
    CHECK(r.labels.has_value() == labels);
    if (labels) CHECK(*r.labels == *d.labels);
    fs::remove(p);
  }
}

TEST_CASE("CLDF f32 payload") {
  const auto d = small_dataset(true);
  const auto p = temp_path("f32.cldf");
  write_cldf(d, p, CldfDtype::f32);
  const auto r = read_cldf(p);
  CHECK(r.features(0, 0) == 1.5);
  CHECK(r.features(1, 0) == Approx(0.1).epsilon(1e-7));
  CHECK(fs::file_size(p) == 25 + 6 * 4 + 3 * 4);
  fs::remove(p);
}

TEST_CASE("CLDF rejects malformed files") {
  const auto d = small_dataset(true);
  const auto p = temp_path("bad.cldf");
  write_cldf(d, p);
  const auto bytes = io::read_file(p);

  auto corrupt = [&](auto edit) {
    auto b = bytes;
    edit(b);
    io::write_file(p, b);
    CHECK_THROWS_AS(read_cldf(p), FormatError);
  };
  corrupt([](auto& b) { b[0] = 'X'; });                       // magic
  corrupt([](auto& b) { b[4] = 2; });                         // version
  corrupt([](auto& b) { b[6] = 0x80; });                      // unknown flag
  corrupt([](auto& b) { b[24] = 7; });                        // dtype
  corrupt([](auto& b) { b.resize(b.size() - 1); });           // truncated labels
  corrupt([](auto& b) { b.push_back(0); });                   // trailing byte
  corrupt([](auto& b) { b.resize(10); });                     // truncated header
  fs::remove(p);
  CHECK_THROWS(read_cldf(temp_path("missing.cldf")));
}

TEST_CASE("CLDF rejects non-finite values on write") {
  auto d = small_dataset(false);
  d.features(0, 0) = std::nan("");
  CHECK_THROWS_AS(write_cldf(d, temp_path("nan.cldf")), InvalidArgument);
}

TEST_CASE("CSV round trip with and without labels") {
  const auto p = temp_path("rt.csv");
  const auto d = small_dataset(true);
  write_csv_features(d, p);
  const auto r = read_csv_features(p, true);
  CHECK((r.features - d.features).norm() == 0.0);
  CHECK(*r.labels == *d.labels);

  std::ofstream(p) << "1,2\n3,4\n";
  const auto plain = read_csv_features(p, false);
  CHECK(plain.size() == 2);
  CHECK(plain.features(1, 0) == 3.0);
  fs::remove(p);
}

TEST_CASE("CSV errors name the location") {
  const auto p = temp_path("bad.csv");
  std::ofstream(p) << "1,2\n3\n";
  CHECK_THROWS_WITH(read_csv_features(p, false), doctest::Contains("row 2"));
  std::ofstream(p) << "1,2\n3,abc\n";
  CHECK_THROWS_WITH(read_csv_features(p, false), doctest::Contains("column 2"));
  fs::remove(p);
}

TEST_CASE("standardize") {
  auto d = small_dataset(false);
  d.features.col(1).setConstant(4.0);
  standardize(d);
  CHECK(d.features.col(0).mean() == Approx(0.0).epsilon(1e-12));
  const double var = d.features.col(0).squaredNorm() / 3.0;
  CHECK(var == Approx(1.0));
  CHECK(d.features.col(1).norm() == 0.0);
}
