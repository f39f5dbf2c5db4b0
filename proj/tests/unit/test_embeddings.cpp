#include <cmath>
#include <random>

#include "doctest.h"
#include "hml/embeddings.hpp"
#include "unit/support.hpp"

using hml::Error;
using hml::ErrorKind;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an hml::Error");
  return ErrorKind::Usage;
}

}  // namespace

TEST_CASE("load: two tokens, dim 2") {
  testing::TempDir dir;
  testing::write_text(dir / "e.txt", "on 1 0\nhas 0 1\n");
  auto table = hml::load_embeddings(dir / "e.txt", {"on", "has"});
  CHECK(table.dim() == 2);
  CHECK(table.size() == 2);
  CHECK(table.at("on") == hml::Vector{1.0, 0.0});
  CHECK(table.at("has") == hml::Vector{0.0, 1.0});
}

TEST_CASE("load: multi-word entries average their words") {
  testing::TempDir dir;
  testing::write_text(dir / "e.txt", "parked 1 0\non 0 1\n");
  auto table = hml::load_embeddings(dir / "e.txt", {"parked on"});
  CHECK(table.size() == 1);
  CHECK(table.at("parked on") == hml::Vector{0.5, 0.5});
}

TEST_CASE("load: table holds exactly the vocabulary") {
  testing::TempDir dir;
  testing::write_text(dir / "e.txt", "on 1 0\nhas 0 1\nwith 1 1\n");
  auto table = hml::load_embeddings(dir / "e.txt", {"with"});
  CHECK(table.size() == 1);
  CHECK(table.contains("with"));
  CHECK_FALSE(table.contains("on"));
}

TEST_CASE("load: error paths") {
  testing::TempDir dir;
  testing::write_text(dir / "e.txt", "on 1 0\nhas 0 1\n");
  SUBCASE("missing token is named") {
    try {
      hml::load_embeddings(dir / "e.txt", {"on", "riding"});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingToken);
      CHECK(std::string(e.what()).find("riding") != std::string::npos);
    }
  }
  SUBCASE("inconsistent dimensions") {
    testing::write_text(dir / "bad.txt", "on 1 0\nhas 0 1 2\n");
    CHECK(kind_of([&] { hml::load_embeddings(dir / "bad.txt", {"on"}); }) == ErrorKind::Format);
  }
  SUBCASE("zero vector") {
    testing::write_text(dir / "zero.txt", "on 0 0\nhas 0 1\n");
    CHECK(kind_of([&] { hml::load_embeddings(dir / "zero.txt", {"on"}); }) == ErrorKind::Validation);
  }
  SUBCASE("non-numeric component") {
    testing::write_text(dir / "nan.txt", "on 1 x\n");
    CHECK(kind_of([&] { hml::load_embeddings(dir / "nan.txt", {"on"}); }) == ErrorKind::Format);
  }
}

TEST_CASE("table rejects wrong length and zero vectors") {
  hml::EmbeddingTable table(3);
  CHECK(kind_of([&] { table.insert("a", {1.0, 2.0}); }) == ErrorKind::Format);
  CHECK(kind_of([&] { table.insert("a", {0.0, 0.0, 0.0}); }) == ErrorKind::Validation);
  CHECK(kind_of([&] { (void)table.at("a"); }) == ErrorKind::MissingToken);
}

TEST_CASE("shipped toy embedding file has 50 tokens") {
  std::vector<std::string> words;
  std::ifstream in(std::string(HML_DATA_DIR) + "/toy_embeddings.txt");
  std::string line;
  while (std::getline(in, line)) words.push_back(line.substr(0, line.find(' ')));
  REQUIRE(words.size() == 50);
  auto table = hml::load_embeddings(std::string(HML_DATA_DIR) + "/toy_embeddings.txt", words);
  CHECK(table.size() == 50);
  CHECK(table.dim() == 8);
}

TEST_CASE("cosine examples") {
  const hml::Vector a{3, 4};
  CHECK(hml::cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hml::cosine_similarity(hml::Vector{1, 0}, hml::Vector{0, 1}) == 0.0);
  // 8 / (3 * 3)
  CHECK(std::abs(hml::cosine_similarity(hml::Vector{1, 2, 2}, hml::Vector{2, 1, 2}) - 8.0 / 9.0) < 1e-15);
}

TEST_CASE("cosine errors") {
  CHECK(kind_of([] { hml::cosine_similarity(hml::Vector{0, 0}, hml::Vector{1, 0}); }) == ErrorKind::Domain);
  CHECK(kind_of([] { hml::cosine_similarity(hml::Vector{1, 0}, hml::Vector{1, 0, 0}); }) == ErrorKind::Shape);
}

TEST_CASE("cosine properties on random vectors") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 12;
    auto u = testing::random_vector(rng, n);
    auto v = testing::random_vector(rng, n);
    const double c = hml::cosine_similarity(u, v);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(std::abs(hml::cosine_similarity(u, u) - 1.0) <= 1e-12);
    CHECK(hml::cosine_similarity(v, u) == c);

    const double a = scale(rng), b = scale(rng);
    hml::Vector au = u, bv = v;
    for (double& x : au) x *= a;
    for (double& x : bv) x *= b;
    CHECK(std::abs(hml::cosine_similarity(au, bv) - c) <= 1e-12);
  }
}
