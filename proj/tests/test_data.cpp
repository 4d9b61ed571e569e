#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vropt/data.hpp>
#include <vropt/sampling.hpp>

#include "test_support.hpp"

#include <cmath>
#include <sstream>
#include <string>

using namespace vropt;

TEST_CASE("parses a minimal line") {
  std::istringstream in("+1 1:0.5 3:-2.0\n");
  const Dataset d = parse_libsvm(in);
  REQUIRE(d.size() == 1);
  CHECK(d.dim == 3);
  CHECK(d.samples[0].label == 1);
  CHECK(d.samples[0].features[0] == 0.5);
  CHECK(d.samples[0].features[1] == 0.0);
  CHECK(d.samples[0].features[2] == -2.0);
}

TEST_CASE("dimension comes from the largest index anywhere") {
  std::istringstream in("1 2:1\n-1 1:3\n");
  const Dataset d = parse_libsvm(in);
  CHECK(d.dim == 2);
  CHECK(d.samples[0].features[0] == 0.0);
  CHECK(d.samples[0].features[1] == 1.0);
  CHECK(d.samples[1].features[0] == 3.0);
  CHECK(d.samples[1].features[1] == 0.0);
}

TEST_CASE("zero-one labels map to minus-one plus-one") {
  std::istringstream in("0 1:1\n1 1:2\n0 1:3\n");
  const Dataset d = parse_libsvm(in);
  CHECK(d.samples[0].label == -1);
  CHECK(d.samples[1].label == 1);
  CHECK(d.samples[2].label == -1);
}

TEST_CASE("accepts CRLF endings and blank lines") {
  std::istringstream in("1 1:1\r\n\r\n-1 2:2\r\n\n");
  const Dataset d = parse_libsvm(in);
  REQUIRE(d.size() == 2);
  CHECK(d.samples[1].features[1] == 2.0);
}

TEST_CASE("malformed input names the offending line") {
  auto expect_error = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_libsvm(in);
      FAIL_CHECK("no exception for: " << text);
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find(needle) != std::string::npos);
    }
  };
  expect_error("abc 1:1\n", "line 1");
  expect_error("1 1:1\n+1 oops\n", "line 2");
  expect_error("1 2:1 2:3\n", "line 1");        // non-increasing index
  expect_error("1 3:1 2:3\n", "line 1");        // decreasing index
  expect_error("1 0:1\n", "line 1");            // indices are 1-based
  expect_error("2 1:1\n", "line 1");            // label out of alphabet
  expect_error("1 1:\n", "line 1");             // missing value
  expect_error("0 1:1\n-1 1:1\n", "mixes");     // mixed label conventions
  expect_error("", "empty");
  expect_error("\n\n", "empty");
}

TEST_CASE("serialization round-trips bit for bit") {
  RngStream rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    Dataset d;
    d.dim = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    const std::size_t n = 1 + uniform_index(rng, 8);
    for (std::size_t k = 0; k < n; ++k) {
      Sample s;
      s.features.resize(d.dim);
      for (Eigen::Index j = 0; j < d.dim; ++j)
        s.features[j] = rng.next_gaussian() * std::pow(10.0, rep % 7 - 3);
      s.label = rng.next_double() < 0.5 ? -1 : 1;
      d.samples.push_back(std::move(s));
    }
    std::ostringstream out;
    serialize_libsvm(d, out);
    std::istringstream back(out.str());
    const Dataset r = parse_libsvm(back);
    REQUIRE(r.size() == d.size());
    CHECK(r.dim == d.dim);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(r.samples[k].label == d.samples[k].label);
      CHECK(support::max_abs_diff(r.samples[k].features,
                                  d.samples[k].features) == 0.0);
    }
  }
}

TEST_CASE("serialization writes explicit zeros") {
  std::istringstream in("1 3:5\n");
  const Dataset d = parse_libsvm(in);
  std::ostringstream out;
  serialize_libsvm(d, out);
  CHECK(out.str() == "+1 1:0 2:0 3:5\n");
}

TEST_CASE("normalize_unit") {
  Dataset d;
  d.dim = 2;
  d.samples = {support::make_sample({3.0, 4.0}, 1)};
  const Dataset u = normalize_unit(d);
  CHECK(u.samples[0].features[0] == 0.6);
  CHECK(u.samples[0].features[1] == 0.8);

  const Dataset uu = normalize_unit(u);
  CHECK(support::max_abs_diff(uu.samples[0].features,
                              u.samples[0].features) <= 1e-15);

  Dataset z;
  z.dim = 2;
  z.samples = {support::make_sample({1.0, 0.0}, 1),
               support::make_sample({0.0, 0.0}, 1)};
  try {
    normalize_unit(z);
    FAIL_CHECK("zero-norm sample accepted");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("synthetic data is reproducible and unit-norm") {
  const Dataset a = synth_logistic(40, 6, 99);
  const Dataset b = synth_logistic(40, 6, 99);
  REQUIRE(a.size() == 40);
  CHECK(a.dim == 6);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.samples[k].label == b.samples[k].label);
    CHECK(support::max_abs_diff(a.samples[k].features,
                                b.samples[k].features) == 0.0);
    CHECK(support::close(a.samples[k].features.norm(), 1.0, 1e-14));
    CHECK((a.samples[k].label == 1 || a.samples[k].label == -1));
  }
  const Dataset c = synth_logistic(40, 6, 100);
  double diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    diff += support::max_abs_diff(a.samples[k].features,
                                  c.samples[k].features);
  CHECK(diff > 0.0);
}

TEST_CASE("synthetic degenerate size") {
  const Dataset d = synth_logistic(1, 1, 5);
  REQUIRE(d.size() == 1);
  CHECK(std::abs(d.samples[0].features[0]) == 1.0);
}

TEST_CASE("synthetic labels stay balanced across seeds") {
  // Neither class collapses: between 30% and 70% positive at n = 500.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = synth_logistic(500, 20, seed);
    int pos = 0;
    for (const Sample& s : d.samples) pos += s.label == 1;
    CHECK(pos >= 150);
    CHECK(pos <= 350);
  }
}
