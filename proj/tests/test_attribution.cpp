#include <doctest.h>

#include <numeric>

#include "acervo/attribution.hpp"
#include "acervo/error.hpp"
#include "ig_oracle.hpp"

using namespace acervo;

namespace {

AttributionConfig cosine_config(const Vector& reference, std::size_t steps) {
  AttributionConfig c;
  c.steps = steps;
  c.reference = reference;
  return c;
}

// Identity head with a 1-dimensional output: F(x) = w . x through dot_with_reference.
HeadModel linear_scalar_head(const Vector& w) {
  HeadModel m;
  m.kind = HeadKind::linear;
  m.first = DenseLayer(w.size(), 1);
  m.first.weight = w;
  return m;
}

}  // namespace

TEST_CASE("linear head is exact for any step count") {
  const Vector w = {0.5, -1.25, 2.0, 0.0, 3.5};
  const Vector x = {1.0, 2.0, -1.0, 4.0, 0.5}, b = {0.5, 0.0, 0.0, 1.0, -0.5};
  const HeadModel m = linear_scalar_head(w);
  for (std::size_t steps : {1u, 2u, 7u, 256u}) {
    AttributionConfig c;
    c.steps = steps;
    c.baseline = b;
    c.reference = {1.0};
    c.output = ScalarOutput::dot_with_reference;
    const auto r = integrated_gradients(m, x, c);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(r.attributions[i] == doctest::Approx(w[i] * (x[i] - b[i])).epsilon(1e-14));
    CHECK(r.residual <= 1e-12);
    CHECK_FALSE(r.zero_baseline);
  }
}

TEST_CASE("coordinates equal to the baseline get zero attribution") {
  const auto inst = ig_oracle::random_instance(3);
  AttributionConfig c = cosine_config(inst.reference, 64);
  Vector base = inst.x;
  base[2] += 1.5;
  c.baseline = base;
  const auto r = integrated_gradients(inst.model, inst.x, c);
  for (std::size_t i = 0; i < inst.x.size(); ++i)
    if (i != 2) CHECK(r.attributions[i] == 0.0);
  CHECK(r.attributions[2] != 0.0);
}

TEST_CASE("two-layer head agrees with a fine oracle within the right-endpoint error") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = ig_oracle::random_instance(seed);
    const std::size_t m = 256;
    const auto r = integrated_gradients(inst.model, inst.x, cosine_config(inst.reference, m));
    const Vector zero(inst.x.size(), 0.0);
    const auto at_x = ig_oracle::cosine_to_reference(inst.model, inst.x, inst.reference);
    const auto at_b = ig_oracle::cosine_to_reference(inst.model, zero, inst.reference);
    CHECK(r.f_input == doctest::Approx(at_x.f).epsilon(1e-12));
    CHECK(r.f_baseline == doctest::Approx(at_b.f).epsilon(1e-12));
    const double sum = std::accumulate(r.attributions.begin(), r.attributions.end(), 0.0);
    CHECK(r.residual == doctest::Approx(std::abs(sum - (at_x.f - at_b.f))).epsilon(1e-9));

    // Leading Euler-Maclaurin term of the right-endpoint rule: (g(1) - g(0)) / 2m,
    // g(t) = dF/dt along the straight path.
    double g1 = 0.0, g0 = 0.0;
    for (std::size_t i = 0; i < inst.x.size(); ++i) {
      g1 += at_x.grad[i] * inst.x[i];
      g0 += at_b.grad[i] * inst.x[i];
    }
    const double predicted = (g1 - g0) / (2.0 * m);
    CHECK(sum - (at_x.f - at_b.f) == doctest::Approx(predicted).epsilon(0.05));

    const auto fine = ig_oracle::integrated_gradients(inst.model, inst.x, zero, inst.reference, 65536);
    for (std::size_t i = 0; i < fine.size(); ++i) {
      const double coord = inst.x[i] * (at_x.grad[i] - at_b.grad[i]) / (2.0 * m);
      CHECK(std::abs(r.attributions[i] - fine[i] - coord) <= 0.05 * std::abs(coord) + 1e-7);
    }
  }
}

TEST_CASE("residual shrinks as the step count doubles") {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto inst = ig_oracle::random_instance(seed);
    double prev = integrated_gradients(inst.model, inst.x, cosine_config(inst.reference, 8)).residual;
    for (std::size_t m = 16; m <= 1024; m *= 2) {
      const double cur = integrated_gradients(inst.model, inst.x, cosine_config(inst.reference, m)).residual;
      CHECK(cur <= prev + 1e-9);
      prev = cur;
    }
  }
}

TEST_CASE("symmetric features receive equal attributions") {
  auto inst = ig_oracle::random_instance(40);
  // Make input columns 1 and 4 identical and give them identical values.
  auto& l1 = inst.model.first;
  for (std::size_t o = 0; o < l1.out; ++o) l1.weight[o * l1.in + 4] = l1.weight[o * l1.in + 1];
  inst.x[4] = inst.x[1];
  const auto r = integrated_gradients(inst.model, inst.x, cosine_config(inst.reference, 128));
  CHECK(r.attributions[1] == r.attributions[4]);
}

TEST_CASE("group attributions") {
  const Vector w = {1.0, 2.0, 3.0, 4.0};
  const Vector x = {1.0, 1.0, 2.0, -1.0};
  AttributionConfig c;
  c.steps = 3;
  c.reference = {1.0};
  c.output = ScalarOutput::dot_with_reference;
  const auto r = integrated_gradients(linear_scalar_head(w), x, c);

  const auto halves = group_attributions(r, {{0, "a"}, {1, "a"}, {2, "b"}, {3, "b"}});
  CHECK(halves.at("a") == doctest::Approx(3.0));
  CHECK(halves.at("b") == doctest::Approx(2.0));

  const auto single = group_attributions(r, {{0, "all"}, {1, "all"}, {2, "all"}, {3, "all"}});
  CHECK(std::abs(single.at("all") - (r.f_input - r.f_baseline)) <= r.residual + 1e-12);

  const auto identity = group_attributions(r, {{0, "0"}, {1, "1"}, {2, "2"}, {3, "3"}});
  for (std::size_t i = 0; i < 4; ++i) CHECK(identity.at(std::to_string(i)) == r.attributions[i]);

  CHECK_THROWS_AS(group_attributions(r, {{0, "a"}, {1, "a"}, {2, "b"}}), Error);

  const Json report = attribution_report(r, &halves);
  CHECK(report.at("steps") == 3);
  CHECK(report.at("baseline") == "zero");
  CHECK(report.at("groups").at("a") == doctest::Approx(3.0));
  CHECK(report.at("attributions").size() == 4);
}

TEST_CASE("zero head output on the path names the step") {
  const HeadModel id = identity_head(2);
  AttributionConfig c = cosine_config({1.0, 0.0}, 4);
  try {
    integrated_gradients(id, Vector{1.0, 1.0}, c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numeric);
    CHECK(std::string(e.what()).find("t=0") != std::string::npos);
  }
  c.baseline = Vector{1.0, 0.0};
  try {
    integrated_gradients(id, Vector{-1.0, 0.0}, c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("t=2") != std::string::npos);
  }
}

TEST_CASE("attribution input validation") {
  const auto inst = ig_oracle::random_instance(1);
  CHECK_THROWS_AS(integrated_gradients(inst.model, inst.x, cosine_config(Vector(6, 0.0), 8)), Error);
  CHECK_THROWS_AS(integrated_gradients(inst.model, inst.x, cosine_config(inst.reference, 0)), Error);
  CHECK_THROWS_AS(integrated_gradients(inst.model, Vector(3, 1.0), cosine_config(inst.reference, 8)), Error);
  AttributionConfig same = cosine_config(inst.reference, 8);
  same.baseline = inst.x;
  CHECK_THROWS_AS(integrated_gradients(inst.model, inst.x, same), Error);
}

TEST_CASE("scalar_output gradient matches the hand-written one") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const auto inst = ig_oracle::random_instance(seed);
    const auto lib = scalar_output(inst.model, inst.x, cosine_config(inst.reference, 1));
    const auto ref = ig_oracle::cosine_to_reference(inst.model, inst.x, inst.reference);
    CHECK(lib.value == doctest::Approx(ref.f).epsilon(1e-12));
    for (std::size_t i = 0; i < ref.grad.size(); ++i) CHECK(lib.grad[i] == doctest::Approx(ref.grad[i]).epsilon(1e-10));
  }
}
