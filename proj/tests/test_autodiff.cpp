#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>

#include "duetsep/error.hpp"
#include "duetsep/toy/autodiff.hpp"
#include "duetsep/toy/separator.hpp"
#include "duetsep/toy/synth.hpp"
#include "support.hpp"

using namespace duetsep;
using namespace duetsep::toy;

namespace {

constexpr double kStep = 1e-4;
constexpr double kTolerance = 1e-4;

// Fresh seed per run unless pinned through the environment.
std::uint64_t run_seed() {
  static const std::uint64_t seed = []() -> std::uint64_t {
    if (const char* env = std::getenv("DUETSEP_TEST_SEED")) return std::strtoull(env, nullptr, 10);
    return static_cast<std::uint64_t>(std::random_device{}());
  }();
  return seed;
}

using Inputs = std::vector<std::vector<double>>;
using Builder = std::function<Graph::Id(Graph&, const std::vector<Graph::Id>&)>;

struct Probe {
  std::vector<Shape> shapes;
  Builder build;
};

// <out, r> for a fixed random r; returns the value and fills grads when asked.
double evaluate(const Probe& p, const Inputs& in, const std::vector<double>* r, Inputs* grads,
                std::vector<double>* r_out) {
  Graph g;
  std::vector<Graph::Id> ids;
  for (std::size_t i = 0; i < in.size(); ++i) ids.push_back(g.constant(p.shapes[i], in[i]));
  const Graph::Id out = p.build(g, ids);
  const auto& y = g.value(out);
  std::vector<double> seed = r != nullptr ? *r : testing::noise(y.size(), run_seed() ^ 0x5eed);
  if (r_out != nullptr) *r_out = seed;
  double v = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) v += y[i] * seed[i];
  if (grads != nullptr) {
    g.backward(out, seed);
    grads->clear();
    for (auto id : ids) grads->push_back(g.grad(id));
  }
  return v;
}

// Norm-wise relative error between analytic and central-difference gradients.
double fd_error(const Probe& p, const Inputs& in) {
  Inputs analytic;
  std::vector<double> r;
  evaluate(p, in, nullptr, &analytic, &r);
  double num = 0.0, den = 0.0;
  Inputs x = in;
  for (std::size_t k = 0; k < x.size(); ++k) {
    REQUIRE(analytic[k].size() == x[k].size());
    for (std::size_t j = 0; j < x[k].size(); ++j) {
      const double v = x[k][j];
      x[k][j] = v + kStep;
      const double lp = evaluate(p, x, &r, nullptr, nullptr);
      x[k][j] = v - kStep;
      const double lm = evaluate(p, x, &r, nullptr, nullptr);
      x[k][j] = v;
      const double fd = (lp - lm) / (2 * kStep);
      num += (fd - analytic[k][j]) * (fd - analytic[k][j]);
      den += std::max(fd * fd, analytic[k][j] * analytic[k][j]);
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

Inputs random_inputs(const std::vector<Shape>& shapes, std::uint64_t salt) {
  Inputs in;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    in.push_back(testing::noise(element_count(shapes[i]), run_seed() + 31 * salt + i));
  return in;
}

void check_probe(const Probe& p, Inputs in) {
  INFO("seed " << run_seed());
  const double err = fd_error(p, in);
  CHECK(err < kTolerance);
}

void check_probe(const Probe& p, std::uint64_t salt) { check_probe(p, random_inputs(p.shapes, salt)); }

}  // namespace

TEST_SUITE_BEGIN("gradients");

TEST_CASE("finite differences: conv1d") {
  for (auto [stride, pad] : {std::pair{1, 0}, std::pair{2, 1}, std::pair{4, 2}}) {
    Probe p{{{3, 17, 2}, {4, 3, 5}, {4}},
            [=](Graph& g, const auto& v) { return g.conv1d(v[0], v[1], v[2], stride, pad); }};
    check_probe(p, stride);
  }
}

TEST_CASE("finite differences: conv_transpose1d") {
  for (auto [stride, crop] : {std::pair{1, 0}, std::pair{2, 1}, std::pair{4, 2}}) {
    Probe p{{{3, 6, 2}, {3, 2, 8}, {2}},
            [=](Graph& g, const auto& v) { return g.conv_transpose1d(v[0], v[1], v[2], stride, crop); }};
    check_probe(p, 10 + stride);
  }
}

TEST_CASE("finite differences: linear") {
  Probe p{{{5, 7}, {3, 5}, {3}}, [](Graph& g, const auto& v) { return g.linear(v[0], v[1], v[2]); }};
  check_probe(p, 20);
}

TEST_CASE("finite differences: elementwise ops") {
  Probe sig{{{4, 6}}, [](Graph& g, const auto& v) { return g.sigmoid(v[0]); }};
  check_probe(sig, 30);
  Probe add{{{4, 6}, {4, 6}}, [](Graph& g, const auto& v) { return g.add(v[0], v[1]); }};
  check_probe(add, 31);
  Probe mul{{{4, 6}, {4, 6}}, [](Graph& g, const auto& v) { return g.mul(v[0], v[1]); }};
  check_probe(mul, 32);
  Probe sc{{{4, 6}}, [](Graph& g, const auto& v) { return g.scale(v[0], -2.5); }};
  check_probe(sc, 33);
  // Chained so that mul sees two non-constant paths of the same node.
  Probe sq{{{10}}, [](Graph& g, const auto& v) { return g.mul(v[0], g.sigmoid(v[0])); }};
  check_probe(sq, 34);
}

TEST_CASE("finite differences: relu away from the kink") {
  Probe p{{{40}}, [](Graph& g, const auto& v) { return g.relu(v[0]); }};
  auto in = random_inputs(p.shapes, 40);
  for (double& x : in[0])
    if (std::abs(x) < 0.05) x += x < 0 ? -0.05 : 0.05;
  check_probe(p, in);
}

TEST_CASE("finite differences: shape ops") {
  Probe rs{{{2, 3, 4}}, [](Graph& g, const auto& v) { return g.sigmoid(g.reshape(v[0], {6, 4})); }};
  check_probe(rs, 50);
  Probe cat{{{2, 5}, {3, 5}}, [](Graph& g, const auto& v) { return g.sigmoid(g.concat({v[0], v[1]})); }};
  check_probe(cat, 51);
  Probe sel{{{3, 2, 4}}, [](Graph& g, const auto& v) { return g.sigmoid(g.select(v[0], 1)); }};
  check_probe(sel, 52);
}

TEST_CASE("finite differences: masked_istft") {
  const StftConfig c(32, 8);
  const auto x = testing::noise(200, run_seed() + 60);
  const auto spec = stft(x, 8000, c);
  Probe p{{{spec.bins(), spec.frames}}, [&](Graph& g, const auto& v) { return g.masked_istft(v[0], spec); }};
  check_probe(p, 61);
}

TEST_CASE("finite differences: pit_l1 away from kinks") {
  const std::size_t n = 30;
  Rng rng(run_seed() + 70);
  std::vector<double> r1(n), r2(n), e1(n), e2(n);
  for (std::size_t i = 0; i < n; ++i) {
    r1[i] = rng.normal();
    r2[i] = rng.normal();
    double d1, d2;
    do {
      d1 = rng.uniform(-0.5, 0.5);
      d2 = rng.uniform(-0.5, 0.5);
    } while (std::abs(d1) < 0.01 || std::abs(d2) < 0.01 || std::abs(d1 + d2) < 0.01 ||
             std::abs(r1[i] + d1 - r2[i]) < 0.01 || std::abs(r2[i] + d2 - r1[i]) < 0.01);
    e1[i] = r1[i] + d1;
    e2[i] = r2[i] + d2;
  }
  Probe p{{{n}, {n}}, [&](Graph& g, const auto& v) { return g.pit_l1(v[0], v[1], r1, r2, {}); }};
  check_probe(p, {e1, e2});
}

TEST_CASE("parameter gradients accumulate by name order") {
  ParameterSet ps;
  const auto wi = ps.add("w", {2, 1, 3});
  const auto bi = ps.add("b", {2});
  ps[wi].value = {0.1, -0.2, 0.3, 0.4, 0.5, -0.6};
  ps[bi].value = {0.01, -0.02};
  const auto x = testing::noise(12, 3);
  auto loss = [&](Gradients* grads) {
    Graph g(&ps);
    const auto y = g.sigmoid(g.conv1d(g.constant({1, 12, 1}, x), g.parameter(wi), g.parameter(bi), 1, 1));
    double s = 0.0;
    for (double v : g.value(y)) s += v;
    if (grads != nullptr) {
      g.backward(y, std::vector<double>(g.value(y).size(), 1.0));
      g.accumulate_parameter_gradients(*grads);
    }
    return s;
  };
  Gradients grads = zero_gradients(ps);
  loss(&grads);
  Gradients twice = grads;
  accumulate(twice, grads);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    for (std::size_t j = 0; j < ps[k].value.size(); ++j) {
      const double v = ps[k].value[j];
      ps[k].value[j] = v + kStep;
      const double lp = loss(nullptr);
      ps[k].value[j] = v - kStep;
      const double lm = loss(nullptr);
      ps[k].value[j] = v;
      CHECK(std::abs((lp - lm) / (2 * kStep) - grads[k][j]) < kTolerance * std::max(1.0, std::abs(grads[k][j])));
      CHECK(twice[k][j] == 2.0 * grads[k][j]);
    }
  }
  CHECK(ps.index_of("b") == bi);
  CHECK_THROWS_AS(ps.index_of("missing"), InvalidArgument);
}

TEST_CASE("concat backward splits the upstream gradient") {
  Graph g;
  const auto a = g.constant({2, 3}, testing::noise(6, 1));
  const auto b = g.constant({4, 3}, testing::noise(12, 2));
  const auto c = g.concat({a, b});
  const auto up = testing::noise(18, 3);
  g.backward(c, up);
  const auto& ga = g.grad(a);
  const auto& gb = g.grad(b);
  for (std::size_t i = 0; i < 6; ++i) CHECK(ga[i] == up[i]);
  for (std::size_t i = 0; i < 12; ++i) CHECK(gb[i] == up[6 + i]);
  CHECK(testing::energy(ga) + testing::energy(gb) == doctest::Approx(testing::energy(up)).epsilon(1e-15));
}

TEST_CASE("relu passes gradients at positive inputs") {
  Graph g;
  const auto x = g.constant({4}, {0.5, 1.0, 2.0, 3.0});
  const auto y = g.relu(x);
  const std::vector<double> up{1.5, -2.0, 0.25, 7.0};
  g.backward(y, up);
  CHECK(g.grad(x) == up);
}

TEST_CASE("shape errors are reported") {
  Graph g;
  const auto x = g.constant({2, 5, 1}, std::vector<double>(10, 0.0));
  const auto w = g.constant({3, 4, 2}, std::vector<double>(24, 0.0));
  const auto b = g.constant({3}, std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(g.conv1d(x, w, b, 1, 0), InvalidArgument);
  CHECK_THROWS_AS(g.constant({2, 2}, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(g.add(x, b), InvalidArgument);
  CHECK_THROWS_AS(g.select(x, 2), InvalidArgument);
}

namespace {

// Central difference on a piece where the loss is smooth. A ReLU or L1 kink
// inside [w - h, w + h] makes the estimates at h and h/2 disagree, so the
// step shrinks until they match.
template <class Loss>
double smooth_difference(double& w, Loss& loss) {
  const double v = w;
  auto central = [&](double h) {
    w = v + h;
    const double lp = loss(nullptr);
    w = v - h;
    const double lm = loss(nullptr);
    w = v;
    return (lp - lm) / (2 * h);
  };
  double wide = central(1e-4), narrow = wide;
  for (double h = 5e-5; h > 1e-8; h /= 2) {
    narrow = central(h);
    if (std::abs(narrow - wide) <= 1e-6 * std::abs(narrow) + 1e-13) break;
    wide = narrow;
  }
  return narrow;
}

}  // namespace

TEST_CASE("finite differences: end-to-end separator loss") {
  ScoreParams sp;
  sp.duration = 2.0;
  const auto duet = synth_duet(generate_score(sp, run_seed() + 80), {}, run_seed() + 80);
  Separator model(SeparatorConfig{}, run_seed() + 81);
  Rng rng(run_seed() + 82);
  for (auto& p : model.params().all())
    for (double& v : p.value) v += 0.05 * rng.normal();
  const auto planes = model.planes(duet.rolls);
  const auto s1 = duet.stems[0].channel(0), s2 = duet.stems[1].channel(0);
  const auto mix = duet.mixture.channel(0);

  auto loss = [&](Gradients* grads) {
    Graph g(&model.params());
    const auto out = model.forward(g, mix, planes);
    const auto l = g.pit_l1(out[0], out[1], s1, s2, {});
    if (grads != nullptr) {
      g.backward(l);
      g.accumulate_parameter_gradients(*grads);
    }
    return g.value(l)[0];
  };
  Gradients grads = zero_gradients(model.params());
  loss(&grads);

  INFO("seed " << run_seed());
  for (std::size_t k = 0; k < model.params().size(); ++k) {
    auto& p = model.params()[k];
    std::vector<std::size_t> picks;
    std::size_t arg = 0;
    for (std::size_t j = 1; j < grads[k].size(); ++j)
      if (std::abs(grads[k][j]) > std::abs(grads[k][arg])) arg = j;
    picks.push_back(arg);
    for (int t = 0; t < 2; ++t) picks.push_back(static_cast<std::size_t>(rng.uniform_int(0, p.value.size() - 1)));
    double num = 0.0, den = 0.0;
    for (std::size_t j : picks) {
      const double fd = smooth_difference(p.value[j], loss);
      num += (fd - grads[k][j]) * (fd - grads[k][j]);
      den += std::max(fd * fd, grads[k][j] * grads[k][j]);
    }
    INFO(p.name);
    INFO(p.name << " relative error " << std::sqrt(num / den));
    CHECK(std::sqrt(num / den) < kTolerance);
  }
}
TEST_SUITE_END();
