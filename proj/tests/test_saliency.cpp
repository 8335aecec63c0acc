#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <vector>

#include "salvo/rng.hpp"
#include "salvo/saliency.hpp"

using namespace salvo;

namespace {

// Oracle: literal transcription of the two filtering loops — weight every
// pixel, then replace every pixel by the median over its class.
SaliencyMap oracleFilter(const SaliencyMap& sal, const SemanticMap& sem,
                         const ClassWeights& w) {
  const int h = sal.height(), wd = sal.width();
  Image weighted(h, wd);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wd; ++x)
      weighted(y, x) = std::clamp(w.at(sem.labels(y, x)) * sal.values(y, x), 0.0, 1.0);

  std::map<int, std::vector<double>> byClass;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wd; ++x) byClass[sem.labels(y, x)].push_back(double(weighted(y, x)));
  std::map<int, double> med;
  for (auto& [cls, vals] : byClass) {
    std::sort(vals.begin(), vals.end());
    const size_t n = vals.size();
    med[cls] = n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
  }
  SaliencyMap out;
  out.values.resize(h, wd);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wd; ++x) out.values(y, x) = med[sem.labels(y, x)];
  return out;
}

SaliencyMap makeSal(std::initializer_list<std::initializer_list<double>> rows) {
  SaliencyMap s;
  const int h = int(rows.size());
  const int w = int(rows.begin()->size());
  s.values.resize(h, w);
  int y = 0;
  for (const auto& row : rows) {
    int x = 0;
    for (double v : row) s.values(y, x++) = float(v);
    ++y;
  }
  return s;
}

SemanticMap makeSem(std::initializer_list<std::initializer_list<int>> rows, int classCount) {
  SemanticMap s;
  const int h = int(rows.size());
  const int w = int(rows.begin()->size());
  s.labels.resize(h, w);
  int y = 0;
  for (const auto& row : rows) {
    int x = 0;
    for (int v : row) s.labels(y, x++) = v;
    ++y;
  }
  s.classCount = classCount;
  return s;
}

}  // namespace

TEST_CASE("weightSaliency: identity weights leave the map unchanged") {
  const SaliencyMap sal = makeSal({{0.1, 0.9}, {0.4, 0.2}});
  const SemanticMap sem = makeSem({{0, 1}, {1, 0}}, 2);
  const SaliencyMap out = weightSaliency(sal, sem, ClassWeights{});
  CHECK((out.values - sal.values).abs().maxCoeff() == doctest::Approx(0.f));
}

TEST_CASE("weightSaliency: zero weight wipes out that class") {
  const SaliencyMap sal = makeSal({{0.3, 0.9}, {0.4, 0.7}});
  const SemanticMap sem = makeSem({{0, 1}, {0, 1}}, 2);  // class 0 plays the wall
  ClassWeights w;
  w.weights[0] = 0.0;
  const SaliencyMap out = weightSaliency(sal, sem, w);
  CHECK(out.values(0, 0) == doctest::Approx(0.f));
  CHECK(out.values(1, 0) == doctest::Approx(0.f));
  CHECK(out.values(0, 1) == doctest::Approx(0.9f));
  CHECK(out.values(1, 1) == doctest::Approx(0.7f));
}

TEST_CASE("weightSaliency: elementwise product by hand") {
  const SaliencyMap sal = makeSal({{0.2, 0.4}, {0.6, 0.8}});
  const SemanticMap sem = makeSem({{0, 0}, {1, 1}}, 2);
  ClassWeights w;
  w.weights[0] = 0.5;
  w.weights[1] = 1.0;
  const SaliencyMap out = weightSaliency(sal, sem, w);
  CHECK(out.values(0, 0) == doctest::Approx(0.1f));
  CHECK(out.values(0, 1) == doctest::Approx(0.2f));
  CHECK(out.values(1, 0) == doctest::Approx(0.6f));
  CHECK(out.values(1, 1) == doctest::Approx(0.8f));
}

TEST_CASE("weightSaliency: dimension mismatch is an input error") {
  const SaliencyMap sal = makeSal({{0.2, 0.4}});
  const SemanticMap sem = makeSem({{0}, {1}}, 2);
  CHECK_THROWS_AS(weightSaliency(sal, sem, ClassWeights{}), InputError);
}

TEST_CASE("classMedianSmooth: constant class stays put") {
  const SaliencyMap sal = makeSal({{0.4, 0.4}, {0.4, 0.4}});
  const SemanticMap sem = makeSem({{0, 0}, {0, 0}}, 1);
  const SaliencyMap out = classMedianSmooth(sal, sem);
  CHECK((out.values - 0.4f).abs().maxCoeff() < 1e-7f);
}

TEST_CASE("classMedianSmooth: even-count median is the mean of the middle pair") {
  const SaliencyMap sal = makeSal({{0.1, 0.2}, {0.3, 0.9}});
  const SemanticMap sem = makeSem({{0, 0}, {0, 0}}, 1);
  const SaliencyMap out = classMedianSmooth(sal, sem);
  CHECK(out.values(0, 0) == doctest::Approx(0.25f));
  CHECK(out.values(1, 1) == doctest::Approx(0.25f));
}

TEST_CASE("classMedianSmooth: per-class medians by brute force") {
  const SaliencyMap sal = makeSal({{0.1, 0.5}, {0.9, 0.4}});
  const SemanticMap sem = makeSem({{0, 0}, {0, 1}}, 2);
  const SaliencyMap out = classMedianSmooth(sal, sem);
  CHECK(out.values(0, 0) == doctest::Approx(0.5f));  // median{0.1,0.5,0.9}
  CHECK(out.values(0, 1) == doctest::Approx(0.5f));
  CHECK(out.values(1, 0) == doctest::Approx(0.5f));
  CHECK(out.values(1, 1) == doctest::Approx(0.4f));  // median{0.4}
}

TEST_CASE("filterSaliency: uniform map with unit weights is a fixed point") {
  const SaliencyMap sal = makeSal({{0.5, 0.5}, {0.5, 0.5}});
  const SemanticMap sem = makeSem({{0, 1}, {1, 0}}, 2);
  const SaliencyMap out = filterSaliency(sal, sem, ClassWeights{});
  CHECK((out.values - 0.5f).abs().maxCoeff() < 1e-7f);
}

TEST_CASE("filterSaliency: all-zero weights annihilate the map") {
  const SaliencyMap sal = makeSal({{0.5, 0.8}, {0.2, 0.9}});
  const SemanticMap sem = makeSem({{0, 1}, {1, 0}}, 2);
  ClassWeights w;
  w.weights[0] = 0;
  w.weights[1] = 0;
  const SaliencyMap out = filterSaliency(sal, sem, w);
  CHECK(out.values.abs().maxCoeff() == doctest::Approx(0.f));
}

TEST_CASE("filterSaliency equals the two-pass oracle on random maps") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 3 + int(rng.uniformInt(62));
    const int h = 3 + int(rng.uniformInt(62));
    const int classes = 1 + int(rng.uniformInt(8));
    SaliencyMap sal;
    sal.values.resize(h, w);
    SemanticMap sem;
    sem.labels.resize(h, w);
    sem.classCount = classes;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        sal.values(y, x) = float(rng.uniform());
        sem.labels(y, x) = int(rng.uniformInt(uint64_t(classes)));
      }
    ClassWeights cw;
    for (int c = 0; c < classes; ++c) cw.weights[c] = rng.uniform(0, 1.2);

    const SaliencyMap got = filterSaliency(sal, sem, cw);
    const SaliencyMap want = oracleFilter(sal, sem, cw);
    CHECK((got.values - want.values).abs().maxCoeff() == doctest::Approx(0.f));

    // per-class constancy
    std::map<int, double> classValue;
    bool constant = true;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto [it, fresh] = classValue.emplace(sem.labels(y, x), got.values(y, x));
        if (!fresh && it->second != got.values(y, x)) constant = false;
      }
    CHECK(constant);

    // idempotence of the smoothing stage
    const SaliencyMap twice = classMedianSmooth(got, sem);
    CHECK((twice.values - got.values).abs().maxCoeff() == doctest::Approx(0.f));

    // range preservation for weights <= 1 holds; clamped otherwise
    CHECK(got.values.minCoeff() >= 0.f);
    CHECK(got.values.maxCoeff() <= 1.f);
  }
}

TEST_CASE("filterSaliency: raising a class weight never lowers its pixels") {
  Rng rng(77);
  SaliencyMap sal;
  sal.values.resize(8, 8);
  SemanticMap sem;
  sem.labels.resize(8, 8);
  sem.classCount = 3;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      sal.values(y, x) = float(rng.uniform());
      sem.labels(y, x) = int(rng.uniformInt(3));
    }
  ClassWeights lo, hi;
  lo.weights = {{0, 0.3}, {1, 0.8}, {2, 0.5}};
  hi.weights = lo.weights;
  hi.weights[1] = 0.95;
  const SaliencyMap a = filterSaliency(sal, sem, lo);
  const SaliencyMap b = filterSaliency(sal, sem, hi);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if (sem.labels(y, x) == 1) CHECK(b.values(y, x) >= a.values(y, x) - 1e-7f);
}

TEST_CASE("loadClassWeights parses pairs and comments, rejects negatives") {
  const std::string path = "test_weights.txt";
  {
    std::ofstream out(path);
    out << "# comment line\n0 0.1\n2 0.5   # trailing comment\n\n7 1.5\n";
  }
  const ClassWeights w = loadClassWeights(path);
  CHECK(w.at(0) == doctest::Approx(0.1));
  CHECK(w.at(2) == doctest::Approx(0.5));
  CHECK(w.at(7) == doctest::Approx(1.5));
  CHECK(w.at(42) == doctest::Approx(1.0));  // default for unlisted classes
  {
    std::ofstream out(path);
    out << "0 -0.5\n";
  }
  CHECK_THROWS_AS(loadClassWeights(path), InputError);
  std::remove(path.c_str());
}
