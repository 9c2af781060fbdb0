#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "pairdbn/error.hpp"
#include "pairdbn/gng.hpp"
#include "pairdbn/random.hpp"

using namespace pairdbn;

namespace {

Vector point(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

std::vector<Vector> two_blobs(std::uint64_t seed, std::size_t per_blob = 500, double sigma = 0.02) {
  Rng rng(seed);
  std::vector<Vector> data;
  for (std::size_t k = 0; k < per_blob; ++k) {
    data.push_back(point(rng.normal(0.2, sigma), rng.normal(0.2, sigma)));
    data.push_back(point(rng.normal(0.8, sigma), rng.normal(0.8, sigma)));
  }
  return data;
}

// Lloyd's algorithm with k=2, seeded at the two mutually farthest points.
std::vector<int> two_means(const std::vector<Vector>& data) {
  std::size_t a = 0;
  std::size_t b = 0;
  double far = -1.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = i + 1; j < data.size(); ++j) {
      const double d = (data[i] - data[j]).squaredNorm();
      if (d > far) {
        far = d;
        a = i;
        b = j;
      }
    }
  }
  Vector c0 = data[a];
  Vector c1 = data[b];
  std::vector<int> label(data.size(), -1);
  for (bool changed = true; changed;) {
    changed = false;
    Vector s0 = Vector::Zero(2);
    Vector s1 = Vector::Zero(2);
    int n0 = 0;
    int n1 = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int l = (data[i] - c0).squaredNorm() <= (data[i] - c1).squaredNorm() ? 0 : 1;
      if (l != label[i]) changed = true;
      label[i] = l;
      if (l == 0) {
        s0 += data[i];
        ++n0;
      } else {
        s1 += data[i];
        ++n1;
      }
    }
    c0 = s0 / n0;
    c1 = s1 / n1;
  }
  return label;
}

// Fraction of points whose node's majority 2-means label equals their own.
double agreement(const std::vector<GngNode>& nodes, const std::vector<Vector>& data,
                 const std::vector<int>& labels) {
  std::map<int, std::array<int, 2>> votes;
  std::vector<int> assigned(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    assigned[i] = gng_assign(nodes, data[i]);
    ++votes[assigned[i]][static_cast<std::size_t>(labels[i])];
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& v = votes[assigned[i]];
    const int majority = v[1] > v[0] ? 1 : 0;
    if (majority == labels[i]) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("identical points collapse every node onto them") {
  std::vector<Vector> data(300, point(0.5, 0.5));
  const auto nodes = gng_fit(data, GngParams{});
  REQUIRE(nodes.size() >= 2);
  for (const auto& n : nodes) CHECK((n.centroid - point(0.5, 0.5)).norm() <= 1e-3);
}

TEST_CASE("two blobs agree with the 2-means oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = two_blobs(seed);
    const auto labels = two_means(data);
    GngParams params;
    params.seed = seed;
    CHECK(agreement(gng_fit(data, params), data, labels) >= 0.99);

    params.max_nodes = 2;
    const auto pair = gng_fit(data, params);
    REQUIRE(pair.size() == 2);
    CHECK(agreement(pair, data, labels) >= 0.99);
  }
}

TEST_CASE("max_nodes caps growth") {
  const auto data = two_blobs(9);
  GngParams params;
  params.max_nodes = 2;
  CHECK(gng_fit(data, params).size() == 2);
  params.max_nodes = 7;
  CHECK(gng_fit(data, params).size() <= 7);
}

TEST_CASE("node count, edge ages and edge symmetry hold at every step") {
  Rng rng(4);
  std::vector<Vector> data;
  for (int k = 0; k < 1500; ++k) data.push_back(point(rng.uniform(), rng.uniform()));
  GngParams params;
  params.max_nodes = 12;
  params.epochs = 2;
  std::size_t previous = 0;
  bool monotone = true;
  bool capped = true;
  bool ages_ok = true;
  bool symmetric = true;
  gng_fit(data, params, [&](std::span<const GngNode> nodes) {
    if (nodes.size() < previous) monotone = false;
    previous = nodes.size();
    if (nodes.size() > static_cast<std::size_t>(params.max_nodes)) capped = false;
    for (const auto& n : nodes) {
      for (const auto& e : n.edges) {
        if (e.age > params.max_edge_age) ages_ok = false;
        const auto& other = nodes[static_cast<std::size_t>(e.neighbor)];
        const auto back = std::find_if(other.edges.begin(), other.edges.end(),
                                       [&](const GngEdge& b) { return b.neighbor == n.id; });
        if (back == other.edges.end() || back->age != e.age) symmetric = false;
      }
    }
  });
  CHECK(monotone);
  CHECK(capped);
  CHECK(ages_ok);
  CHECK(symmetric);
  CHECK(previous == 12);
}

TEST_CASE("fit is bit-reproducible for a fixed seed") {
  const auto data = two_blobs(2);
  GngParams params;
  params.seed = 77;
  const auto a = gng_fit(data, params);
  const auto b = gng_fit(data, params);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].centroid == b[i].centroid);
    CHECK(a[i].error == b[i].error);
    CHECK(a[i].edges.size() == b[i].edges.size());
  }
}

TEST_CASE("quantization error does not grow with max_nodes") {
  Rng rng(8);
  std::vector<Vector> data;
  for (int k = 0; k < 2000; ++k) data.push_back(point(rng.uniform(), rng.normal(0.5, 0.2)));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GngParams small;
    small.seed = seed;
    small.max_nodes = 5;
    GngParams large = small;
    large.max_nodes = 20;
    CHECK(gng_quantization_error(gng_fit(data, large), data) <=
          gng_quantization_error(gng_fit(data, small), data));
  }
}

TEST_CASE("assign") {
  std::vector<GngNode> nodes(8);
  for (int i = 0; i < 8; ++i) {
    nodes[i].id = i;
    nodes[i].centroid = point(i, 0.0);
  }
  SUBCASE("point on a centroid") { CHECK(gng_assign(nodes, point(5.0, 0.0)) == 5); }
  SUBCASE("ties go to the lowest id") {
    nodes[3].centroid = point(0.0, 1.0);
    nodes[7].centroid = point(0.0, -1.0);
    for (int i : {0, 1, 2, 4, 5, 6}) nodes[i].centroid = point(10.0 + i, 10.0);
    CHECK(gng_assign(nodes, point(0.0, 0.0)) == 3);
  }
  SUBCASE("matches an exhaustive scan") {
    Rng rng(12);
    for (auto& n : nodes) n.centroid = point(rng.uniform(), rng.uniform());
    for (int k = 0; k < 1000; ++k) {
      const Vector p = point(rng.uniform(), rng.uniform());
      int best = 0;
      for (int i = 1; i < 8; ++i) {
        if ((nodes[i].centroid - p).norm() < (nodes[best].centroid - p).norm()) best = i;
      }
      CHECK(gng_assign(nodes, p) == best);
    }
  }
  SUBCASE("dimension mismatch") {
    Vector p(3);
    p << 0, 0, 0;
    CHECK_THROWS_AS(gng_assign(nodes, p), DataError);
  }
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(gng_fit(std::vector<Vector>{point(0, 0)}, GngParams{}), DataError);
  Vector odd(3);
  odd << 1, 2, 3;
  CHECK_THROWS_AS(gng_fit(std::vector<Vector>{point(0, 0), odd}, GngParams{}), DataError);
  GngParams bad;
  bad.neighbor_rate = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = GngParams{};
  bad.max_nodes = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = GngParams{};
  bad.error_decay = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
