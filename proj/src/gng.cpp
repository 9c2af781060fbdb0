#include "pairdbn/gng.hpp"

#include <algorithm>
#include <numeric>

#include "pairdbn/error.hpp"
#include "pairdbn/random.hpp"

namespace pairdbn {

void GngParams::validate() const {
  if (max_nodes < 2) throw ConfigError("gng: max_nodes must be >= 2");
  if (insertion_interval < 1) throw ConfigError("gng: insertion_interval must be >= 1");
  if (!(0.0 < neighbor_rate && neighbor_rate < winner_rate && winner_rate < 1.0)) {
    throw ConfigError("gng: need 0 < neighbor_rate < winner_rate < 1");
  }
  if (!(0.0 < split_error_decay && split_error_decay < 1.0)) {
    throw ConfigError("gng: split_error_decay must be in (0, 1)");
  }
  if (!(0.0 < error_decay && error_decay < 1.0)) {
    throw ConfigError("gng: error_decay must be in (0, 1)");
  }
  if (max_edge_age < 1) throw ConfigError("gng: max_edge_age must be >= 1");
  if (epochs < 1) throw ConfigError("gng: epochs must be >= 1");
}

bool GngNode::connected_to(int other) const {
  return std::any_of(edges.begin(), edges.end(),
                     [other](const GngEdge& e) { return e.neighbor == other; });
}

namespace {

class GrowingNeuralGas {
 public:
  explicit GrowingNeuralGas(const GngParams& params) : params_(params) {}

  std::vector<GngNode>& nodes() { return nodes_; }

  void add_node(const Vector& centroid, double error) {
    GngNode node;
    node.id = static_cast<int>(nodes_.size());
    node.centroid = centroid;
    node.error = error;
    nodes_.push_back(std::move(node));
  }

  void present(const Vector& x) {
    // Two nearest nodes.
    int s1 = -1;
    int s2 = -1;
    double d1 = 0.0;
    double d2 = 0.0;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
      const double d = (nodes_[i].centroid - x).squaredNorm();
      if (s1 < 0 || d < d1) {
        s2 = s1;
        d2 = d1;
        s1 = i;
        d1 = d;
      } else if (s2 < 0 || d < d2) {
        s2 = i;
        d2 = d;
      }
    }

    auto& winner = nodes_[s1];
    for (auto& edge : winner.edges) {
      ++edge.age;
      for (auto& back : nodes_[edge.neighbor].edges) {
        if (back.neighbor == s1) back.age = edge.age;
      }
    }
    winner.error += d1;
    winner.centroid += params_.winner_rate * (x - winner.centroid);
    for (const auto& edge : winner.edges) {
      auto& n = nodes_[edge.neighbor].centroid;
      n += params_.neighbor_rate * (x - n);
    }

    connect(s1, s2);
    prune_edges();

    for (auto& node : nodes_) node.error *= params_.error_decay;
  }

  // Removes edgeless nodes, then grows back to previous count + 1.
  void maintain() {
    const std::size_t before = nodes_.size();
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0 && nodes_.size() > 2; --i) {
      if (nodes_[i].edges.empty()) remove_node(i);
    }
    const std::size_t target =
        std::min<std::size_t>(before + 1, static_cast<std::size_t>(params_.max_nodes));
    while (nodes_.size() < target) insert_node();
  }

 private:
  void connect(int a, int b) {
    link(a, b);
    link(b, a);
  }

  void link(int from, int to) {
    auto& edges = nodes_[from].edges;
    auto it = std::find_if(edges.begin(), edges.end(),
                           [to](const GngEdge& e) { return e.neighbor == to; });
    if (it == edges.end()) {
      edges.push_back({to, 0});
    } else {
      it->age = 0;
    }
  }

  void prune_edges() {
    const int max_age = params_.max_edge_age;
    for (auto& node : nodes_) {
      std::erase_if(node.edges, [max_age](const GngEdge& e) { return e.age > max_age; });
    }
  }

  void remove_node(int index) {
    nodes_.erase(nodes_.begin() + index);
    for (auto& node : nodes_) {
      std::erase_if(node.edges, [index](const GngEdge& e) { return e.neighbor == index; });
      for (auto& edge : node.edges) {
        if (edge.neighbor > index) --edge.neighbor;
      }
    }
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) nodes_[i].id = i;
  }

  void insert_node() {
    int q = 0;
    for (int i = 1; i < static_cast<int>(nodes_.size()); ++i) {
      if (nodes_[i].error > nodes_[q].error) q = i;
    }
    int f = -1;
    for (const auto& edge : nodes_[q].edges) {
      if (f < 0 || nodes_[edge.neighbor].error > nodes_[f].error) f = edge.neighbor;
    }
    if (f < 0) {
      // q lost all its edges; split toward its nearest node instead.
      double best = 0.0;
      for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
        if (i == q) continue;
        const double d = (nodes_[i].centroid - nodes_[q].centroid).squaredNorm();
        if (f < 0 || d < best) {
          f = i;
          best = d;
        }
      }
    }
    nodes_[q].error *= params_.split_error_decay;
    nodes_[f].error *= params_.split_error_decay;
    const int r = static_cast<int>(nodes_.size());
    add_node(0.5 * (nodes_[q].centroid + nodes_[f].centroid), nodes_[q].error);
    std::erase_if(nodes_[q].edges, [f](const GngEdge& e) { return e.neighbor == f; });
    std::erase_if(nodes_[f].edges, [q](const GngEdge& e) { return e.neighbor == q; });
    connect(q, r);
    connect(r, f);
  }

  const GngParams& params_;
  std::vector<GngNode> nodes_;
};

}  // namespace

std::vector<GngNode> gng_fit(std::span<const Vector> data, const GngParams& params,
                             const GngObserver& observer) {
  params.validate();
  if (data.size() < 2) throw DataError("gng: need at least 2 data points");
  const auto dim = data.front().size();
  for (const auto& x : data) {
    if (x.size() != dim) throw DataError("gng: data points have mismatched dimensions");
  }

  Rng rng(params.seed);
  GrowingNeuralGas gng(params);

  const std::size_t first = rng.index(data.size());
  std::size_t second = first;
  for (std::size_t attempt = 0; attempt < data.size() && second == first; ++attempt) {
    const std::size_t candidate = rng.index(data.size());
    if (candidate != first && data[candidate] != data[first]) second = candidate;
  }
  if (second == first) second = (first + 1) % data.size();
  gng.add_node(data[first], 0.0);
  gng.add_node(data[second], 0.0);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long signal = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    for (const auto idx : order) {
      gng.present(data[idx]);
      if (++signal % params.insertion_interval == 0) gng.maintain();
      if (observer) observer(gng.nodes());
    }
  }

  auto nodes = std::move(gng.nodes());
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) nodes[i].id = i;
  return nodes;
}

int gng_assign(std::span<const GngNode> nodes, const Vector& point) {
  if (nodes.empty()) throw ConfigError("gng_assign: empty node set");
  int best = -1;
  double best_d = 0.0;
  for (const auto& node : nodes) {
    if (node.centroid.size() != point.size()) {
      throw DataError("gng_assign: point dimension " + std::to_string(point.size()) +
                      " does not match node dimension " + std::to_string(node.centroid.size()));
    }
    const double d = (node.centroid - point).squaredNorm();
    if (best < 0 || d < best_d || (d == best_d && node.id < best)) {
      best = node.id;
      best_d = d;
    }
  }
  return best;
}

double gng_quantization_error(std::span<const GngNode> nodes, std::span<const Vector> data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& x : data) {
    const int id = gng_assign(nodes, x);
    for (const auto& node : nodes) {
      if (node.id == id) {
        total += (node.centroid - x).norm();
        break;
      }
    }
  }
  return total / static_cast<double>(data.size());
}

}  // namespace pairdbn
