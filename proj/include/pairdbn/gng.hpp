#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pairdbn/types.hpp"

namespace pairdbn {

/// Growing Neural Gas hyperparameters.
struct GngParams {
  int max_nodes = 20;
  int insertion_interval = 100;
  double winner_rate = 0.2;
  double neighbor_rate = 0.006;
  int max_edge_age = 50;
  double split_error_decay = 0.5;
  double error_decay = 0.995;
  int epochs = 5;
  std::uint64_t seed = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct GngEdge {
  int neighbor = 0;
  int age = 0;
};

/// One node ("letter"). Node ids are positions in the returned node set.
struct GngNode {
  int id = 0;
  Vector centroid;
  double error = 0.0;
  std::vector<GngEdge> edges;

  bool connected_to(int other) const;
};

/// Called after every input signal with the current node set.
using GngObserver = std::function<void(std::span<const GngNode>)>;

/// Fritzke-style GNG. Each epoch visits the data in a seeded random order;
/// every `insertion_interval` signals edgeless nodes are removed and nodes
/// are inserted at the highest-error edge until the count exceeds the
/// previous interval's count by one (capped at max_nodes), so the node count
/// never shrinks.
std::vector<GngNode> gng_fit(std::span<const Vector> data, const GngParams& params,
                             const GngObserver& observer = {});

/// Id of the nearest node (Euclidean); ties go to the lowest id.
int gng_assign(std::span<const GngNode> nodes, const Vector& point);

/// Mean Euclidean distance from each point to its assigned node.
double gng_quantization_error(std::span<const GngNode> nodes, std::span<const Vector> data);

}  // namespace pairdbn
