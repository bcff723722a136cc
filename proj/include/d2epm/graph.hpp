#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace d2epm {

// undirected snapshots, each edge stored once as (i,j) with i < j
struct TemporalGraph {
  std::uint32_t num_vertices = 0;
  std::uint32_t num_steps = 0;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> snapshots;
  std::vector<std::string> vertex_ids;  // empty when vertices are anonymous

  void sort_edges() {
    for (auto& snap : snapshots) std::sort(snap.begin(), snap.end());
  }

  bool has_edge(std::uint32_t t, std::uint32_t i, std::uint32_t j) const {
    if (i == j || t >= num_steps) return false;
    if (i > j) std::swap(i, j);
    const auto& snap = snapshots[t];
    return std::binary_search(snap.begin(), snap.end(), std::make_pair(i, j));
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& snap : snapshots) n += snap.size();
    return n;
  }

  std::uint64_t pair_count() const {
    std::uint64_t n = num_vertices;
    return n * (n - 1) / 2;
  }

  std::uint64_t grid_size() const { return pair_count() * num_steps; }
};

struct MaskEntry {
  std::uint32_t t, i, j;
  std::uint8_t label;

  friend bool operator<(const MaskEntry& a, const MaskEntry& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  }
};

// held-out (t, i<j) grid entries; labels recorded at split time
struct HeldOutMask {
  std::vector<MaskEntry> entries;  // sorted
  double fraction = 0.0;

  bool contains(std::uint32_t t, std::uint32_t i, std::uint32_t j) const {
    if (i > j) std::swap(i, j);
    MaskEntry probe{t, i, j, 0};
    auto it = std::lower_bound(entries.begin(), entries.end(), probe);
    return it != entries.end() && it->t == t && it->i == i && it->j == j;
  }
};

inline TemporalGraph training_view(const TemporalGraph& graph, const HeldOutMask& mask) {
  TemporalGraph out;
  out.num_vertices = graph.num_vertices;
  out.num_steps = graph.num_steps;
  out.vertex_ids = graph.vertex_ids;
  out.snapshots.resize(graph.num_steps);
  for (std::uint32_t t = 0; t < graph.num_steps; ++t) {
    for (const auto& e : graph.snapshots[t]) {
      if (!mask.contains(t, e.first, e.second)) out.snapshots[t].push_back(e);
    }
  }
  return out;
}

}  // namespace d2epm
