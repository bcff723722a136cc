#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace d2epm {

struct ScoredEntry {
  double score = 0.0;
  bool label = false;
};

// rank-sum AUROC with midranks for tied scores
inline double auroc(const std::vector<ScoredEntry>& entries) {
  std::size_t n_pos = 0;
  for (const auto& e : entries) n_pos += e.label ? 1 : 0;
  std::size_t n_neg = entries.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auroc needs at least one positive and one negative");
  }
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].score < entries[b].score;
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && entries[order[j]].score == entries[order[i]].score) ++j;
    double midrank = 0.5 * static_cast<double>(i + j + 1);  // ranks are 1-based
    for (std::size_t s = i; s < j; ++s) {
      if (entries[order[s]].label) rank_sum_pos += midrank;
    }
    i = j;
  }
  double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels must have equal length");
  }
  std::vector<ScoredEntry> entries(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) entries[i] = {scores[i], labels[i] != false};
  return auroc(entries);
}

}  // namespace d2epm
