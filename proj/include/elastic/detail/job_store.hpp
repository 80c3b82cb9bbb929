#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "elastic/core.hpp"
#include "elastic/policies.hpp"

namespace elastic::detail {

/// Outstanding jobs indexed by arrival position. Each leaf holds the phase
/// kind and remaining work of one active job; internal nodes keep per-kind
/// counts, the per-kind minimum remaining work and a pending per-kind
/// subtraction. Rank lookup, range subtraction and range minimum are all
/// O(log M).
class JobStore {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  explicit JobStore(std::size_t capacity) {
    size_ = 1;
    while (size_ < capacity) size_ <<= 1;
    nodes_.assign(2 * size_, Node{});
  }

  std::size_t count(Population pop) const { return count_of(nodes_[1], pop); }

  /// Leaf position of the rank-th (0-based, oldest first) member of `pop`.
  std::size_t position_of_rank(Population pop, std::size_t rank) const {
    std::size_t node = 1;
    while (node < size_) {
      const std::size_t left = count_of(nodes_[2 * node], pop);
      if (rank < left) {
        node = 2 * node;
      } else {
        rank -= left;
        node = 2 * node + 1;
      }
    }
    return node - size_;
  }

  void activate(std::size_t pos, PhaseKind kind, double remaining) {
    push_path(pos);
    Node& leaf = nodes_[pos + size_];
    leaf = Node{};
    const int k = index(kind);
    leaf.count[k] = 1;
    leaf.min[k] = remaining;
    pull_path(pos);
  }

  void deactivate(std::size_t pos) {
    push_path(pos);
    nodes_[pos + size_] = Node{};
    pull_path(pos);
  }

  /// Kind and remaining work of an active leaf.
  std::pair<PhaseKind, double> leaf(std::size_t pos) {
    push_path(pos);
    const Node& n = nodes_[pos + size_];
    if (n.count[0] != 0) return {PhaseKind::Elastic, n.min[0]};
    return {PhaseKind::Inelastic, n.min[1]};
  }

  bool active(std::size_t pos) const {
    const Node& n = nodes_[pos + size_];
    return n.count[0] + n.count[1] != 0;
  }

  /// Subtracts `elastic` from every elastic leaf and `inelastic` from every
  /// in-elastic leaf with position in [lo, hi).
  void subtract(std::size_t lo, std::size_t hi, double elastic, double inelastic) {
    if (lo >= hi) return;
    subtract(1, 0, size_, lo, hi, elastic, inelastic);
  }

  /// Minimum remaining work among leaves of `kind` in [lo, hi), with its
  /// position. Returns {inf, npos} when there are none.
  std::pair<double, std::size_t> minimum(std::size_t lo, std::size_t hi, PhaseKind kind) {
    if (lo >= hi) return {kInf, npos};
    const int k = index(kind);
    const double v = range_min(1, 0, size_, lo, hi, k);
    if (v == kInf) return {kInf, npos};
    return {v, find_leaf_at_most(1, 0, size_, lo, hi, k, v)};
  }

  /// Appends every active position whose remaining work is <= threshold.
  void collect_at_most(double threshold, std::vector<std::size_t>& out) {
    collect(1, threshold, out);
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  struct Node {
    std::uint32_t count[2] = {0, 0};
    double min[2] = {kInf, kInf};
    double lazy[2] = {0.0, 0.0};
  };

  static int index(PhaseKind kind) { return kind == PhaseKind::Elastic ? 0 : 1; }

  static std::size_t count_of(const Node& n, Population pop) {
    switch (pop) {
      case Population::Elastic: return n.count[0];
      case Population::Inelastic: return n.count[1];
      case Population::All: break;
    }
    return static_cast<std::size_t>(n.count[0]) + n.count[1];
  }

  void apply(std::size_t node, double elastic, double inelastic) {
    Node& n = nodes_[node];
    if (n.count[0] != 0) n.min[0] -= elastic;
    if (n.count[1] != 0) n.min[1] -= inelastic;
    n.lazy[0] += elastic;
    n.lazy[1] += inelastic;
  }

  void push(std::size_t node) {
    Node& n = nodes_[node];
    if (n.lazy[0] != 0.0 || n.lazy[1] != 0.0) {
      apply(2 * node, n.lazy[0], n.lazy[1]);
      apply(2 * node + 1, n.lazy[0], n.lazy[1]);
      n.lazy[0] = n.lazy[1] = 0.0;
    }
  }

  void pull(std::size_t node) {
    Node& n = nodes_[node];
    const Node& l = nodes_[2 * node];
    const Node& r = nodes_[2 * node + 1];
    for (int k = 0; k < 2; ++k) {
      n.count[k] = l.count[k] + r.count[k];
      n.min[k] = std::min(l.min[k], r.min[k]);
    }
  }

  void push_path(std::size_t pos) {
    const std::size_t leaf = pos + size_;
    for (int shift = depth(); shift > 0; --shift) push(leaf >> shift);
  }

  void pull_path(std::size_t pos) {
    for (std::size_t node = (pos + size_) >> 1; node >= 1; node >>= 1) pull(node);
  }

  int depth() const {
    int d = 0;
    for (std::size_t s = size_; s > 1; s >>= 1) ++d;
    return d;
  }

  void subtract(std::size_t node, std::size_t nlo, std::size_t nhi, std::size_t lo,
                std::size_t hi, double e, double i) {
    if (hi <= nlo || nhi <= lo) return;
    if (lo <= nlo && nhi <= hi) {
      apply(node, e, i);
      return;
    }
    push(node);
    const std::size_t mid = (nlo + nhi) / 2;
    subtract(2 * node, nlo, mid, lo, hi, e, i);
    subtract(2 * node + 1, mid, nhi, lo, hi, e, i);
    pull(node);
  }

  double range_min(std::size_t node, std::size_t nlo, std::size_t nhi, std::size_t lo,
                   std::size_t hi, int k) {
    if (hi <= nlo || nhi <= lo || nodes_[node].count[k] == 0) return kInf;
    if (lo <= nlo && nhi <= hi) return nodes_[node].min[k];
    push(node);
    const std::size_t mid = (nlo + nhi) / 2;
    return std::min(range_min(2 * node, nlo, mid, lo, hi, k),
                    range_min(2 * node + 1, mid, nhi, lo, hi, k));
  }

  std::size_t find_leaf_at_most(std::size_t node, std::size_t nlo, std::size_t nhi,
                                std::size_t lo, std::size_t hi, int k, double v) {
    if (hi <= nlo || nhi <= lo || nodes_[node].count[k] == 0 || nodes_[node].min[k] > v) {
      return npos;
    }
    if (node >= size_) return node - size_;
    push(node);
    const std::size_t mid = (nlo + nhi) / 2;
    const std::size_t left = find_leaf_at_most(2 * node, nlo, mid, lo, hi, k, v);
    if (left != npos) return left;
    return find_leaf_at_most(2 * node + 1, mid, nhi, lo, hi, k, v);
  }

  void collect(std::size_t node, double threshold, std::vector<std::size_t>& out) {
    const Node& n = nodes_[node];
    const bool hit_e = n.count[0] != 0 && n.min[0] <= threshold;
    const bool hit_i = n.count[1] != 0 && n.min[1] <= threshold;
    if (!hit_e && !hit_i) return;
    if (node >= size_) {
      out.push_back(node - size_);
      return;
    }
    push(node);
    collect(2 * node, threshold, out);
    collect(2 * node + 1, threshold, out);
  }

  std::size_t size_ = 1;
  std::vector<Node> nodes_;
};

}  // namespace elastic::detail
