#pragma once

// Exact k-nearest-label search over class vectors.
//
// Distances are Euclidean, accumulated in double from float32 components. Ties are
// broken by ascending label, so results are fully determined by the point set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "zsl/dataset.hpp"
#include "zsl/errors.hpp"

namespace zsl {

struct RankedLabel {
    std::string label;
    double distance = 0.0;
    friend bool operator==(const RankedLabel&, const RankedLabel&) = default;
};

/// Labels ordered by nondecreasing distance, nearest first.
using RankedLabels = std::vector<RankedLabel>;

/// Squared L2 distance with float64 accumulation in component order.
inline double squared_distance(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return sum;
}

inline std::vector<float> l2_normalized(std::span<const float> v) {
    double norm = 0.0;
    for (float x : v) {
        norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
    std::vector<float> out(v.begin(), v.end());
    if (norm > 0.0) {
        for (auto& x : out) {
            x = static_cast<float>(x / norm);
        }
    }
    return out;
}

struct IndexOptions {
    std::size_t leaf_size = 8;
    /// Index unit-length class vectors (queries must then be normalized by the caller).
    bool normalize = false;
};

/// KD-tree over a fixed set of labelled class vectors. Immutable after build.
///
/// Nodes split at the median of the axis with the largest spread; leaves hold up to
/// `leaf_size` points. Queries are exact: a subtree is skipped only when its
/// splitting plane is strictly farther than the current k-th candidate.
class SemanticIndex {
  public:
    SemanticIndex(const ClassVectorSet& cv, std::optional<std::vector<std::string>> candidate_labels = std::nullopt,
                  IndexOptions options = {})
        : dim_(cv.dim()), options_(options) {
        if (cv.empty()) {
            throw ArgumentError("cannot index an empty class vector set");
        }
        if (options_.leaf_size == 0) {
            throw ArgumentError("leaf size must be positive");
        }
        const auto& chosen = candidate_labels ? *candidate_labels : cv.labels();
        if (chosen.empty()) {
            throw ArgumentError("candidate label set is empty");
        }
        std::set<std::string_view> unique;
        for (const auto& label : chosen) {
            if (!cv.contains(label)) {
                throw ArgumentError("candidate label '" + label + "' has no class vector");
            }
            if (!unique.insert(label).second) {
                throw ArgumentError("candidate label '" + label + "' listed twice");
            }
        }
        labels_ = chosen;
        points_.reserve(labels_.size() * dim_);
        for (const auto& label : labels_) {
            const auto v = cv.at(label);
            if (options_.normalize) {
                const auto n = l2_normalized(v);
                points_.insert(points_.end(), n.begin(), n.end());
            } else {
                points_.insert(points_.end(), v.begin(), v.end());
            }
        }
        order_.resize(labels_.size());
        std::iota(order_.begin(), order_.end(), 0U);
        nodes_.reserve(2 * labels_.size() / options_.leaf_size + 1);
        build(0, order_.size());
    }

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const IndexOptions& options() const { return options_; }

    std::span<const float> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }

    /// The k indexed labels nearest to `query`, nearest first.
    RankedLabels query(std::span<const float> query, std::size_t k) const {
        check_query(query, k);
        Heap heap{RanksBefore{this}};
        search(0, query, k, heap);
        RankedLabels out(heap.size());
        for (auto i = heap.size(); i-- > 0;) {
            const auto [d2, idx] = heap.top();
            heap.pop();
            out[i] = {labels_[idx], std::sqrt(d2)};
        }
        return out;
    }

    /// Exhaustive O(N d) scan with the same metric and tie-break as query().
    RankedLabels linear_scan(std::span<const float> query, std::size_t k) const {
        check_query(query, k);
        std::vector<Candidate> all(labels_.size());
        for (std::uint32_t i = 0; i < labels_.size(); ++i) {
            all[i] = {squared_distance(query, point(i)), i};
        }
        const RanksBefore before{this};
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
        RankedLabels out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            out.push_back({labels_[all[i].index], std::sqrt(all[i].d2)});
        }
        return out;
    }

  private:
    struct Candidate {
        double d2;
        std::uint32_t index;
    };

    // Strict weak order "a ranks before b"; the heap keeps the worst candidate on top.
    struct RanksBefore {
        const SemanticIndex* self;
        bool operator()(const Candidate& a, const Candidate& b) const {
            if (a.d2 != b.d2) {
                return a.d2 < b.d2;
            }
            return self->labels_[a.index] < self->labels_[b.index];
        }
    };
    using Heap = std::priority_queue<Candidate, std::vector<Candidate>, RanksBefore>;

    struct Node {
        // Leaf: [begin, end) into order_. Inner: children and splitting plane.
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint32_t axis = 0;
        float split = 0.0F;
        bool leaf() const { return left < 0; }
    };

    void check_query(std::span<const float> query, std::size_t k) const {
        if (query.size() != dim_) {
            throw ArgumentError("query has dim " + std::to_string(query.size()) + ", index dim is " +
                                std::to_string(dim_));
        }
        if (k < 1 || k > labels_.size()) {
            throw ArgumentError("k must be in [1, " + std::to_string(labels_.size()) + "], got " + std::to_string(k));
        }
    }

    std::int32_t build(std::size_t begin, std::size_t end) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(end)});
        if (end - begin <= options_.leaf_size) {
            return id;
        }

        std::uint32_t axis = 0;
        float best_spread = -1.0F;
        for (std::uint32_t d = 0; d < dim_; ++d) {
            float lo = point(order_[begin])[d];
            float hi = lo;
            for (auto i = begin + 1; i < end; ++i) {
                const float v = point(order_[i])[d];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                axis = d;
            }
        }
        if (best_spread <= 0.0F) {
            return id;  // all points coincide; keep them in one leaf
        }

        const auto mid = begin + (end - begin) / 2;
        auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
        auto nth = order_.begin() + static_cast<std::ptrdiff_t>(mid);
        auto last = order_.begin() + static_cast<std::ptrdiff_t>(end);
        std::nth_element(first, nth, last, [&](std::uint32_t a, std::uint32_t b) {
            const float va = point(a)[axis];
            const float vb = point(b)[axis];
            return va != vb ? va < vb : a < b;
        });

        const float split = point(*nth)[axis];
        const auto left = build(begin, mid);
        const auto right = build(mid, end);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.left = left;
        node.right = right;
        node.axis = axis;
        node.split = split;
        return id;
    }

    // Points in the left child have coordinate <= split, right child >= split, so the
    // squared plane distance is a lower bound for every point on the far side.
    void search(std::int32_t node_id, std::span<const float> query, std::size_t k, Heap& heap) const {
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        if (node.leaf()) {
            const RanksBefore before{this};
            for (auto i = node.begin; i < node.end; ++i) {
                const Candidate c{squared_distance(query, point(order_[i])), order_[i]};
                if (heap.size() < k) {
                    heap.push(c);
                } else if (before(c, heap.top())) {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        const double diff = static_cast<double>(query[node.axis]) - static_cast<double>(node.split);
        const bool go_left = diff <= 0.0;
        search(go_left ? node.left : node.right, query, k, heap);
        if (heap.size() < k || diff * diff <= heap.top().d2) {
            search(go_left ? node.right : node.left, query, k, heap);
        }
    }

    std::uint32_t dim_;
    IndexOptions options_;
    std::vector<std::string> labels_;
    std::vector<float> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

inline SemanticIndex build_index(const ClassVectorSet& cv,
                                 std::optional<std::vector<std::string>> candidate_labels = std::nullopt,
                                 IndexOptions options = {}) {
    return SemanticIndex(cv, std::move(candidate_labels), options);
}

inline RankedLabels query_k_nearest(const SemanticIndex& index, std::span<const float> point, std::size_t k) {
    return index.query(point, k);
}

}  // namespace zsl
