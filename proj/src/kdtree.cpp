#include "rmlab/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rmlab {

namespace {
constexpr int kLeafSize = 24;

inline double sq(double x) { return x * x; }

inline double box_dist2(const std::array<double, 3>& lo, const std::array<double, 3>& hi,
                        const std::array<double, 3>& q) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (q[k] < lo[k]) d2 += sq(lo[k] - q[k]);
        else if (q[k] > hi[k]) d2 += sq(q[k] - hi[k]);
    }
    return d2;
}

inline double box_far_dist2(const std::array<double, 3>& lo, const std::array<double, 3>& hi,
                            const std::array<double, 3>& q) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += sq(std::max(std::abs(q[k] - lo[k]), std::abs(q[k] - hi[k])));
    return d2;
}

struct Zipped {
    std::array<double, 3> p;
    double w;
    size_t idx;
};
}  // namespace

KdTree3::KdTree3(std::vector<std::array<double, 3>> pts, std::vector<double> weights)
    : pts_(std::move(pts)), w_(std::move(weights)) {
    if (pts_.empty()) return;
    // Keep point/weight pairs tied while partitioning.
    std::vector<Zipped> items(pts_.size());
    for (size_t i = 0; i < pts_.size(); ++i) items[i] = {pts_[i], w_[i], i};

    struct Frame {
        int begin, end, parent;
        bool is_left;
    };
    nodes_.reserve(2 * pts_.size() / kLeafSize + 4);
    std::vector<Frame> stack{{0, int(items.size()), -1, false}};
    while (!stack.empty()) {
        const Frame fr = stack.back();
        stack.pop_back();
        Node n;
        n.begin = fr.begin;
        n.end = fr.end;
        n.lo = {1e30, 1e30, 1e30};
        n.hi = {-1e30, -1e30, -1e30};
        for (int i = fr.begin; i < fr.end; ++i) {
            n.weight += items[size_t(i)].w;
            for (int k = 0; k < 3; ++k) {
                n.lo[k] = std::min(n.lo[k], items[size_t(i)].p[k]);
                n.hi[k] = std::max(n.hi[k], items[size_t(i)].p[k]);
            }
        }
        const int idx = int(nodes_.size());
        nodes_.push_back(n);
        if (fr.parent >= 0) {
            if (fr.is_left) nodes_[size_t(fr.parent)].left = idx;
            else nodes_[size_t(fr.parent)].right = idx;
        }
        if (fr.end - fr.begin > kLeafSize) {
            int axis = 0;
            double span = n.hi[0] - n.lo[0];
            for (int k = 1; k < 3; ++k)
                if (n.hi[k] - n.lo[k] > span) span = n.hi[k] - n.lo[k], axis = k;
            const int mid = (fr.begin + fr.end) / 2;
            std::nth_element(items.begin() + fr.begin, items.begin() + mid, items.begin() + fr.end,
                             [axis](const Zipped& a, const Zipped& b) { return a.p[axis] < b.p[axis]; });
            stack.push_back({mid, fr.end, idx, false});
            stack.push_back({fr.begin, mid, idx, true});
        }
    }
    idx_.resize(items.size());
    for (size_t i = 0; i < items.size(); ++i) {
        pts_[i] = items[i].p;
        w_[i] = items[i].w;
        idx_[i] = items[i].idx;
    }
}

KdTree3::BallStat KdTree3::ball_stat(const std::array<double, 3>& center, double radius) const {
    BallStat out;
    if (!nodes_.empty() && radius > 0.0) ball_rec(0, center, radius * radius, out);
    return out;
}

void KdTree3::ball_rec(int node, const std::array<double, 3>& c, double r2, BallStat& out) const {
    const Node& n = nodes_[size_t(node)];
    if (box_dist2(n.lo, n.hi, c) > r2) return;
    if (box_far_dist2(n.lo, n.hi, c) < r2) {
        out.weight += n.weight;
        out.count += size_t(n.end - n.begin);
        return;
    }
    if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const auto& p = pts_[size_t(i)];
            const double d2 = sq(p[0] - c[0]) + sq(p[1] - c[1]) + sq(p[2] - c[2]);
            if (d2 < r2) {
                out.weight += w_[size_t(i)];
                out.count += 1;
            }
        }
        return;
    }
    ball_rec(n.left, c, r2, out);
    ball_rec(n.right, c, r2, out);
}

void KdTree3::visit_ball(const std::array<double, 3>& center, double radius,
                         const std::function<void(size_t)>& fn) const {
    if (!nodes_.empty() && radius > 0.0) visit_rec(0, center, radius * radius, fn);
}

void KdTree3::visit_rec(int node, const std::array<double, 3>& c, double r2,
                        const std::function<void(size_t)>& fn) const {
    const Node& n = nodes_[size_t(node)];
    if (box_dist2(n.lo, n.hi, c) > r2) return;
    if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const auto& p = pts_[size_t(i)];
            const double d2 = sq(p[0] - c[0]) + sq(p[1] - c[1]) + sq(p[2] - c[2]);
            if (d2 < r2) fn(idx_[size_t(i)]);
        }
        return;
    }
    visit_rec(n.left, c, r2, fn);
    visit_rec(n.right, c, r2, fn);
}

double KdTree3::nearest_distance(const std::array<double, 3>& q) const {
    if (nodes_.empty()) return std::numeric_limits<double>::infinity();
    double best2 = std::numeric_limits<double>::infinity();
    nn_rec(0, q, best2);
    return std::sqrt(best2);
}

void KdTree3::nn_rec(int node, const std::array<double, 3>& q, double& best2) const {
    const Node& n = nodes_[size_t(node)];
    if (box_dist2(n.lo, n.hi, q) >= best2) return;
    if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const auto& p = pts_[size_t(i)];
            const double d2 = sq(p[0] - q[0]) + sq(p[1] - q[1]) + sq(p[2] - q[2]);
            if (d2 < best2) best2 = d2;
        }
        return;
    }
    const double dl = box_dist2(nodes_[size_t(n.left)].lo, nodes_[size_t(n.left)].hi, q);
    const double dr = box_dist2(nodes_[size_t(n.right)].lo, nodes_[size_t(n.right)].hi, q);
    if (dl <= dr) {
        nn_rec(n.left, q, best2);
        nn_rec(n.right, q, best2);
    } else {
        nn_rec(n.right, q, best2);
        nn_rec(n.left, q, best2);
    }
}

}  // namespace rmlab
