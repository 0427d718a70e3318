#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace rmlab {

/// Static 3-d kd-tree over weighted points with subtree aggregates; ball
/// queries prune whole subtrees via bounding boxes. Distances are Euclidean
/// in R^3, which equals the chordal metric for sphere-embedded points.
class KdTree3 {
  public:
    KdTree3() = default;
    KdTree3(std::vector<std::array<double, 3>> pts, std::vector<double> weights);

    size_t size() const { return pts_.size(); }

    struct BallStat {
        double weight = 0.0;
        size_t count = 0;
    };

    BallStat ball_stat(const std::array<double, 3>& center, double radius) const;

    /// Calls fn(original_index) for every point inside the ball.
    void visit_ball(const std::array<double, 3>& center, double radius,
                    const std::function<void(size_t)>& fn) const;

    /// Distance to the nearest point; +inf for an empty tree.
    double nearest_distance(const std::array<double, 3>& q) const;

  private:
    struct Node {
        std::array<double, 3> lo, hi;
        double weight = 0.0;
        int begin = 0, end = 0;   // leaf range in pts_
        int left = -1, right = -1;
    };

    std::vector<std::array<double, 3>> pts_;
    std::vector<double> w_;
    std::vector<size_t> idx_;  // original index per slot
    std::vector<Node> nodes_;

    void ball_rec(int node, const std::array<double, 3>& c, double r2, BallStat& out) const;
    void visit_rec(int node, const std::array<double, 3>& c, double r2,
                   const std::function<void(size_t)>& fn) const;
    void nn_rec(int node, const std::array<double, 3>& q, double& best2) const;
};

}  // namespace rmlab
