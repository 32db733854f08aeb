#ifndef LAMPDET_SEGMENT_HPP
#define LAMPDET_SEGMENT_HPP

#include <Eigen/Core>

#include <cmath>
#include <numbers>

namespace lampdet
{

/// Folds any angle into [0, pi). Line orientations are undirected.
inline double fold_orientation(double angle)
{
    double folded = std::fmod(angle, std::numbers::pi);
    if (folded < 0.0)
        folded += std::numbers::pi;
    if (folded >= std::numbers::pi)
        folded = 0.0;
    return folded;
}

/// A 2D line segment in image coordinates (x right, y down), pixels.
struct Segment2D
{
    Eigen::Vector2d end_a = Eigen::Vector2d::Zero();
    Eigen::Vector2d end_b = Eigen::Vector2d::Zero();
    double orientation = 0.0; // radians in [0, pi)

    static Segment2D between(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
    {
        const Eigen::Vector2d d = b - a;
        return Segment2D{a, b, fold_orientation(std::atan2(d.y(), d.x()))};
    }

    double length() const { return (end_b - end_a).norm(); }
    Eigen::Vector2d midpoint() const { return 0.5 * (end_a + end_b); }
};

/// Projected model edge; same representation as an image segment.
using Edge2D = Segment2D;

} // namespace lampdet

#endif // LAMPDET_SEGMENT_HPP
