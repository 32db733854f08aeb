#ifndef LAMPDET_POSE_HPP
#define LAMPDET_POSE_HPP

#include "lampdet/error.hpp"
#include "lampdet/segment.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lampdet
{

/// se(3) coordinates. Ordering is (translation, rotation).
struct Twist
{
    Eigen::Vector3d translation = Eigen::Vector3d::Zero(); // meters
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();    // axis-angle, radians

    Eigen::Matrix<double, 6, 1> vector() const
    {
        Eigen::Matrix<double, 6, 1> v;
        v << translation, rotation;
        return v;
    }
    static Twist from_vector(const Eigen::Matrix<double, 6, 1>& v)
    {
        return Twist{v.head<3>(), v.tail<3>()};
    }
    Twist operator-() const { return Twist{-translation, -rotation}; }
    bool all_finite() const { return translation.allFinite() && rotation.allFinite(); }
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w)
{
    Eigen::Matrix3d m;
    m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return m;
}

/// Rigid transform x -> rotation * x + translation.
struct Pose
{
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero(); // meters

    static Pose identity() { return Pose{}; }

    Eigen::Vector3d operator*(const Eigen::Vector3d& x) const { return rotation * x + translation; }
    Pose operator*(const Pose& o) const
    {
        return Pose{rotation * o.rotation, rotation * o.translation + translation};
    }
    Pose inverse() const
    {
        const Eigen::Matrix3d rt = rotation.transpose();
        return Pose{rt, -rt * translation};
    }
    Eigen::Matrix4d matrix() const
    {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = rotation;
        m.topRightCorner<3, 1>() = translation;
        return m;
    }

    bool is_valid(double tol = 1e-9) const
    {
        if (!rotation.allFinite() || !translation.allFinite())
            return false;
        const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
        return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

struct CameraIntrinsics
{
    double focal_x = 1.0;
    double focal_y = 1.0;
    double principal_x = 0.0;
    double principal_y = 0.0;
    int width = 1;
    int height = 1;

    void validate() const
    {
        if (!(focal_x > 0.0) || !(focal_y > 0.0))
            throw InvalidArgument("camera focal lengths must be positive");
        if (width <= 0 || height <= 0)
            throw InvalidArgument("camera dimensions must be positive");
        if (principal_x < 0.0 || principal_x > width || principal_y < 0.0 || principal_y > height)
            throw InvalidArgument("principal point outside image");
    }
};

namespace detail
{
constexpr double small_angle = 1e-8;

// Coefficients of the SO(3)/SE(3) series: A = sin/t, B = (1-cos)/t^2, C = (t-sin)/t^3.
inline void rodrigues_coefficients(double theta, double& a, double& b, double& c)
{
    if (theta < small_angle) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0;
        b = 0.5 - t2 / 24.0;
        c = 1.0 / 6.0 - t2 / 120.0;
        return;
    }
    const double t2 = theta * theta;
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
}
} // namespace detail

inline Pose exp_map(const Twist& twist)
{
    if (!twist.all_finite())
        throw InvalidArgument("exp_map: non-finite twist");
    const Eigen::Vector3d& w = twist.rotation;
    const double theta = w.norm();
    double a, b, c;
    detail::rodrigues_coefficients(theta, a, b, c);
    const Eigen::Matrix3d W = skew(w);
    const Eigen::Matrix3d W2 = W * W;
    Pose pose;
    pose.rotation = Eigen::Matrix3d::Identity() + a * W + b * W2;
    const Eigen::Matrix3d V = Eigen::Matrix3d::Identity() + b * W + c * W2;
    pose.translation = V * twist.translation;
    return pose;
}

inline Twist log_map(const Pose& pose)
{
    const Eigen::Matrix3d& R = pose.rotation;
    const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (theta >= std::numbers::pi - 1e-6)
        throw AmbiguousRotation("log_map: rotation angle too close to pi");

    Eigen::Vector3d vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    Eigen::Vector3d w;
    if (theta < detail::small_angle)
        w = 0.5 * (1.0 + theta * theta / 6.0) * vee;
    else
        w = theta / (2.0 * std::sin(theta)) * vee;

    const Eigen::Matrix3d W = skew(w);
    Eigen::Matrix3d V_inv;
    if (theta < detail::small_angle) {
        V_inv = Eigen::Matrix3d::Identity() - 0.5 * W + W * W / 12.0;
    } else {
        const double half = 0.5 * theta;
        const double k = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
        V_inv = Eigen::Matrix3d::Identity() - 0.5 * W + k * W * W;
    }
    return Twist{V_inv * pose.translation, w};
}

inline Eigen::Vector2d project_point(const Pose& pose, const CameraIntrinsics& cam, const Eigen::Vector3d& point)
{
    const Eigen::Vector3d p = pose * point;
    if (!(p.z() > 1e-9))
        throw BehindCamera("project_point: point at non-positive depth");
    return {cam.focal_x * p.x() / p.z() + cam.principal_x, cam.focal_y * p.y() / p.z() + cam.principal_y};
}

inline Edge2D project_edge(const Pose& pose, const CameraIntrinsics& cam, const Eigen::Vector3d& point_a,
                           const Eigen::Vector3d& point_b)
{
    return Edge2D::between(project_point(pose, cam, point_a), project_point(pose, cam, point_b));
}

/// Rotation angle of a pose, radians.
inline double rotation_angle(const Eigen::Matrix3d& R)
{
    return std::acos(std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0));
}

/// Camera-to-world style look-at: returns the world-to-camera pose for a camera at `eye`
/// looking at `target` (camera axes: x right, y down, z forward).
inline Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up)
{
    const Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d x = z.cross(up);
    if (x.norm() < 1e-9)
        x = z.unitOrthogonal();
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    Pose cam_to_world;
    cam_to_world.rotation.col(0) = x;
    cam_to_world.rotation.col(1) = y;
    cam_to_world.rotation.col(2) = z;
    cam_to_world.translation = eye;
    return cam_to_world.inverse();
}

} // namespace lampdet

#endif // LAMPDET_POSE_HPP
