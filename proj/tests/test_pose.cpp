#include "lampdet/pose.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace lampdet;

namespace
{
Twist random_twist(std::mt19937_64& rng, double max_angle)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Vector3d axis(u(rng), u(rng), u(rng));
    axis.normalize();
    std::uniform_real_distribution<double> ang(0.0, max_angle);
    return Twist{Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0, axis * ang(rng)};
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }
} // namespace

TEST(ExpMap, ZeroTwistIsIdentity)
{
    const Pose p = exp_map(Twist{});
    EXPECT_LT(max_abs(p.rotation - Eigen::Matrix3d::Identity()), 1e-15);
    EXPECT_LT(p.translation.norm(), 1e-15);
}

TEST(ExpMap, QuarterTurnAboutZ)
{
    const Pose p = exp_map(Twist{Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, std::numbers::pi / 2)});
    EXPECT_LT((p.rotation * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm(), 1e-12);
    EXPECT_TRUE(p.is_valid());
}

TEST(ExpMap, RotationMatchesAngleAxis)
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const Twist t = random_twist(rng, std::numbers::pi - 1e-3);
        const Eigen::Matrix3d oracle = Eigen::AngleAxisd(t.rotation.norm(), t.rotation.normalized()).toRotationMatrix();
        EXPECT_LT(max_abs(exp_map(t).rotation - oracle), 1e-12);
    }
}

TEST(ExpMap, SmallAngleBranchIsContinuous)
{
    const Twist tiny{Eigen::Vector3d(0.1, -0.2, 0.3), Eigen::Vector3d(1e-9, -2e-9, 5e-10)};
    const Twist small{tiny.translation, tiny.rotation * 100.0};
    const Pose a = exp_map(tiny), b = exp_map(small);
    EXPECT_LT((a.translation - tiny.translation).norm(), 1e-8);
    EXPECT_LT((b.translation - a.translation).norm(), 1e-6);
    EXPECT_TRUE(a.is_valid());
}

TEST(ExpMap, NonFiniteThrows)
{
    Twist t;
    t.rotation.x() = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(exp_map(t), InvalidArgument);
}

TEST(LogMap, IdentityIsZero)
{
    const Twist t = log_map(Pose::identity());
    EXPECT_LT(t.vector().norm(), 1e-15);
}

TEST(LogMap, QuarterTurnAboutZ)
{
    Pose p;
    p.rotation = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Twist t = log_map(p);
    EXPECT_LT((t.rotation - Eigen::Vector3d(0, 0, std::numbers::pi / 2)).norm(), 1e-12);
}

TEST(LogMap, RoundTripRandomTwists)
{
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 1000; ++i) {
        const Twist t = random_twist(rng, std::numbers::pi - 1e-3);
        const Twist back = log_map(exp_map(t));
        ASSERT_LT((back.vector() - t.vector()).cwiseAbs().maxCoeff(), 1e-9) << "sample " << i;
    }
}

TEST(LogMap, RoundTripRandomPoses)
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 1000; ++i) {
        const Pose p = exp_map(random_twist(rng, std::numbers::pi - 1e-3));
        const Pose q = exp_map(log_map(p));
        ASSERT_LT(max_abs(q.matrix() - p.matrix()), 1e-9) << "sample " << i;
    }
}

TEST(LogMap, NearPiIsAmbiguous)
{
    Pose p;
    p.rotation = Eigen::AngleAxisd(std::numbers::pi - 1e-8, Eigen::Vector3d::UnitX()).toRotationMatrix();
    EXPECT_THROW(log_map(p), AmbiguousRotation);
}

TEST(ExpMap, InverseTwistComposesToIdentity)
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const Twist t = random_twist(rng, 3.0);
        EXPECT_LT(max_abs((exp_map(t) * exp_map(-t)).matrix() - Eigen::Matrix4d::Identity()), 1e-9);
    }
}

namespace
{
CameraIntrinsics test_camera()
{
    CameraIntrinsics c;
    c.focal_x = c.focal_y = 500.0;
    c.principal_x = 480.0;
    c.principal_y = 270.0;
    c.width = 960;
    c.height = 540;
    return c;
}
} // namespace

TEST(ProjectPoint, PrincipalAxis)
{
    const Eigen::Vector2d uv = project_point(Pose::identity(), test_camera(), {0, 0, 2});
    EXPECT_NEAR(uv.x(), 480.0, 1e-12);
    EXPECT_NEAR(uv.y(), 270.0, 1e-12);
}

TEST(ProjectPoint, OffAxis)
{
    const Eigen::Vector2d uv = project_point(Pose::identity(), test_camera(), {0.2, 0, 2});
    EXPECT_NEAR(uv.x(), 530.0, 1e-12);
    EXPECT_NEAR(uv.y(), 270.0, 1e-12);
}

TEST(ProjectPoint, ComposeThenProject)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Pose shift;
    shift.translation = {0, 0, 1};
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector3d p(u(rng), u(rng), 2.0 + u(rng));
        const Eigen::Vector2d a = project_point(shift, test_camera(), p);
        const Eigen::Vector2d b = project_point(Pose::identity(), test_camera(), p + Eigen::Vector3d(0, 0, 1));
        EXPECT_LT((a - b).norm(), 1e-12);
    }
}

TEST(ProjectPoint, IdentityPrecompositionInvariant)
{
    Pose p = exp_map(Twist{Eigen::Vector3d(0.1, 0.2, 3.0), Eigen::Vector3d(0.1, -0.2, 0.05)});
    const Eigen::Vector3d x(0.3, -0.1, 0.4);
    EXPECT_LT((project_point(p * Pose::identity(), test_camera(), x) - project_point(p, test_camera(), x)).norm(), 1e-12);
}

TEST(ProjectPoint, BehindCameraThrows)
{
    EXPECT_THROW(project_point(Pose::identity(), test_camera(), {0, 0, 0}), BehindCamera);
    EXPECT_THROW(project_point(Pose::identity(), test_camera(), {0, 0, -1}), BehindCamera);
}

TEST(ProjectEdge, EndpointsAndOrientation)
{
    const Edge2D e = project_edge(Pose::identity(), test_camera(), {0, 0, 2}, {0.2, 0, 2});
    EXPECT_LT((e.end_a - Eigen::Vector2d(480, 270)).norm(), 1e-12);
    EXPECT_LT((e.end_b - Eigen::Vector2d(530, 270)).norm(), 1e-12);
    EXPECT_NEAR(e.orientation, 0.0, 1e-12);
    const Edge2D r = project_edge(Pose::identity(), test_camera(), {0.2, 0, 2}, {0, 0, 2});
    EXPECT_NEAR(r.orientation, 0.0, 1e-12);
    const Edge2D v = project_edge(Pose::identity(), test_camera(), {0, 0.2, 2}, {0, 0, 2});
    EXPECT_NEAR(v.orientation, std::numbers::pi / 2, 1e-12);
}

TEST(ProjectEdge, BehindCameraThrows)
{
    EXPECT_THROW(project_edge(Pose::identity(), test_camera(), {0, 0, 2}, {0, 0, -1}), BehindCamera);
}

TEST(CameraIntrinsics, ValidateRejectsBadValues)
{
    CameraIntrinsics c = test_camera();
    EXPECT_NO_THROW(c.validate());
    c.focal_x = 0.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = test_camera();
    c.principal_x = 2000.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}
