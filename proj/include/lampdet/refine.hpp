#ifndef LAMPDET_REFINE_HPP
#define LAMPDET_REFINE_HPP

#include "lampdet/chamfer_tensor.hpp"
#include "lampdet/error.hpp"
#include "lampdet/mesh_visibility.hpp"
#include "lampdet/pose.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace lampdet
{

enum class RefineMethod
{
    D2CO,    // distance tensor sampled at a few points per edge
    D2CO_E,  // distance tensor sampled at every pixel of the edge
    D2CO_IT, // integral tensor, constant cost per edge
};

inline std::string to_string(RefineMethod m)
{
    switch (m) {
    case RefineMethod::D2CO: return "d2co";
    case RefineMethod::D2CO_E: return "d2co-e";
    case RefineMethod::D2CO_IT: return "d2co-it";
    }
    return "unknown";
}

inline RefineMethod parse_method(const std::string& name)
{
    if (name == "d2co")
        return RefineMethod::D2CO;
    if (name == "d2co-e")
        return RefineMethod::D2CO_E;
    if (name == "d2co-it")
        return RefineMethod::D2CO_IT;
    throw InvalidArgument("unknown refine method: " + name);
}

/// Smoothed distance tensor and its integral form for one image.
struct TensorSet
{
    Dt3Tensor dt3;
    Idt3Tensor idt3;
};

struct TensorOptions
{
    int n_orient = kDefaultOrientations;
    double lambda_theta = kDefaultLambdaTheta;
    double sigma_bins = 1.0;
    int lines_per_pixel = kDefaultLinesPerPixel;
    bool integral = true;
};

inline TensorSet build_tensors(const std::vector<Segment2D>& segments, int width, int height,
                               const TensorOptions& options = {})
{
    TensorSet t;
    t.dt3 = smooth_dt3(build_dt3(segments, width, height, options.n_orient, options.lambda_theta), options.sigma_bins);
    if (options.integral)
        t.idt3 = build_idt3(t.dt3, options.lines_per_pixel);
    return t;
}

/// Mean tensor distance over `samples` evenly spaced points including both endpoints.
inline EdgeDistance edge_distance_sampled(const Dt3Tensor& dt3, const Eigen::Vector2d& end_a,
                                          const Eigen::Vector2d& end_b, int samples = 3)
{
    const Eigen::Vector2d delta = end_b - end_a;
    const double theta = std::atan2(delta.y(), delta.x());
    EdgeDistance out;
    if (samples < 2) {
        out.distance = dt3.sample(0.5 * (end_a + end_b), theta, out.truncated);
        return out;
    }
    double sum = 0.0;
    for (int k = 0; k < samples; ++k)
        sum += dt3.sample(end_a + (static_cast<double>(k) / (samples - 1)) * delta, theta, out.truncated);
    out.distance = sum / samples;
    return out;
}

struct RefineOptions
{
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
    double step_tolerance = 1e-10;
    double function_tolerance = 2e-3; // relative cost decrease of an accepted step
    double finite_difference_step = 1e-4;
    double damping_init = 1e-3;
    double damping_increase = 10.0; // on a rejected step
    double damping_decrease = 3.0;  // on an accepted step
    double subdivision_fraction = 1.0;
    int d2co_samples = 3;
    double reextract_rotation = 0.05; // radians
    int max_rejections = 5;
    int line_search_steps = 8; // step halvings tried along each damped direction
    double invisible_penalty = 100.0; // residual of an edge that leaves the valid projection domain
    ClipOptions clip;

    void validate() const
    {
        if (max_iterations <= 0 || !(gradient_tolerance > 0.0) || !(step_tolerance > 0.0) ||
            !(function_tolerance > 0.0) || !(finite_difference_step > 0.0) || !(damping_init > 0.0))
            throw InvalidArgument("RefineOptions: all tolerances and counts must be positive");
        if (!(subdivision_fraction > 0.0 && subdivision_fraction <= 1.0))
            throw InvalidArgument("RefineOptions: subdivision_fraction must be in (0, 1]");
        if (!(damping_increase > 1.0) || !(damping_decrease > 1.0))
            throw InvalidArgument("RefineOptions: damping factors must exceed 1");
        if (line_search_steps < 1)
            throw InvalidArgument("RefineOptions: line_search_steps must be >= 1");
        if (max_rejections < 1)
            throw InvalidArgument("RefineOptions: max_rejections must be >= 1");
    }
};

struct RefineResult
{
    Pose pose;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    int truncated_edges = 0;
    int visible_edges = 0;
    double initial_cost = 0.0;
    /// Cost after every accepted step; a new inner vector starts whenever the visible
    /// edge set is re-extracted, since costs over different edge sets do not compare.
    std::vector<std::vector<double>> cost_history;
};

/// Prominent, unoccluded, subdivided model edges for a pose.
inline std::vector<Edge3D> compute_visible_edges(const TriMesh& mesh, const Pose& pose, const CameraIntrinsics& cam,
                                                 double subdivision_fraction = 1.0, const ClipOptions& clip = {})
{
    const auto prominent = extract_prominent_edges(mesh, pose);
    if (prominent.empty())
        return {};
    const DepthBuffer depth = rasterize_depth(mesh, pose, cam);
    const auto visible = clip_visible(prominent, depth, pose, cam, clip);
    return subdivide_to_length(visible, subdivision_fraction * mesh.longest_edge());
}

struct ResidualReport
{
    std::vector<double> values;
    int skipped = 0;   // edges behind the camera
    int truncated = 0; // edges whose tensor reads were clamped
};

namespace detail
{
constexpr double kMinEdgePixels = 1e-6;

inline EdgeDistance evaluate_edge(const TensorSet& tensors, RefineMethod method, const Eigen::Vector2d& a,
                                  const Eigen::Vector2d& b, int d2co_samples)
{
    if ((b - a).norm() <= kMinEdgePixels)
        return edge_distance_sampled(tensors.dt3, a, b, 1);
    switch (method) {
    case RefineMethod::D2CO_IT: return edge_distance_idt3(tensors.idt3, a, b);
    case RefineMethod::D2CO_E: return edge_distance_direct(tensors.dt3, a, b);
    case RefineMethod::D2CO: return edge_distance_sampled(tensors.dt3, a, b, d2co_samples);
    }
    return {};
}

inline bool in_front(const Pose& pose, const Edge3D& e)
{
    return (pose * e.point_a).z() > 1e-9 && (pose * e.point_b).z() > 1e-9;
}
} // namespace detail

/// One residual per projected edge; edges behind the camera are skipped and counted.
inline ResidualReport residuals(const Pose& pose, const std::vector<Edge3D>& edges, const CameraIntrinsics& cam,
                                const TensorSet& tensors, RefineMethod method, int d2co_samples = 3)
{
    ResidualReport r;
    r.values.reserve(edges.size());
    for (const auto& e : edges) {
        if (!detail::in_front(pose, e)) {
            ++r.skipped;
            continue;
        }
        const Edge2D p = project_edge(pose, cam, e.point_a, e.point_b);
        const EdgeDistance d = detail::evaluate_edge(tensors, method, p.end_a, p.end_b, d2co_samples);
        r.truncated += d.truncated ? 1 : 0;
        r.values.push_back(d.distance);
    }
    return r;
}

namespace detail
{
// Fixed-dimension residuals for the optimizer: edges behind the camera get a penalty.
inline Eigen::VectorXd residual_vector(const Pose& pose, const std::vector<Edge3D>& edges, const CameraIntrinsics& cam,
                                       const TensorSet& tensors, RefineMethod method, const RefineOptions& o,
                                       int* truncated = nullptr)
{
    Eigen::VectorXd r(static_cast<Eigen::Index>(edges.size()));
    int trunc = 0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge3D& e = edges[i];
        if (!in_front(pose, e)) {
            r[static_cast<Eigen::Index>(i)] = o.invisible_penalty;
            continue;
        }
        const Edge2D p = project_edge(pose, cam, e.point_a, e.point_b);
        const EdgeDistance d = evaluate_edge(tensors, method, p.end_a, p.end_b, o.d2co_samples);
        trunc += d.truncated ? 1 : 0;
        r[static_cast<Eigen::Index>(i)] = std::min(d.distance, o.invisible_penalty);
    }
    if (truncated)
        *truncated = trunc;
    return r;
}

inline Pose retract(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta)
{
    return pose * exp_map(Twist::from_vector(delta));
}
} // namespace detail

/// Central finite-difference Jacobian of the residuals with respect to a twist
/// increment applied on the right of the pose.
inline Eigen::MatrixXd numeric_jacobian(const Pose& pose, const std::vector<Edge3D>& edges, const CameraIntrinsics& cam,
                                        const TensorSet& tensors, RefineMethod method, const RefineOptions& o,
                                        double step)
{
    Eigen::MatrixXd J(static_cast<Eigen::Index>(edges.size()), 6);
    for (int k = 0; k < 6; ++k) {
        Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
        d[k] = step;
        const Eigen::VectorXd rp = detail::residual_vector(detail::retract(pose, d), edges, cam, tensors, method, o);
        const Eigen::VectorXd rm = detail::residual_vector(detail::retract(pose, -d), edges, cam, tensors, method, o);
        J.col(k) = (rp - rm) / (2.0 * step);
    }
    return J;
}

/// Levenberg-Marquardt over the pose with numeric derivatives of the chamfer residuals.
inline RefineResult refine(const Pose& init_pose, const TriMesh& mesh, const CameraIntrinsics& cam,
                           const TensorSet& tensors, RefineMethod method, const RefineOptions& options = {})
{
    options.validate();
    if (!init_pose.is_valid(1e-6))
        throw InvalidArgument("refine: initial pose is not a rigid transform");

    RefineResult result;
    result.pose = init_pose;
    auto edges = compute_visible_edges(mesh, init_pose, cam, options.subdivision_fraction, options.clip);
    result.visible_edges = static_cast<int>(edges.size());
    if (edges.empty())
        return result;

    const auto cost_of = [](const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm(); };
    // Lower bound on the damping diagonal; flat directions would otherwise take huge steps.
    constexpr double kMinDiagonal = 1e-6;
    // Length of the probe step taken along a rejected direction to detect a minimum.
    constexpr double kProbeStep = 1e-7;

    Pose x = init_pose;
    Pose extracted_at = init_pose;
    Eigen::VectorXd r = detail::residual_vector(x, edges, cam, tensors, method, options);
    double cost = cost_of(r);
    const double initial_cost = cost;
    const auto initial_edges = edges;
    result.initial_cost = initial_cost;
    result.cost_history.push_back({cost});

    double mu = options.damping_init;
    int rejections = 0;
    bool converged = false;
    int it = 0;
    while (it < options.max_iterations) {
        const Eigen::MatrixXd J =
            numeric_jacobian(x, edges, cam, tensors, method, options, options.finite_difference_step);
        const Eigen::Matrix<double, 6, 1> g = J.transpose() * r;
        if (g.cwiseAbs().maxCoeff() <= options.gradient_tolerance) {
            converged = true;
            break;
        }
        const Eigen::Matrix<double, 6, 6> A = J.transpose() * J;
        bool accepted = false;
        while (it < options.max_iterations) {
            ++it;
            Eigen::Matrix<double, 6, 6> H = A;
            for (int k = 0; k < 6; ++k)
                H(k, k) += mu * std::max(A(k, k), kMinDiagonal);
            const Eigen::Matrix<double, 6, 1> delta = H.ldlt().solve(-g);
            // Backtrack along the damped direction while the cost keeps falling.
            double best_cost = cost;
            Eigen::VectorXd best_r;
            Pose best_pose = x;
            double best_scale = 0.0;
            double lowest_trial = std::numeric_limits<double>::infinity();
            if (delta.allFinite()) {
                double scale = 1.0;
                for (int k = 0; k < options.line_search_steps; ++k, scale *= 0.5) {
                    const Pose candidate = detail::retract(x, scale * delta);
                    Eigen::VectorXd rc = detail::residual_vector(candidate, edges, cam, tensors, method, options);
                    const double cc = cost_of(rc);
                    lowest_trial = std::min(lowest_trial, cc);
                    if (cc < best_cost) {
                        best_cost = cc;
                        best_r = std::move(rc);
                        best_pose = candidate;
                        best_scale = scale;
                    } else if (best_scale > 0.0) {
                        break;
                    }
                }
                if (best_scale == 0.0 && delta.norm() > kProbeStep) {
                    const Pose probe = detail::retract(x, (kProbeStep / delta.norm()) * delta);
                    lowest_trial = std::min(lowest_trial, cost_of(detail::residual_vector(probe, edges, cam, tensors, method, options)));
                }
            }
            if (best_scale > 0.0) {
                const double decrease = cost - best_cost;
                x = best_pose;
                r = std::move(best_r);
                cost = best_cost;
                if (best_scale == 1.0)
                    mu = std::max(mu / options.damping_decrease, 1e-12);
                rejections = 0;
                accepted = true;
                result.cost_history.back().push_back(cost);
                if (best_scale * delta.norm() <= options.step_tolerance * (x.translation.norm() + options.step_tolerance) ||
                    decrease <= options.function_tolerance * (cost + decrease))
                    converged = true;
                break;
            }
            // No trial moved the cost beyond the relative tolerance: a (possibly kinked) minimum.
            if (lowest_trial - cost <= options.function_tolerance * cost) {
                converged = true;
                break;
            }
            mu *= options.damping_increase;
            if (++rejections >= options.max_rejections)
                break;
        }
        if (!accepted || converged)
            break;
        if (rotation_angle(extracted_at.rotation.transpose() * x.rotation) > options.reextract_rotation) {
            auto fresh = compute_visible_edges(mesh, x, cam, options.subdivision_fraction, options.clip);
            if (!fresh.empty()) {
                edges = std::move(fresh);
                extracted_at = x;
                r = detail::residual_vector(x, edges, cam, tensors, method, options);
                cost = cost_of(r);
                result.cost_history.push_back({cost});
            }
        }
    }

    // Keep the starting pose when the edge set it ended up with scores worse.
    const auto final_edges = compute_visible_edges(mesh, x, cam, options.subdivision_fraction, options.clip);
    double final_cost = std::numeric_limits<double>::infinity();
    int trunc = 0;
    if (!final_edges.empty())
        final_cost = cost_of(detail::residual_vector(x, final_edges, cam, tensors, method, options, &trunc));
    if (final_cost > initial_cost) {
        x = init_pose;
        final_cost = initial_cost;
        detail::residual_vector(x, initial_edges, cam, tensors, method, options, &trunc);
        result.visible_edges = static_cast<int>(initial_edges.size());
    } else {
        result.visible_edges = static_cast<int>(final_edges.size());
    }
    result.pose = x;
    result.cost = final_cost;
    result.iterations = it;
    result.converged = converged;
    result.truncated_edges = trunc;
    return result;
}

/// Candidate score in (0, 1], decreasing in cost.
inline double score(const RefineResult& result, double sigma_s = 2.0)
{
    if (result.cost < 0.0)
        throw InvalidArgument("score: negative cost");
    if (!(sigma_s > 0.0))
        throw InvalidArgument("score: sigma must be positive");
    return std::exp(-result.cost / sigma_s);
}

} // namespace lampdet

#endif // LAMPDET_REFINE_HPP
