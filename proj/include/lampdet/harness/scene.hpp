#ifndef LAMPDET_HARNESS_SCENE_HPP
#define LAMPDET_HARNESS_SCENE_HPP

#include "lampdet/bim_plane.hpp"
#include "lampdet/cluster_report.hpp"
#include "lampdet/harness/config.hpp"
#include "lampdet/mesh_visibility.hpp"
#include "lampdet/pose.hpp"
#include "lampdet/refine.hpp"
#include "lampdet/segment.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace lampdet::harness
{

/// Lamp catalog. Every model hangs from its origin and extends down to negative z.
struct LampModel
{
    int id = 0;
    std::string name;
    TriMesh mesh;
    double half_x = 0.0; // footprint half extents, m
    double half_y = 0.0;
};

inline const std::vector<LampModel>& lamp_catalog()
{
    static const std::vector<LampModel> catalog = [] {
        std::vector<LampModel> c;
        const auto box = [&](int id, const char* name, double sx, double sy, double h) {
            c.push_back({id, name, make_box(sx, sy, -h, 0.0), 0.5 * sx, 0.5 * sy});
        };
        box(0, "panel-1200x300", 1.2, 0.3, 0.08);
        box(1, "batten-1200x150", 1.2, 0.15, 0.06);
        box(2, "panel-600x600", 0.6, 0.6, 0.08);
        box(3, "slim-1200x200", 1.2, 0.2, 0.02);
        c.push_back({4, "round-400", make_regular_prism(32, 0.2, -0.05, 0.0), 0.2, 0.2});
        return c;
    }();
    return catalog;
}

struct Lamp
{
    int model_id = 0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero(); // attachment point, world frame
    bool state_on = true;
};

struct Scene
{
    SceneConfig config;
    CameraIntrinsics camera;
    std::vector<Lamp> lamps;
    std::vector<BimSurface> surfaces;
    std::vector<Reference> references;
    std::vector<Pose> trajectory; // world-to-camera, one per frame
};

namespace detail
{
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

inline BimSurface make_surface(std::string id, SurfaceType type, std::vector<Eigen::Vector3d> polygon)
{
    BimSurface s;
    s.id = std::move(id);
    s.surface_type = type;
    s.polygon = std::move(polygon);
    fit_polygon_plane(s.polygon, s.plane_normal, s.plane_offset);
    return s;
}

inline std::vector<Eigen::Vector2d> lamp_grid(const SceneConfig& c)
{
    std::vector<Eigen::Vector2d> out;
    const Eigen::Vector2d spacing =
        c.lamp_spacing.value_or(Eigen::Vector2d(c.room_x / std::max(1, c.lamp_cols), c.room_y / std::max(1, c.lamp_rows)));
    const Eigen::Vector2d origin = c.lamp_origin.value_or(0.5 * spacing);
    for (int r = 0; r < c.lamp_rows; ++r)
        for (int col = 0; col < c.lamp_cols; ++col)
            out.push_back(origin + Eigen::Vector2d(col * spacing.x(), r * spacing.y()));
    return out;
}
} // namespace detail

/// Camera pose for a point on the floor plan walking along `heading`.
inline Pose camera_pose(const SceneConfig& c, const Eigen::Vector2d& xy, const Eigen::Vector2d& heading)
{
    const double pitch = c.camera_pitch_deg * std::numbers::pi / 180.0;
    const Eigen::Vector3d h(heading.x(), heading.y(), 0.0);
    const Eigen::Vector3d up_axis = Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d forward = std::sin(pitch) * h + std::cos(pitch) * up_axis;
    const Eigen::Vector3d up = std::cos(pitch) * h - std::sin(pitch) * up_axis;
    const Eigen::Vector3d eye(xy.x(), xy.y(), c.camera_height);
    return look_at(eye, eye + forward, up);
}

/// Frame positions spaced evenly by arc length along the waypoint polyline.
inline std::vector<Pose> make_trajectory(const SceneConfig& c)
{
    std::vector<Pose> out;
    if (c.frames == 0)
        return out;
    const auto& w = c.waypoints;
    std::vector<double> cumulative{0.0};
    for (std::size_t i = 1; i < w.size(); ++i)
        cumulative.push_back(cumulative.back() + (w[i] - w[i - 1]).norm());
    const double total = cumulative.back();
    for (int k = 0; k < c.frames; ++k) {
        const double s = c.frames == 1 ? 0.0 : total * k / (c.frames - 1);
        std::size_t seg = 0;
        while (seg + 2 < w.size() && cumulative[seg + 1] < s)
            ++seg;
        Eigen::Vector2d xy = w[0];
        Eigen::Vector2d heading = Eigen::Vector2d::UnitX();
        if (w.size() >= 2) {
            const Eigen::Vector2d d = w[seg + 1] - w[seg];
            const double len = d.norm();
            if (len > 0.0)
                heading = d / len;
            xy = w[seg] + heading * std::clamp(s - cumulative[seg], 0.0, len);
        }
        out.push_back(camera_pose(c, xy, heading));
    }
    return out;
}

/// Builds a deterministic scene: lamp grid, room surfaces, references and trajectory.
inline Scene gen_scene(const SceneConfig& config)
{
    config.validate();
    Scene s;
    s.config = config;
    s.camera.focal_x = s.camera.focal_y = config.focal;
    s.camera.width = config.image_width;
    s.camera.height = config.image_height;
    s.camera.principal_x = 0.5 * config.image_width;
    s.camera.principal_y = 0.5 * config.image_height;

    auto rng = detail::make_rng(config.seed, 0, 0);
    std::bernoulli_distribution coin(0.5);
    const auto& catalog = lamp_catalog();
    const auto grid = detail::lamp_grid(config);
    const double z = config.ceiling_height - config.hanging_offset;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Lamp lamp;
        lamp.model_id = config.lamp_models[i % config.lamp_models.size()];
        lamp.position = {grid[i].x(), grid[i].y(), z};
        switch (config.lamp_states) {
        case LampStates::AllOn: lamp.state_on = true; break;
        case LampStates::AllOff: lamp.state_on = false; break;
        case LampStates::Alternate: lamp.state_on = i % 2 == 0; break;
        case LampStates::Random: lamp.state_on = coin(rng); break;
        }
        const LampModel& m = catalog[static_cast<std::size_t>(lamp.model_id)];
        if (grid[i].x() - m.half_x < 0.0 || grid[i].x() + m.half_x > config.room_x ||
            grid[i].y() - m.half_y < 0.0 || grid[i].y() + m.half_y > config.room_y)
            throw ConfigError("scene: lamp " + std::to_string(i) + " lies outside the room");
        s.lamps.push_back(lamp);
        s.references.push_back({lamp.position, lamp.model_id, lamp.state_on});
    }

    const double X = config.room_x, Y = config.room_y, H = config.ceiling_height;
    using V = Eigen::Vector3d;
    s.surfaces.push_back(detail::make_surface("ceiling-0", SurfaceType::Ceiling, {V(0, 0, H), V(X, 0, H), V(X, Y, H), V(0, Y, H)}));
    s.surfaces.push_back(detail::make_surface("floor-0", SurfaceType::Floor, {V(0, 0, 0), V(0, Y, 0), V(X, Y, 0), V(X, 0, 0)}));
    s.surfaces.push_back(detail::make_surface("wall-s", SurfaceType::Wall, {V(0, 0, 0), V(X, 0, 0), V(X, 0, H), V(0, 0, H)}));
    s.surfaces.push_back(detail::make_surface("wall-e", SurfaceType::Wall, {V(X, 0, 0), V(X, Y, 0), V(X, Y, H), V(X, 0, H)}));
    s.surfaces.push_back(detail::make_surface("wall-n", SurfaceType::Wall, {V(X, Y, 0), V(0, Y, 0), V(0, Y, H), V(X, Y, H)}));
    s.surfaces.push_back(detail::make_surface("wall-w", SurfaceType::Wall, {V(0, Y, 0), V(0, 0, 0), V(0, 0, H), V(0, Y, H)}));

    s.trajectory = make_trajectory(config);
    return s;
}

/// Lamp model pose in the camera frame for a world-to-camera pose.
inline Pose lamp_in_camera(const Pose& world_to_camera, const Lamp& lamp)
{
    Pose model_to_world;
    model_to_world.translation = lamp.position;
    return world_to_camera * model_to_world;
}

struct VisibleLamp
{
    std::size_t lamp = 0;
    Pose pose;                // model to camera, ground truth
    double brightness = 0.0;  // observed mean intensity in [0, 1] before noise clipping
};

struct RenderedFrame
{
    std::vector<Segment2D> segments;
    std::vector<Segment2D> clean_segments; // projected visible lamp edges before noise and dropout
    Pose camera;                           // world to camera
    std::vector<VisibleLamp> lamps;
};

namespace detail
{
inline bool inside_image(const CameraIntrinsics& cam, const TriMesh& mesh, const Pose& pose, double margin)
{
    for (const auto& v : mesh.vertices) {
        const Eigen::Vector3d p = pose * v;
        if (p.z() < 0.1)
            return false;
        const Eigen::Vector2d uv = project_point(pose, cam, v);
        if (uv.x() < margin || uv.y() < margin || uv.x() > cam.width - margin || uv.y() > cam.height - margin)
            return false;
    }
    return true;
}
} // namespace detail

/// Renders the segment observation of one trajectory frame.
inline RenderedFrame render_synthetic_frame(const Scene& scene, int frame_index)
{
    if (frame_index < 0 || frame_index >= static_cast<int>(scene.trajectory.size()))
        throw InvalidArgument("render_synthetic_frame: frame outside trajectory");
    const SceneConfig& c = scene.config;
    RenderedFrame out;
    out.camera = scene.trajectory[static_cast<std::size_t>(frame_index)];
    auto rng = detail::make_rng(c.seed, 1, static_cast<std::uint64_t>(frame_index));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t i = 0; i < scene.lamps.size(); ++i) {
        const Lamp& lamp = scene.lamps[i];
        const TriMesh& mesh = lamp_catalog()[static_cast<std::size_t>(lamp.model_id)].mesh;
        const Pose pose = lamp_in_camera(out.camera, lamp);
        if (pose.translation.norm() > c.max_range || !detail::inside_image(scene.camera, mesh, pose, 2.0))
            continue;
        const auto edges = compute_visible_edges(mesh, pose, scene.camera, 1.0);
        if (edges.empty())
            continue;
        VisibleLamp vl;
        vl.lamp = i;
        vl.pose = pose;
        vl.brightness = (lamp.state_on ? 1.0 : 0.0) + c.state_noise * gauss(rng);
        out.lamps.push_back(vl);
        for (const auto& e : edges) {
            const Segment2D seg = project_edge(pose, scene.camera, e.point_a, e.point_b);
            if (seg.length() < 1e-9)
                continue;
            out.clean_segments.push_back(seg);
        }
    }

    const double axis_sigma = c.endpoint_sigma / std::sqrt(2.0);
    for (const Segment2D& clean : out.clean_segments) {
        // Draw every variate so the stream does not depend on which branches run.
        const double drop = unit(rng);
        const Eigen::Vector2d na(gauss(rng), gauss(rng)), nb(gauss(rng), gauss(rng));
        const double dtheta = c.orientation_sigma * gauss(rng);
        if (drop < c.dropout)
            continue;
        Eigen::Vector2d a = clean.end_a + axis_sigma * na;
        Eigen::Vector2d b = clean.end_b + axis_sigma * nb;
        if (dtheta != 0.0) {
            const Eigen::Vector2d m = 0.5 * (a + b);
            const Eigen::Rotation2Dd rot(dtheta);
            a = m + rot * (a - m);
            b = m + rot * (b - m);
        }
        out.segments.push_back(Segment2D::between(a, b));
    }
    for (int k = 0; k < c.clutter; ++k) {
        const Eigen::Vector2d m(unit(rng) * scene.camera.width, unit(rng) * scene.camera.height);
        const double len = 10.0 + 50.0 * unit(rng);
        const double ang = std::numbers::pi * unit(rng);
        const Eigen::Vector2d d = 0.5 * len * Eigen::Vector2d(std::cos(ang), std::sin(ang));
        out.segments.push_back(Segment2D::between(m - d, m + d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scene files

inline void write_gbxml(std::ostream& out, const std::vector<BimSurface>& surfaces)
{
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<gbXML xmlns=\"http://www.gbxml.org/schema\" lengthUnit=\"Meters\">\n  <Campus id=\"campus-0\">\n";
    out << std::setprecision(12);
    for (const auto& s : surfaces) {
        out << "    <Surface id=\"" << s.id << "\" surfaceType=\"" << to_string(s.surface_type)
            << "\">\n      <PlanarGeometry>\n        <PolyLoop>\n";
        for (const auto& p : s.polygon)
            out << "          <CartesianPoint><Coordinate>" << p.x() << "</Coordinate><Coordinate>" << p.y()
                << "</Coordinate><Coordinate>" << p.z() << "</Coordinate></CartesianPoint>\n";
        out << "        </PolyLoop>\n      </PlanarGeometry>\n    </Surface>\n";
    }
    out << "  </Campus>\n</gbXML>\n";
}

inline void write_references_csv(std::ostream& out, const std::vector<Reference>& refs)
{
    out << "id,model_id,state,x,y,z\n" << std::setprecision(12);
    for (std::size_t i = 0; i < refs.size(); ++i)
        out << i << ',' << refs[i].model_id << ',' << (refs[i].state_on ? "on" : "off") << ',' << refs[i].position.x()
            << ',' << refs[i].position.y() << ',' << refs[i].position.z() << '\n';
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<Pose>& trajectory)
{
    out << "frame,ex,ey,ez,r00,r01,r02,r10,r11,r12,r20,r21,r22\n" << std::setprecision(12);
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const Pose cam_to_world = trajectory[i].inverse();
        out << i;
        for (int k = 0; k < 3; ++k)
            out << ',' << cam_to_world.translation[k];
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k)
                out << ',' << trajectory[i].rotation(r, k);
        out << '\n';
    }
}

} // namespace lampdet::harness

#endif // LAMPDET_HARNESS_SCENE_HPP
