#ifndef LAMPDET_BIM_PLANE_HPP
#define LAMPDET_BIM_PLANE_HPP

#include "lampdet/error.hpp"

#include <Eigen/Core>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace lampdet
{

enum class SurfaceType
{
    Ceiling,
    Floor,
    Wall,
    Other,
};

inline std::string to_string(SurfaceType t)
{
    switch (t) {
    case SurfaceType::Ceiling: return "Ceiling";
    case SurfaceType::Floor: return "Floor";
    case SurfaceType::Wall: return "Wall";
    case SurfaceType::Other: return "Other";
    }
    return "Other";
}

/// Maps a gbXML surfaceType attribute (e.g. "Ceiling", "InteriorFloor", "ExteriorWall").
inline SurfaceType classify_surface(const std::string& surface_type)
{
    if (surface_type.find("Ceiling") != std::string::npos)
        return SurfaceType::Ceiling;
    if (surface_type.find("Floor") != std::string::npos || surface_type.find("SlabOnGrade") != std::string::npos)
        return SurfaceType::Floor;
    if (surface_type.find("Wall") != std::string::npos)
        return SurfaceType::Wall;
    return SurfaceType::Other;
}

/// Planar building surface: n . p = offset for every polygon vertex.
struct BimSurface
{
    std::string id;
    SurfaceType surface_type = SurfaceType::Other;
    std::vector<Eigen::Vector3d> polygon; // meters
    Eigen::Vector3d plane_normal = Eigen::Vector3d::UnitZ();
    double plane_offset = 0.0;
};

struct Detection
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();        // meters
    Eigen::Vector3d camera_position = Eigen::Vector3d::Zero(); // meters
    int model_id = 0;
    double score = 1.0;
    bool state_on = true;
    int frame_index = 0;
};

struct PlaneEstimate
{
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;
    std::vector<bool> inlier_mask;
    int inlier_count = 0;
};

constexpr double kCoplanarTolerance = 1e-6;

/// Plane through a polygon by Newell's method. Throws when the polygon is degenerate
/// or not planar within `tolerance` meters.
inline void fit_polygon_plane(const std::vector<Eigen::Vector3d>& polygon, Eigen::Vector3d& normal, double& offset,
                              double tolerance = kCoplanarTolerance)
{
    if (polygon.size() < 3)
        throw InvalidArgument("polygon needs at least 3 points");
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const Eigen::Vector3d& a = polygon[i];
        const Eigen::Vector3d& b = polygon[(i + 1) % polygon.size()];
        n.x() += (a.y() - b.y()) * (a.z() + b.z());
        n.y() += (a.z() - b.z()) * (a.x() + b.x());
        n.z() += (a.x() - b.x()) * (a.y() + b.y());
        centroid += a;
    }
    const double len = n.norm();
    if (!(len > 1e-12))
        throw InvalidArgument("polygon has zero area");
    normal = n / len;
    centroid /= static_cast<double>(polygon.size());
    offset = normal.dot(centroid);
    for (const auto& p : polygon)
        if (std::abs(normal.dot(p) - offset) > tolerance)
            throw InvalidArgument("polygon is not planar");
}

namespace detail
{
inline std::string local_name(const std::string& tag)
{
    const auto colon = tag.find(':');
    return colon == std::string::npos ? tag : tag.substr(colon + 1);
}

inline const boost::property_tree::ptree* child_named(const boost::property_tree::ptree& node, const std::string& name)
{
    for (const auto& [tag, child] : node)
        if (local_name(tag) == name)
            return &child;
    return nullptr;
}

inline std::optional<std::string> attribute(const boost::property_tree::ptree& node, const std::string& name)
{
    const auto* attrs = child_named(node, "<xmlattr>");
    if (!attrs)
        return std::nullopt;
    for (const auto& [tag, value] : *attrs)
        if (local_name(tag) == name)
            return value.data();
    return std::nullopt;
}

inline void collect_named(const boost::property_tree::ptree& node, const std::string& name,
                          std::vector<const boost::property_tree::ptree*>& out)
{
    for (const auto& [tag, child] : node) {
        if (tag == "<xmlattr>" || tag == "<xmlcomment>")
            continue;
        if (local_name(tag) == name)
            out.push_back(&child);
        else
            collect_named(child, name, out);
    }
}

inline std::vector<Eigen::Vector3d> read_polyloop(const boost::property_tree::ptree& loop)
{
    std::vector<Eigen::Vector3d> pts;
    for (const auto& [tag, point] : loop) {
        if (local_name(tag) != "CartesianPoint")
            continue;
        std::vector<double> coords;
        for (const auto& [ctag, coord] : point) {
            if (local_name(ctag) != "Coordinate")
                continue;
            try {
                coords.push_back(std::stod(coord.data()));
            } catch (const std::exception&) {
                throw ParseError("gbXML: non-numeric Coordinate '" + coord.data() + "'");
            }
        }
        if (coords.size() != 3)
            throw ParseError("gbXML: CartesianPoint must have 3 coordinates");
        pts.emplace_back(coords[0], coords[1], coords[2]);
    }
    return pts;
}
} // namespace detail

/// Reads Surface elements of a gbXML document. Surfaces with fewer than three points
/// or non-planar loops are skipped; a message is appended to `warnings` if given.
inline std::vector<BimSurface> parse_surfaces(std::istream& in, std::vector<std::string>* warnings = nullptr)
{
    namespace pt = boost::property_tree;
    pt::ptree doc;
    try {
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError("gbXML: " + e.message(), static_cast<long>(e.line()));
    }
    std::vector<const pt::ptree*> nodes;
    detail::collect_named(doc, "Surface", nodes);

    std::vector<BimSurface> out;
    for (const pt::ptree* node : nodes) {
        BimSurface s;
        s.id = detail::attribute(*node, "id").value_or("");
        s.surface_type = classify_surface(detail::attribute(*node, "surfaceType").value_or(""));
        const pt::ptree* geom = detail::child_named(*node, "PlanarGeometry");
        const pt::ptree* loop = geom ? detail::child_named(*geom, "PolyLoop") : nullptr;
        if (loop)
            s.polygon = detail::read_polyloop(*loop);
        try {
            fit_polygon_plane(s.polygon, s.plane_normal, s.plane_offset);
        } catch (const InvalidArgument& e) {
            if (warnings)
                warnings->push_back("surface '" + s.id + "' skipped: " + e.what());
            continue;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<BimSurface> parse_surfaces(const std::string& document, std::vector<std::string>* warnings = nullptr)
{
    std::istringstream in(document);
    return parse_surfaces(in, warnings);
}

namespace detail
{
// Point-in-polygon on the projection that drops the normal's dominant axis.
inline bool footprint_contains(const BimSurface& s, const Eigen::Vector3d& p)
{
    int drop = 0;
    s.plane_normal.cwiseAbs().maxCoeff(&drop);
    const int u = (drop + 1) % 3, v = (drop + 2) % 3;
    bool inside = false;
    const std::size_t n = s.polygon.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Eigen::Vector3d& a = s.polygon[i];
        const Eigen::Vector3d& b = s.polygon[j];
        if ((a[v] > p[v]) != (b[v] > p[v])) {
            const double x = (b[u] - a[u]) * (p[v] - a[v]) / (b[v] - a[v]) + a[u];
            if (p[u] < x)
                inside = !inside;
        }
    }
    return inside;
}

inline double mean_plane_distance(const BimSurface& s, const std::vector<Detection>& detections)
{
    double sum = 0.0;
    for (const auto& d : detections)
        sum += std::abs(s.plane_normal.dot(d.position) - s.plane_offset);
    return sum / static_cast<double>(detections.size());
}
} // namespace detail

/// Ceiling with the smallest mean point-plane distance among those whose footprint
/// contains the detection centroid; all ceilings compete when none contains it.
inline BimSurface closest_ceiling(const std::vector<BimSurface>& surfaces, const std::vector<Detection>& detections)
{
    if (detections.empty())
        throw InvalidArgument("closest_ceiling: no detections");
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& d : detections)
        centroid += d.position;
    centroid /= static_cast<double>(detections.size());

    const BimSurface* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    const BimSurface* best_any = nullptr;
    double best_any_dist = std::numeric_limits<double>::infinity();
    for (const auto& s : surfaces) {
        if (s.surface_type != SurfaceType::Ceiling)
            continue;
        const double dist = detail::mean_plane_distance(s, detections);
        if (dist < best_any_dist) {
            best_any_dist = dist;
            best_any = &s;
        }
        if (detail::footprint_contains(s, centroid) && dist < best_dist) {
            best_dist = dist;
            best = &s;
        }
    }
    if (!best_any)
        throw NotFound("closest_ceiling: no ceiling surfaces");
    return best ? *best : *best_any;
}

/// Least-squares offset of a plane with fixed unit normal: mean of n . p.
inline double estimate_offset(const Eigen::Vector3d& normal, const std::vector<Eigen::Vector3d>& positions)
{
    if (positions.empty())
        throw InvalidArgument("estimate_offset: no positions");
    double sum = 0.0;
    for (const auto& p : positions)
        sum += normal.dot(p);
    return sum / static_cast<double>(positions.size());
}

struct MsacOptions
{
    double max_distance = 0.30; // meters
    int sample_size = 2;
    int iterations = 200;
    std::uint64_t seed = 0;
};

/// Offset of a fixed-normal plane by MSAC over detection positions. Each hypothesis
/// is the mean projection of a random sample; its score is the sum of squared
/// residuals truncated at max_distance. The winning offset is re-fitted on its inliers.
inline PlaneEstimate msac_plane(const Eigen::Vector3d& normal, const std::vector<Detection>& detections,
                                const MsacOptions& options = {})
{
    if (options.sample_size < 1 || options.iterations < 1 || !(options.max_distance > 0.0))
        throw InvalidArgument("msac_plane: invalid options");
    const std::size_t n = detections.size();
    if (n < static_cast<std::size_t>(options.sample_size))
        throw InsufficientData("msac_plane: fewer detections than the sample size");
    const double nn = normal.norm();
    if (!(nn > 0.0))
        throw InvalidArgument("msac_plane: zero normal");
    const Eigen::Vector3d unit = normal / nn;

    std::vector<double> proj(n);
    for (std::size_t i = 0; i < n; ++i)
        proj[i] = unit.dot(detections[i].position);

    const double t2 = options.max_distance * options.max_distance;
    const auto msac_cost = [&](double offset) {
        double c = 0.0;
        for (double v : proj)
            c += std::min((v - offset) * (v - offset), t2);
        return c;
    };

    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> index(n);
    double best_offset = proj[0];
    double best_cost = std::numeric_limits<double>::infinity();
    for (int it = 0; it < options.iterations; ++it) {
        // Partial Fisher-Yates draw of sample_size distinct indices.
        for (std::size_t i = 0; i < n; ++i)
            index[i] = i;
        double hyp = 0.0;
        for (int k = 0; k < options.sample_size; ++k) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), n - 1);
            std::swap(index[static_cast<std::size_t>(k)], index[pick(rng)]);
            hyp += proj[index[static_cast<std::size_t>(k)]];
        }
        hyp /= options.sample_size;
        const double c = msac_cost(hyp);
        if (c < best_cost) {
            best_cost = c;
            best_offset = hyp;
        }
    }

    std::vector<Eigen::Vector3d> inliers;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(proj[i] - best_offset) <= options.max_distance)
            inliers.push_back(detections[i].position);

    PlaneEstimate est;
    est.normal = unit;
    est.offset = inliers.empty() ? best_offset : estimate_offset(unit, inliers);
    est.inlier_mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        est.inlier_mask[i] = std::abs(proj[i] - est.offset) <= options.max_distance;
        est.inlier_count += est.inlier_mask[i] ? 1 : 0;
    }
    return est;
}

/// Intersection of the camera ray through a detection with the plane n . p = offset.
inline Eigen::Vector3d project_detection(const Detection& detection, const Eigen::Vector3d& normal, double offset)
{
    const Eigen::Vector3d ray = detection.position - detection.camera_position;
    const double len = ray.norm();
    if (!(len > 0.0))
        throw InvalidArgument("project_detection: detection coincides with the camera");
    const Eigen::Vector3d f = ray / len;
    const double nf = normal.dot(f);
    if (std::abs(nf) <= 1e-6)
        throw ParallelRay("project_detection: ray parallel to plane");
    const double t = (normal.dot(detection.camera_position) - offset) / nf;
    return detection.camera_position - f * t;
}

inline Eigen::Vector3d project_detection(const Detection& detection, const PlaneEstimate& plane)
{
    return project_detection(detection, plane.normal, plane.offset);
}

} // namespace lampdet

#endif // LAMPDET_BIM_PLANE_HPP
