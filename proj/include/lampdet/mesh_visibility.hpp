#ifndef LAMPDET_MESH_VISIBILITY_HPP
#define LAMPDET_MESH_VISIBILITY_HPP

#include "lampdet/error.hpp"
#include "lampdet/pose.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace lampdet
{

/// Default sharpness threshold: dihedral interior angle below 140 degrees,
/// i.e. normals differing by more than 40 degrees.
inline const double kDefaultSharpThreshold = std::cos(40.0 * std::numbers::pi / 180.0);

struct MeshEdge
{
    int v0 = -1;
    int v1 = -1;
    std::array<int, 2> faces{-1, -1};
    int face_count = 0;
};

/// Triangle mesh with per-face unit normals and edge/face adjacency.
struct TriMesh
{
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Eigen::Vector3d> face_normals;
    std::vector<MeshEdge> edges;

    bool empty() const { return faces.empty(); }

    /// Builds normals and adjacency. Faces are counter-clockwise seen from outside.
    static TriMesh build(std::vector<Eigen::Vector3d> vertices, std::vector<std::array<int, 3>> faces)
    {
        TriMesh mesh;
        mesh.vertices = std::move(vertices);
        mesh.faces = std::move(faces);
        const int nv = static_cast<int>(mesh.vertices.size());
        std::map<std::pair<int, int>, int> edge_index;
        mesh.face_normals.reserve(mesh.faces.size());
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto& tri = mesh.faces[f];
            for (int idx : tri)
                if (idx < 0 || idx >= nv)
                    throw InvalidArgument("TriMesh: face index out of range");
            const Eigen::Vector3d n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                                          .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
            if (n.norm() < 1e-15)
                throw InvalidArgument("TriMesh: degenerate face " + std::to_string(f));
            mesh.face_normals.push_back(n.normalized());
            for (int k = 0; k < 3; ++k) {
                const int a = tri[k];
                const int b = tri[(k + 1) % 3];
                const auto key = std::minmax(a, b);
                auto [it, inserted] = edge_index.try_emplace({key.first, key.second}, static_cast<int>(mesh.edges.size()));
                if (inserted)
                    mesh.edges.push_back(MeshEdge{a, b, {-1, -1}, 0});
                MeshEdge& e = mesh.edges[it->second];
                if (e.face_count == 2)
                    throw InvalidArgument("TriMesh: non-manifold edge with more than two faces");
                e.faces[e.face_count++] = static_cast<int>(f);
            }
        }
        return mesh;
    }

    double longest_edge() const
    {
        double best = 0.0;
        for (const auto& e : edges)
            best = std::max(best, (vertices[e.v1] - vertices[e.v0]).norm());
        return best;
    }
};

/// Model-frame edge, optionally remembering which faces it bounds.
struct Edge3D
{
    Eigen::Vector3d point_a = Eigen::Vector3d::Zero();
    Eigen::Vector3d point_b = Eigen::Vector3d::Zero();
    std::array<int, 2> adjacent_faces{-1, -1};
    int face_count = 0;

    double length() const { return (point_b - point_a).norm(); }
};

/// Per-pixel view-space depth; +inf where nothing was drawn.
struct DepthBuffer
{
    int width = 0;
    int height = 0;
    std::vector<double> depth;

    DepthBuffer() = default;
    DepthBuffer(int w, int h) : width(w), height(h), depth(static_cast<std::size_t>(w) * h, kBackground) {}

    static constexpr double kBackground = std::numeric_limits<double>::infinity();

    double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

// ---------------------------------------------------------------------------
// Prominent edges

namespace detail
{
inline int third_vertex(const std::array<int, 3>& tri, int a, int b)
{
    for (int v : tri)
        if (v != a && v != b)
            return v;
    return tri[0];
}

inline bool front_facing(const TriMesh& mesh, int face, const Pose& pose)
{
    const Eigen::Vector3d n = pose.rotation * mesh.face_normals[face];
    const Eigen::Vector3d p = pose * mesh.vertices[mesh.faces[face][0]];
    return n.dot(p) < 0.0;
}
} // namespace detail

/// Interior-angle sharpness test for an edge shared by two faces.
inline bool is_sharp(const TriMesh& mesh, const MeshEdge& edge, double sharp_threshold = kDefaultSharpThreshold)
{
    if (edge.face_count != 2)
        return false;
    const Eigen::Vector3d& na = mesh.face_normals[edge.faces[0]];
    const Eigen::Vector3d& nb = mesh.face_normals[edge.faces[1]];
    const int other = detail::third_vertex(mesh.faces[edge.faces[1]], edge.v0, edge.v1);
    const Eigen::Vector3d vb = mesh.vertices[other] - mesh.vertices[edge.v0];
    return na.dot(nb) < sharp_threshold && na.dot(vb) < 0.0;
}

/// Outline test: exactly one adjacent face looks at the camera. Boundary edges
/// (one face) count as outline when that face is front-facing.
inline bool is_outline(const TriMesh& mesh, const MeshEdge& edge, const Pose& pose)
{
    if (edge.face_count == 1)
        return detail::front_facing(mesh, edge.faces[0], pose);
    if (edge.face_count != 2)
        return false;
    return detail::front_facing(mesh, edge.faces[0], pose) != detail::front_facing(mesh, edge.faces[1], pose);
}

inline std::vector<Edge3D> extract_prominent_edges(const TriMesh& mesh, const Pose& pose,
                                                   double sharp_threshold = kDefaultSharpThreshold)
{
    std::vector<Edge3D> out;
    for (const auto& e : mesh.edges) {
        if (is_sharp(mesh, e, sharp_threshold) || is_outline(mesh, e, pose))
            out.push_back(Edge3D{mesh.vertices[e.v0], mesh.vertices[e.v1], e.faces, e.face_count});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Software depth rendering

namespace detail
{
constexpr double kNearPlane = 1e-3;

// Sutherland-Hodgman against z >= near, in camera coordinates.
inline std::vector<Eigen::Vector3d> clip_near(const std::array<Eigen::Vector3d, 3>& tri)
{
    std::vector<Eigen::Vector3d> out;
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d& cur = tri[i];
        const Eigen::Vector3d& nxt = tri[(i + 1) % 3];
        const bool cin = cur.z() >= kNearPlane;
        const bool nin = nxt.z() >= kNearPlane;
        if (cin)
            out.push_back(cur);
        if (cin != nin) {
            const double t = (kNearPlane - cur.z()) / (nxt.z() - cur.z());
            out.push_back(cur + t * (nxt - cur));
        }
    }
    return out;
}

inline void raster_triangle(DepthBuffer& buf, const CameraIntrinsics& cam, const Eigen::Vector3d& p0,
                            const Eigen::Vector3d& p1, const Eigen::Vector3d& p2)
{
    const auto proj = [&](const Eigen::Vector3d& p) {
        return Eigen::Vector2d(cam.focal_x * p.x() / p.z() + cam.principal_x,
                               cam.focal_y * p.y() / p.z() + cam.principal_y);
    };
    const Eigen::Vector2d s0 = proj(p0), s1 = proj(p1), s2 = proj(p2);
    const double area = (s1 - s0).x() * (s2 - s0).y() - (s1 - s0).y() * (s2 - s0).x();
    if (std::abs(area) < 1e-12)
        return;
    const int x_lo = std::max(0, static_cast<int>(std::ceil(std::min({s0.x(), s1.x(), s2.x()}))));
    const int x_hi = std::min(buf.width - 1, static_cast<int>(std::floor(std::max({s0.x(), s1.x(), s2.x()}))));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(std::min({s0.y(), s1.y(), s2.y()}))));
    const int y_hi = std::min(buf.height - 1, static_cast<int>(std::floor(std::max({s0.y(), s1.y(), s2.y()}))));
    const double inv_area = 1.0 / area;
    const double eps = -1e-9;
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            const Eigen::Vector2d q(x, y);
            const double w0 = ((s1 - q).x() * (s2 - q).y() - (s1 - q).y() * (s2 - q).x()) * inv_area;
            const double w1 = ((s2 - q).x() * (s0 - q).y() - (s2 - q).y() * (s0 - q).x()) * inv_area;
            const double w2 = 1.0 - w0 - w1;
            if (w0 < eps || w1 < eps || w2 < eps)
                continue;
            // 1/z is affine in screen space.
            const double inv_z = w0 / p0.z() + w1 / p1.z() + w2 / p2.z();
            const double z = 1.0 / inv_z;
            double& d = buf.at(x, y);
            if (z < d)
                d = z;
        }
    }
}
} // namespace detail

inline DepthBuffer rasterize_depth(const TriMesh& mesh, const Pose& pose, const CameraIntrinsics& cam)
{
    if (cam.width <= 0 || cam.height <= 0)
        throw InvalidArgument("rasterize_depth: camera dimensions must be positive");
    DepthBuffer buf(cam.width, cam.height);
    for (const auto& tri : mesh.faces) {
        const std::array<Eigen::Vector3d, 3> c{pose * mesh.vertices[tri[0]], pose * mesh.vertices[tri[1]],
                                               pose * mesh.vertices[tri[2]]};
        if (c[0].z() >= detail::kNearPlane && c[1].z() >= detail::kNearPlane && c[2].z() >= detail::kNearPlane) {
            detail::raster_triangle(buf, cam, c[0], c[1], c[2]);
            continue;
        }
        const auto poly = detail::clip_near(c);
        for (std::size_t i = 1; i + 1 < poly.size(); ++i)
            detail::raster_triangle(buf, cam, poly[0], poly[i], poly[i + 1]);
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Occlusion clipping

struct ClipOptions
{
    double sample_step = 2.0;  // pixels
    double bias_ratio = 1e-3;  // depth bias as a fraction of sample depth
    int neighborhood = 1;      // buffer depth = max over (2n+1)^2 pixels around the sample
};

/// Splits each edge into visible runs. A sample is visible when its depth does not
/// exceed the buffer depth plus bias; the buffer depth at a sample is the largest
/// value in a small pixel neighbourhood, which keeps edges lying on oblique faces
/// from self-occluding through rasterization quantization.
inline std::vector<Edge3D> clip_visible(const std::vector<Edge3D>& edges, const DepthBuffer& depth,
                                        const Pose& pose, const CameraIntrinsics& cam,
                                        const ClipOptions& options = {})
{
    std::vector<Edge3D> out;
    const double step = std::max(options.sample_step, 1e-3);
    for (const auto& edge : edges) {
        const Eigen::Vector3d a = pose * edge.point_a;
        const Eigen::Vector3d b = pose * edge.point_b;
        double t0 = 0.0, t1 = 1.0;
        const double near = detail::kNearPlane;
        if (a.z() < near && b.z() < near)
            continue;
        if (a.z() < near)
            t0 = (near - a.z()) / (b.z() - a.z());
        else if (b.z() < near)
            t1 = (near - a.z()) / (b.z() - a.z());

        const auto cam_point = [&](double t) -> Eigen::Vector3d { return a + t * (b - a); };
        const auto pixel = [&](const Eigen::Vector3d& p) {
            return Eigen::Vector2d(cam.focal_x * p.x() / p.z() + cam.principal_x,
                                   cam.focal_y * p.y() / p.z() + cam.principal_y);
        };
        const double pix_len = (pixel(cam_point(t1)) - pixel(cam_point(t0))).norm();
        const int n = std::max(1, static_cast<int>(std::ceil(pix_len / step)));

        const auto visible = [&](double t) {
            const Eigen::Vector3d p = cam_point(t);
            const Eigen::Vector2d uv = pixel(p);
            const int px = static_cast<int>(std::lround(uv.x()));
            const int py = static_cast<int>(std::lround(uv.y()));
            if (!depth.contains(px, py))
                return false;
            double buffer = 0.0;
            for (int dy = -options.neighborhood; dy <= options.neighborhood; ++dy)
                for (int dx = -options.neighborhood; dx <= options.neighborhood; ++dx)
                    if (depth.contains(px + dx, py + dy))
                        buffer = std::max(buffer, depth.at(px + dx, py + dy));
            return p.z() <= buffer + options.bias_ratio * p.z();
        };

        int run_start = -1;
        const auto emit = [&](int first, int last) {
            if (last <= first)
                return;
            const double ta = t0 + (t1 - t0) * first / n;
            const double tb = t0 + (t1 - t0) * last / n;
            Edge3D piece = edge;
            piece.point_a = edge.point_a + ta * (edge.point_b - edge.point_a);
            piece.point_b = edge.point_a + tb * (edge.point_b - edge.point_a);
            out.push_back(piece);
        };
        for (int k = 0; k <= n; ++k) {
            const bool vis = visible(t0 + (t1 - t0) * k / n);
            if (vis && run_start < 0)
                run_start = k;
            if (!vis && run_start >= 0) {
                emit(run_start, k - 1);
                run_start = -1;
            }
        }
        if (run_start >= 0)
            emit(run_start, n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subdivision

/// Splits every edge into equal pieces no longer than `max_length`.
inline std::vector<Edge3D> subdivide_to_length(const std::vector<Edge3D>& edges, double max_length)
{
    std::vector<Edge3D> out;
    for (const auto& e : edges) {
        const double len = e.length();
        const int n = std::max(1, static_cast<int>(std::ceil(len / max_length - 1e-9)));
        for (int k = 0; k < n; ++k) {
            Edge3D piece = e;
            piece.point_a = e.point_a + (static_cast<double>(k) / n) * (e.point_b - e.point_a);
            piece.point_b = e.point_a + (static_cast<double>(k + 1) / n) * (e.point_b - e.point_a);
            out.push_back(piece);
        }
    }
    return out;
}

/// Splits every edge into equal pieces no longer than `fraction` of the longest input edge.
inline std::vector<Edge3D> subdivide(const std::vector<Edge3D>& edges, double fraction)
{
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw InvalidArgument("subdivide: fraction must be in (0, 1]");
    double longest = 0.0;
    for (const auto& e : edges)
        longest = std::max(longest, e.length());
    if (longest <= 0.0)
        return edges;
    return subdivide_to_length(edges, fraction * longest);
}

// ---------------------------------------------------------------------------
// Plain-text mesh format:
//   <num_vertices> <num_faces>
//   x y z            (num_vertices lines, meters)
//   i j k            (num_faces lines, zero-based)
// Blank lines and lines starting with '#' are ignored.

inline TriMesh load_mesh(std::istream& in)
{
    std::string line;
    long line_no = 0;
    const auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++line_no;
            const auto pos = out.find_first_not_of(" \t\r");
            if (pos == std::string::npos || out[pos] == '#')
                continue;
            return true;
        }
        return false;
    };
    if (!next_line(line))
        throw ParseError("mesh: missing header", line_no);
    long nv = -1, nf = -1;
    {
        std::istringstream hs(line);
        if (!(hs >> nv >> nf) || nv < 0 || nf < 0)
            throw ParseError("mesh: bad header, expected '<vertices> <faces>'", line_no);
    }
    std::vector<Eigen::Vector3d> vertices;
    vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        if (!next_line(line))
            throw ParseError("mesh: unexpected end of vertex list", line_no);
        std::istringstream ls(line);
        double x, y, z;
        std::string extra;
        if (!(ls >> x >> y >> z) || (ls >> extra))
            throw ParseError("mesh: vertex line needs exactly 3 numbers", line_no);
        vertices.emplace_back(x, y, z);
    }
    std::vector<std::array<int, 3>> faces;
    faces.reserve(nf);
    for (long i = 0; i < nf; ++i) {
        if (!next_line(line))
            throw ParseError("mesh: unexpected end of face list", line_no);
        std::istringstream ls(line);
        std::vector<long> idx;
        long v;
        while (ls >> v)
            idx.push_back(v);
        if (!ls.eof())
            throw ParseError("mesh: face line contains non-integer token", line_no);
        if (idx.size() != 3)
            throw ParseError("mesh: non-triangular face", line_no);
        for (long k : idx)
            if (k < 0 || k >= nv)
                throw ParseError("mesh: face index out of range", line_no);
        faces.push_back({static_cast<int>(idx[0]), static_cast<int>(idx[1]), static_cast<int>(idx[2])});
    }
    try {
        return TriMesh::build(std::move(vertices), std::move(faces));
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("mesh: ") + e.what(), line_no);
    }
}

inline TriMesh load_mesh_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open mesh file: " + path);
    return load_mesh(in);
}

inline void save_mesh(std::ostream& out, const TriMesh& mesh)
{
    out << mesh.vertices.size() << ' ' << mesh.faces.size() << '\n';
    out.precision(17);
    for (const auto& v : mesh.vertices)
        out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& f : mesh.faces)
        out << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

// ---------------------------------------------------------------------------
// Parametric solids

/// Extrudes a counter-clockwise (seen from +z) polygon between two heights.
inline TriMesh make_prism(const std::vector<Eigen::Vector2d>& polygon, double z_bottom, double z_top)
{
    const int n = static_cast<int>(polygon.size());
    if (n < 3 || !(z_top > z_bottom))
        throw InvalidArgument("make_prism: need >= 3 vertices and positive height");
    std::vector<Eigen::Vector3d> v;
    for (const auto& p : polygon)
        v.emplace_back(p.x(), p.y(), z_bottom);
    for (const auto& p : polygon)
        v.emplace_back(p.x(), p.y(), z_top);
    std::vector<std::array<int, 3>> f;
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        f.push_back({i, j, n + j});
        f.push_back({i, n + j, n + i});
    }
    for (int i = 1; i + 1 < n; ++i) {
        f.push_back({n, n + i, n + i + 1});
        f.push_back({0, i + 1, i});
    }
    return TriMesh::build(std::move(v), std::move(f));
}

/// Axis-aligned box centred on the z axis.
inline TriMesh make_box(double size_x, double size_y, double z_bottom, double z_top)
{
    const double hx = 0.5 * size_x, hy = 0.5 * size_y;
    return make_prism({{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}}, z_bottom, z_top);
}

inline TriMesh make_regular_prism(int sides, double radius, double z_bottom, double z_top)
{
    std::vector<Eigen::Vector2d> poly;
    for (int i = 0; i < sides; ++i) {
        const double a = 2.0 * std::numbers::pi * i / sides;
        poly.emplace_back(radius * std::cos(a), radius * std::sin(a));
    }
    return make_prism(poly, z_bottom, z_top);
}

} // namespace lampdet

#endif // LAMPDET_MESH_VISIBILITY_HPP
