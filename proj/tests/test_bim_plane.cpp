#include "lampdet/bim_plane.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace lampdet;

namespace
{
std::string data_path(const std::string& name) { return std::string(LAMPDET_TEST_DATA) + "/" + name; }

std::string loop_surface(const std::string& id, const std::string& type, const std::vector<Eigen::Vector3d>& pts)
{
    std::ostringstream s;
    s << "<Surface id=\"" << id << "\" surfaceType=\"" << type << "\"><PlanarGeometry><PolyLoop>";
    for (const auto& p : pts)
        s << "<CartesianPoint><Coordinate>" << p.x() << "</Coordinate><Coordinate>" << p.y()
          << "</Coordinate><Coordinate>" << p.z() << "</Coordinate></CartesianPoint>";
    s << "</PolyLoop></PlanarGeometry></Surface>";
    return s.str();
}

std::string document(const std::string& body)
{
    return "<?xml version=\"1.0\"?>\n<gbXML xmlns=\"http://www.gbxml.org/schema\"><Campus>" + body + "</Campus></gbXML>\n";
}

BimSurface horizontal_ceiling(const std::string& id, double x0, double x1, double y0, double y1, double z)
{
    BimSurface s;
    s.id = id;
    s.surface_type = SurfaceType::Ceiling;
    s.polygon = {{x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}};
    s.plane_normal = Eigen::Vector3d::UnitZ();
    s.plane_offset = z;
    return s;
}

Detection at(const Eigen::Vector3d& p, const Eigen::Vector3d& cam = {0.0, 0.0, 1.0})
{
    Detection d;
    d.position = p;
    d.camera_position = cam;
    return d;
}

std::vector<Detection> heights(const std::vector<double>& zs)
{
    std::vector<Detection> out;
    for (std::size_t i = 0; i < zs.size(); ++i)
        out.push_back(at({0.3 * static_cast<double>(i), 0.1 * static_cast<double>(i % 3), zs[i]}));
    return out;
}

struct ManifestRow
{
    std::string type;
    Eigen::Vector3d normal;
    double offset;
};

std::map<std::string, ManifestRow> read_manifest()
{
    std::ifstream in(data_path("building20_manifest.csv"));
    std::map<std::string, ManifestRow> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string id, type, f;
        std::getline(ss, id, ',');
        std::getline(ss, type, ',');
        double v[4];
        for (double& x : v) {
            std::getline(ss, f, ',');
            x = std::stod(f);
        }
        rows[id] = ManifestRow{type, {v[0], v[1], v[2]}, v[3]};
    }
    return rows;
}

std::vector<BimSurface> building()
{
    std::ifstream in(data_path("building20.xml"));
    return parse_surfaces(in);
}
} // namespace

TEST(ParseSurfaces, MinimalHorizontalLoop)
{
    const auto surfaces = parse_surfaces(document(loop_surface("c1", "Ceiling", {{0, 0, 3}, {4, 0, 3}, {4, 3, 3}, {0, 3, 3}})));
    ASSERT_EQ(surfaces.size(), 1u);
    const BimSurface& s = surfaces[0];
    EXPECT_EQ(s.id, "c1");
    EXPECT_EQ(s.surface_type, SurfaceType::Ceiling);
    EXPECT_NEAR(std::abs(s.plane_normal.z()), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(s.plane_offset), 3.0, 1e-12);
    for (const auto& p : s.polygon)
        EXPECT_NEAR(s.plane_normal.dot(p), s.plane_offset, 1e-12);
}

TEST(ParseSurfaces, EmptyDocument)
{
    EXPECT_TRUE(parse_surfaces(document("")).empty());
    EXPECT_TRUE(parse_surfaces(std::string("<gbXML/>")).empty());
}

TEST(ParseSurfaces, MalformedXmlReportsLine)
{
    const std::string bad = "<?xml version=\"1.0\"?>\n<gbXML>\n<Campus>\n<Surface id=\"a\">\n</Campus>\n</gbXML>\n";
    try {
        parse_surfaces(bad);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_GE(e.line(), 4);
        EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
    }
}

TEST(ParseSurfaces, ShortAndNonPlanarLoopsSkippedWithWarning)
{
    const std::string body = loop_surface("two", "Ceiling", {{0, 0, 3}, {1, 0, 3}}) +
                             loop_surface("bent", "ExteriorWall", {{0, 0, 0}, {1, 0, 0}, {1, 1, 0.1}, {0, 1, 0}}) +
                             loop_surface("ok", "InteriorFloor", {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    std::vector<std::string> warnings;
    const auto surfaces = parse_surfaces(document(body), &warnings);
    ASSERT_EQ(surfaces.size(), 1u);
    EXPECT_EQ(surfaces[0].id, "ok");
    EXPECT_EQ(surfaces[0].surface_type, SurfaceType::Floor);
    ASSERT_EQ(warnings.size(), 2u);
    EXPECT_NE(warnings[0].find("two"), std::string::npos);
    EXPECT_NE(warnings[1].find("bent"), std::string::npos);
}

TEST(ParseSurfaces, FixtureMatchesManifest)
{
    const auto surfaces = building();
    const auto manifest = read_manifest();
    ASSERT_EQ(surfaces.size(), 20u);
    ASSERT_EQ(manifest.size(), 20u);
    for (const auto& s : surfaces) {
        const auto it = manifest.find(s.id);
        ASSERT_NE(it, manifest.end()) << s.id;
        EXPECT_EQ(to_string(s.surface_type), it->second.type) << s.id;
        EXPECT_NEAR((s.plane_normal - it->second.normal).norm(), 0.0, 1e-9) << s.id;
        EXPECT_NEAR(s.plane_offset, it->second.offset, 1e-9) << s.id;
        EXPECT_NEAR(s.plane_normal.norm(), 1.0, 1e-9);
        for (const auto& p : s.polygon)
            EXPECT_NEAR(s.plane_normal.dot(p), s.plane_offset, 1e-6);
    }
}

TEST(ClosestCeiling, SingleCeiling)
{
    const std::vector<BimSurface> surfaces{horizontal_ceiling("only", 0, 4, 0, 4, 3)};
    EXPECT_EQ(closest_ceiling(surfaces, heights({2.9, 2.95})).id, "only");
}

TEST(ClosestCeiling, StackedCeilingsPicksNearer)
{
    BimSurface wall = horizontal_ceiling("wall", 0, 4, 0, 4, 2.5);
    wall.surface_type = SurfaceType::Wall;
    const std::vector<BimSurface> surfaces{horizontal_ceiling("upper", 0, 4, 0, 4, 6), wall,
                                           horizontal_ceiling("lower", 0, 4, 0, 4, 3)};
    EXPECT_EQ(closest_ceiling(surfaces, heights({2.5, 2.45, 2.55})).id, "lower");
}

TEST(ClosestCeiling, Errors)
{
    BimSurface floor = horizontal_ceiling("floor", 0, 4, 0, 4, 0);
    floor.surface_type = SurfaceType::Floor;
    EXPECT_THROW(closest_ceiling({floor}, heights({2.5})), NotFound);
    EXPECT_THROW(closest_ceiling({horizontal_ceiling("c", 0, 1, 0, 1, 3)}, {}), InvalidArgument);
}

TEST(ClosestCeiling, MultiRoomMatchesBruteForce)
{
    const auto surfaces = building();
    std::vector<const BimSurface*> ceilings;
    for (const auto& s : surfaces)
        if (s.surface_type == SurfaceType::Ceiling)
            ceilings.push_back(&s);
    ASSERT_EQ(ceilings.size(), 4u);
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> ux(-1.0, 10.0), uy(-1.0, 5.0), uz(0.5, 7.0), jitter(-0.3, 0.3);
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Vector3d c(ux(rng), uy(rng), uz(rng));
        std::vector<Detection> dets;
        for (int k = 0; k < 6; ++k)
            dets.push_back(at(c + Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng))));
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        for (const auto& d : dets)
            centroid += d.position / 6.0;
        // Fixture ceilings are axis-aligned rectangles: containment is a bounds check.
        std::string best_in, best_any;
        double in_dist = 1e300, any_dist = 1e300;
        for (const BimSurface* s : ceilings) {
            double dist = 0.0;
            for (const auto& d : dets)
                dist += std::abs(s->plane_normal.dot(d.position) - s->plane_offset) / 6.0;
            double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
            for (const auto& p : s->polygon) {
                x0 = std::min(x0, p.x());
                x1 = std::max(x1, p.x());
                y0 = std::min(y0, p.y());
                y1 = std::max(y1, p.y());
            }
            const bool inside = centroid.x() > x0 && centroid.x() < x1 && centroid.y() > y0 && centroid.y() < y1;
            if (dist < any_dist) {
                any_dist = dist;
                best_any = s->id;
            }
            if (inside && dist < in_dist) {
                in_dist = dist;
                best_in = s->id;
            }
        }
        const std::string expected = best_in.empty() ? best_any : best_in;
        EXPECT_EQ(closest_ceiling(surfaces, dets).id, expected) << "trial " << trial;
    }
}

TEST(EstimateOffset, Examples)
{
    const Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
    EXPECT_NEAR(estimate_offset(n, {{0, 0, 3.0}, {1, 0, 3.1}, {0, 2, 2.9}}), 3.0, 1e-15);
    const Eigen::Vector3d m = Eigen::Vector3d(1, 2, 2) / 3.0;
    const Eigen::Vector3d p(0.3, -1.2, 4.4);
    EXPECT_EQ(estimate_offset(m, {p}), m.dot(p));
    EXPECT_THROW(estimate_offset(n, {}), InvalidArgument);
}

TEST(EstimateOffset, MatchesLeastSquaresSolve)
{
    std::mt19937_64 rng(73);
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::Vector3d n = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
    std::vector<Eigen::Vector3d> pts;
    Eigen::MatrixXd A = Eigen::MatrixXd::Ones(1000, 1);
    Eigen::VectorXd b(1000);
    for (int i = 0; i < 1000; ++i) {
        pts.emplace_back(3.0 * g(rng), 3.0 * g(rng), 3.0 + g(rng));
        b[i] = n.dot(pts.back());
    }
    const double lsq = A.colPivHouseholderQr().solve(b)[0];
    EXPECT_NEAR(estimate_offset(n, pts), lsq, 1e-12);
}

TEST(Msac, AllPointsOnPlane)
{
    const auto dets = heights({3.0, 3.0, 3.0, 3.0, 3.0, 3.0});
    const PlaneEstimate e = msac_plane(Eigen::Vector3d::UnitZ(), dets);
    EXPECT_EQ(e.inlier_count, 6);
    EXPECT_EQ(e.offset, 3.0);
}

TEST(Msac, RejectsGrossOutlierLikeExhaustiveSearch)
{
    std::vector<double> zs{3.004, 2.991, 3.010, 2.998, 3.007, 2.993, 3.001, 2.990, 3.009, 2.996, 4.0};
    const auto dets = heights(zs);
    MsacOptions o;
    o.seed = 5;
    const PlaneEstimate e = msac_plane(Eigen::Vector3d::UnitZ(), dets, o);
    EXPECT_FALSE(e.inlier_mask.back());
    EXPECT_EQ(e.inlier_count, 10);
    EXPECT_NEAR(e.offset, 3.0, 0.02);

    // Exhaustive enumeration of every pair hypothesis.
    double best_cost = 1e300, best_hyp = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i)
        for (std::size_t j = i + 1; j < zs.size(); ++j) {
            const double h = 0.5 * (zs[i] + zs[j]);
            double c = 0.0;
            for (double z : zs)
                c += std::min((z - h) * (z - h), 0.09);
            if (c < best_cost) {
                best_cost = c;
                best_hyp = h;
            }
        }
    double sum = 0.0;
    int count = 0;
    for (double z : zs)
        if (std::abs(z - best_hyp) <= 0.3) {
            sum += z;
            ++count;
        }
    EXPECT_EQ(e.inlier_count, count);
    EXPECT_NEAR(e.offset, sum / count, 1e-12);
}

TEST(Msac, InsufficientData)
{
    EXPECT_THROW(msac_plane(Eigen::Vector3d::UnitZ(), heights({3.0})), InsufficientData);
    MsacOptions o;
    o.max_distance = 0.0;
    EXPECT_THROW(msac_plane(Eigen::Vector3d::UnitZ(), heights({3.0, 3.1}), o), InvalidArgument);
}

TEST(Msac, DeterministicPerSeed)
{
    std::mt19937_64 rng(79);
    std::normal_distribution<double> g(3.0, 0.2);
    std::vector<double> zs;
    for (int i = 0; i < 60; ++i)
        zs.push_back(i % 7 == 0 ? g(rng) + 1.5 : g(rng));
    const auto dets = heights(zs);
    MsacOptions o;
    o.seed = 11;
    const PlaneEstimate a = msac_plane(Eigen::Vector3d::UnitZ(), dets, o);
    const PlaneEstimate b = msac_plane(Eigen::Vector3d::UnitZ(), dets, o);
    EXPECT_EQ(a.offset, b.offset);
    EXPECT_EQ(a.inlier_mask, b.inlier_mask);
    for (std::size_t i = 0; i < dets.size(); ++i)
        if (a.inlier_mask[i]) {
            EXPECT_LE(std::abs(dets[i].position.z() - a.offset), o.max_distance);
        }
}

TEST(Msac, TranslationInvariance)
{
    std::mt19937_64 rng(83);
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::Vector3d n = Eigen::Vector3d(0.1, -0.2, 1.0).normalized();
    std::vector<Detection> dets;
    for (int i = 0; i < 40; ++i) {
        const Eigen::Vector3d in_plane = Eigen::Vector3d(g(rng), g(rng), g(rng)).cross(n);
        const double height = 3.0 + (i % 9 == 0 ? 0.8 : 0.05 * g(rng));
        dets.push_back(at(in_plane + height * n));
    }
    MsacOptions o;
    o.seed = 3;
    const PlaneEstimate base = msac_plane(n, dets, o);
    const Eigen::Vector3d along = Eigen::Vector3d(1.7, -0.4, 0.2).cross(n);
    auto slid = dets;
    for (auto& d : slid)
        d.position += along;
    const PlaneEstimate moved = msac_plane(n, slid, o);
    EXPECT_EQ(moved.inlier_mask, base.inlier_mask);
    EXPECT_NEAR(moved.offset, base.offset, 1e-12);
    auto lifted = dets;
    for (auto& d : lifted)
        d.position += 0.75 * n;
    const PlaneEstimate up = msac_plane(n, lifted, o);
    EXPECT_EQ(up.inlier_mask, base.inlier_mask);
    EXPECT_NEAR(up.offset, base.offset + 0.75, 1e-12);
}

TEST(Msac, EmbeddedLampsBehaveAsIdentity)
{
    std::mt19937_64 rng(89);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<double> zs;
    for (int i = 0; i < 25; ++i)
        zs.push_back(3.0 + u(rng));
    const auto dets = heights(zs);
    const PlaneEstimate e = msac_plane(Eigen::Vector3d::UnitZ(), dets);
    EXPECT_EQ(e.inlier_count, 25);
    std::vector<Eigen::Vector3d> pts;
    for (const auto& d : dets)
        pts.push_back(d.position);
    EXPECT_NEAR(e.offset, estimate_offset(Eigen::Vector3d::UnitZ(), pts), 1e-12);
}

TEST(ProjectDetection, AxisRay)
{
    const Eigen::Vector3d p = project_detection(at({0, 0, 2}, {0, 0, 0}), Eigen::Vector3d::UnitZ(), 3.0);
    EXPECT_NEAR((p - Eigen::Vector3d(0, 0, 3)).norm(), 0.0, 1e-12);
}

TEST(ProjectDetection, PointOnPlaneUnchanged)
{
    const Detection d = at({1.2, -0.7, 3.0}, {0.3, 0.4, 1.1});
    EXPECT_NEAR((project_detection(d, Eigen::Vector3d::UnitZ(), 3.0) - d.position).norm(), 0.0, 1e-9);
}

TEST(ProjectDetection, RandomRaysSatisfyBothEquations)
{
    std::mt19937_64 rng(97);
    std::normal_distribution<double> g(0.0, 1.0);
    int done = 0;
    while (done < 2000) {
        const Eigen::Vector3d n = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
        const double offset = 3.0 * g(rng);
        const Detection d = at(Eigen::Vector3d(g(rng), g(rng), g(rng)) * 3.0, Eigen::Vector3d(g(rng), g(rng), g(rng)));
        const Eigen::Vector3d f = (d.position - d.camera_position).normalized();
        if (std::abs(n.dot(f)) < 1e-3)
            continue;
        const Eigen::Vector3d p = project_detection(d, n, offset);
        const double scale = std::max(1.0, (p - d.camera_position).norm());
        EXPECT_LE(std::abs(n.dot(p) - offset), 1e-9 * scale);
        EXPECT_LE((p - d.camera_position).cross(f).norm(), 1e-9 * scale);
        ++done;
    }
}

TEST(ProjectDetection, Errors)
{
    EXPECT_THROW(project_detection(at({1, 0, 1}, {0, 0, 1}), Eigen::Vector3d::UnitZ(), 3.0), ParallelRay);
    EXPECT_THROW(project_detection(at({0, 0, 1}, {0, 0, 1}), Eigen::Vector3d::UnitZ(), 3.0), InvalidArgument);
}
