#ifndef LAMPDET_IMAGE_EDGES_HPP
#define LAMPDET_IMAGE_EDGES_HPP

#include "lampdet/error.hpp"
#include "lampdet/segment.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace lampdet
{

struct GrayImage
{
    int width = 0;
    int height = 0;
    std::vector<float> intensity; // row-major, [0, 255]

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.0f)
        : width(w), height(h), intensity(static_cast<std::size_t>(w) * h, fill)
    {
        if (w <= 0 || h <= 0)
            throw InvalidArgument("GrayImage: dimensions must be positive");
    }

    float at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return intensity[static_cast<std::size_t>(y) * width + x]; }
};

/// Line detector parameters. `rho` is the gradient-magnitude threshold, `tau` the
/// region-growing angle tolerance in degrees. `epsilon` is kept for
/// configuration round-trips; the reference detector does no NFA validation.
struct DetectorConfig
{
    double rho = 1.83;
    double tau = 22.5;
    double epsilon = 1.0;
    double min_length = 5.0;
    double min_density = 0.7;

    void validate() const
    {
        if (!(tau > 0.0 && tau < 90.0))
            throw InvalidArgument("DetectorConfig: tau must be in (0, 90) degrees");
        if (!(min_length >= 1.0))
            throw InvalidArgument("DetectorConfig: min_length must be >= 1");
    }
};

/// Pluggable segment detector.
class SegmentDetector
{
public:
    virtual ~SegmentDetector() = default;
    virtual std::vector<Segment2D> detect(const GrayImage& image) const = 0;
};

/// Gradient-orientation region growing in the style of LSD: pixels are visited in
/// decreasing gradient magnitude, regions of aligned level-line angle are grown and
/// each region is summarised by its principal-axis rectangle.
class RegionGrowingDetector : public SegmentDetector
{
public:
    explicit RegionGrowingDetector(DetectorConfig config = {}) : config_(config) { config_.validate(); }

    std::vector<Segment2D> detect(const GrayImage& image) const override
    {
        if (image.width <= 0 || image.height <= 0)
            throw InvalidArgument("detect_segments: empty image");
        const int gw = image.width - 1;
        const int gh = image.height - 1;
        std::vector<Segment2D> out;
        if (gw <= 0 || gh <= 0)
            return out;

        // 2x2 gradient located at pixel corners (x + 0.5, y + 0.5).
        std::vector<double> mag(static_cast<std::size_t>(gw) * gh, 0.0);
        std::vector<double> ang(mag.size(), 0.0);
        for (int y = 0; y < gh; ++y) {
            for (int x = 0; x < gw; ++x) {
                const double a = image.at(x, y), b = image.at(x + 1, y);
                const double c = image.at(x, y + 1), d = image.at(x + 1, y + 1);
                const double gx = 0.5 * ((b + d) - (a + c));
                const double gy = 0.5 * ((c + d) - (a + b));
                const std::size_t i = static_cast<std::size_t>(y) * gw + x;
                mag[i] = std::hypot(gx, gy);
                // Level-line angle: perpendicular to the gradient.
                ang[i] = std::atan2(gx, -gy);
            }
        }

        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < mag.size(); ++i)
            if (mag[i] > config_.rho)
                order.push_back(i);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return mag[l] > mag[r]; });

        const double tol = config_.tau * std::numbers::pi / 180.0;
        std::vector<std::uint8_t> used(mag.size(), 0);

        std::vector<std::size_t> region;
        for (std::size_t seed : order) {
            if (used[seed])
                continue;
            region.clear();
            region.push_back(seed);
            used[seed] = 1;
            double sum_cos = std::cos(ang[seed]), sum_sin = std::sin(ang[seed]);
            double region_angle = ang[seed];
            for (std::size_t k = 0; k < region.size(); ++k) {
                const int px = static_cast<int>(region[k] % gw);
                const int py = static_cast<int>(region[k] / gw);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = px + dx, ny = py + dy;
                        if (nx < 0 || ny < 0 || nx >= gw || ny >= gh)
                            continue;
                        const std::size_t j = static_cast<std::size_t>(ny) * gw + nx;
                        if (used[j] || mag[j] <= config_.rho)
                            continue;
                        if (angle_diff(ang[j], region_angle) > tol)
                            continue;
                        used[j] = 1;
                        region.push_back(j);
                        sum_cos += std::cos(ang[j]);
                        sum_sin += std::sin(ang[j]);
                        region_angle = std::atan2(sum_sin, sum_cos);
                    }
                }
            }
            if (region.size() < 2)
                continue;
            if (auto seg = fit_rectangle(region, gw, mag))
                out.push_back(*seg);
        }
        return out;
    }

    const DetectorConfig& config() const { return config_; }

private:
    static double angle_diff(double a, double b)
    {
        double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
        return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
    }

    std::optional<Segment2D> fit_rectangle(const std::vector<std::size_t>& region, int gw,
                                           const std::vector<double>& mag) const
    {
        double wsum = 0.0;
        Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
        for (std::size_t i : region) {
            const Eigen::Vector2d p(static_cast<double>(i % gw) + 0.5, static_cast<double>(i / gw) + 0.5);
            centroid += mag[i] * p;
            wsum += mag[i];
        }
        centroid /= wsum;
        Eigen::Matrix2d inertia = Eigen::Matrix2d::Zero();
        for (std::size_t i : region) {
            const Eigen::Vector2d p(static_cast<double>(i % gw) + 0.5, static_cast<double>(i / gw) + 0.5);
            const Eigen::Vector2d d = p - centroid;
            inertia += mag[i] * d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(inertia);
        const Eigen::Vector2d dir = eig.eigenvectors().col(1);
        const Eigen::Vector2d nrm(-dir.y(), dir.x());
        double lo = 0.0, hi = 0.0, wlo = 0.0, whi = 0.0;
        for (std::size_t i : region) {
            const Eigen::Vector2d p(static_cast<double>(i % gw) + 0.5, static_cast<double>(i / gw) + 0.5);
            const double s = (p - centroid).dot(dir);
            const double w = (p - centroid).dot(nrm);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
            wlo = std::min(wlo, w);
            whi = std::max(whi, w);
        }
        const double length = hi - lo;
        if (length < config_.min_length)
            return std::nullopt;
        const double width = std::max(1.0, whi - wlo + 1.0);
        const double density = static_cast<double>(region.size()) / ((length + 1.0) * width);
        if (density < config_.min_density)
            return std::nullopt;
        return Segment2D::between(centroid + lo * dir, centroid + hi * dir);
    }

    DetectorConfig config_;
};

inline std::vector<Segment2D> detect_segments(const GrayImage& image, const DetectorConfig& config = {})
{
    return RegionGrowingDetector(config).detect(image);
}

/// 2:1 Gaussian pyramid level ([1 4 6 4 1]/16 separable blur, then decimation).
inline GrayImage pyramid_down(const GrayImage& image)
{
    static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    const int w = image.width, h = image.height;
    const auto clampi = [](int v, int lo, int hi) { return std::clamp(v, lo, hi); };
    std::vector<double> tmp(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = -2; t <= 2; ++t)
                s += k[t + 2] * image.at(clampi(x + t, 0, w - 1), y);
            tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
    GrayImage out(std::max(1, (w + 1) / 2), std::max(1, (h + 1) / 2));
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            double s = 0.0;
            for (int t = -2; t <= 2; ++t)
                s += k[t + 2] * tmp[static_cast<std::size_t>(clampi(2 * y + t, 0, h - 1)) * w + 2 * x];
            out.at(x, y) = static_cast<float>(s);
        }
    return out;
}

// ---------------------------------------------------------------------------
// I/O

/// Reads a binary (P5) 8-bit portable graymap.
inline GrayImage load_pgm(std::istream& in)
{
    const auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty())
                    break;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    if (token() != "P5")
        throw ParseError("pgm: only binary P5 graymaps are supported");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw ParseError("pgm: malformed header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw ParseError("pgm: unsupported dimensions or maxval");
    GrayImage img(w, h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw ParseError("pgm: truncated pixel data");
    for (std::size_t i = 0; i < buf.size(); ++i)
        img.intensity[i] = static_cast<float>(buf[i]) * 255.0f / static_cast<float>(maxval);
    return img;
}

inline GrayImage load_pgm_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open image: " + path);
    return load_pgm(in);
}

inline void save_pgm(std::ostream& out, const GrayImage& img)
{
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    for (float v : img.intensity)
        out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L))));
}

/// CSV with header `x1,y1,x2,y2`.
inline void write_segments_csv(std::ostream& out, const std::vector<Segment2D>& segments)
{
    out << "x1,y1,x2,y2\n";
    out.precision(10);
    for (const auto& s : segments)
        out << s.end_a.x() << ',' << s.end_a.y() << ',' << s.end_b.x() << ',' << s.end_b.y() << '\n';
}

inline std::vector<Segment2D> read_segments_csv(std::istream& in)
{
    std::vector<Segment2D> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.rfind("x1", 0) == 0)
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double x1, y1, x2, y2;
        if (!(ls >> x1 >> y1 >> x2 >> y2))
            throw ParseError("segments csv: expected 4 numbers", line_no);
        out.push_back(Segment2D::between({x1, y1}, {x2, y2}));
    }
    return out;
}

} // namespace lampdet

#endif // LAMPDET_IMAGE_EDGES_HPP
