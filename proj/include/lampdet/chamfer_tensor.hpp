#ifndef LAMPDET_CHAMFER_TENSOR_HPP
#define LAMPDET_CHAMFER_TENSOR_HPP

#include "lampdet/error.hpp"
#include "lampdet/segment.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

namespace lampdet
{

constexpr int kDefaultOrientations = 60;
constexpr double kDefaultLambdaTheta = 100.0;
constexpr int kDefaultLinesPerPixel = 4;

/// Nearest orientation bin, period pi.
inline int quantize_orientation(double theta, int n_orient)
{
    const double z = theta * n_orient / std::numbers::pi;
    long bin = std::lround(z) % n_orient;
    if (bin < 0)
        bin += n_orient;
    return static_cast<int>(bin);
}

inline double bin_angle(int bin, int n_orient) { return bin * std::numbers::pi / n_orient; }

/// Directional distance-transform tensor: one distance image per orientation bin.
struct Dt3Tensor
{
    int width = 0;
    int height = 0;
    int n_orient = 0;
    double lambda_theta = kDefaultLambdaTheta;
    std::vector<float> values; // [bin][y][x]

    std::size_t slice_size() const { return static_cast<std::size_t>(width) * height; }
    const float* slice(int bin) const { return values.data() + bin * slice_size(); }
    float* slice(int bin) { return values.data() + bin * slice_size(); }
    float at(int bin, int x, int y) const { return slice(bin)[static_cast<std::size_t>(y) * width + x]; }

    /// Bilinear read with edge clamping; sets `clamped` when the point is outside the raster.
    double bilinear(int bin, double x, double y, bool& clamped) const
    {
        if (x < 0.0 || y < 0.0 || x > width - 1 || y > height - 1)
            clamped = true;
        x = std::clamp(x, 0.0, static_cast<double>(width - 1));
        y = std::clamp(y, 0.0, static_cast<double>(height - 1));
        const int x0 = std::min(static_cast<int>(x), width - 1);
        const int y0 = std::min(static_cast<int>(y), height - 1);
        const int x1 = std::min(x0 + 1, width - 1);
        const int y1 = std::min(y0 + 1, height - 1);
        const double fx = x - x0, fy = y - y0;
        const float* s = slice(bin);
        const auto v = [&](int xx, int yy) { return static_cast<double>(s[static_cast<std::size_t>(yy) * width + xx]); };
        return (1.0 - fy) * ((1.0 - fx) * v(x0, y0) + fx * v(x1, y0)) + fy * ((1.0 - fx) * v(x0, y1) + fx * v(x1, y1));
    }

    /// Distance at an image point for a continuous orientation (linear between bins).
    double sample(const Eigen::Vector2d& p, double theta, bool& clamped) const
    {
        const double z = fold_orientation(theta) * n_orient / std::numbers::pi;
        int za = static_cast<int>(std::floor(z));
        const double dz = z - za;
        za %= n_orient;
        const double va = bilinear(za, p.x(), p.y(), clamped);
        if (dz == 0.0)
            return va;
        const double vb = bilinear((za + 1) % n_orient, p.x(), p.y(), clamped);
        return va + (vb - va) * dz;
    }
};

namespace detail
{
constexpr double kEdtInf = 1e20;

// Felzenszwalb & Huttenlocher lower envelope of parabolas, squared distances.
inline void edt_1d(const double* f, int n, double* d, int* v, double* z)
{
    int k = 0;
    v[0] = 0;
    z[0] = -kEdtInf;
    z[1] = kEdtInf;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        if (s <= z[k]) {
            // k == 0 and the new parabola dominates everywhere
            v[0] = q;
            z[0] = -kEdtInf;
            z[1] = kEdtInf;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kEdtInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q)
            ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

/// Exact Euclidean distance transform of a binary mask (non-zero = feature).
inline std::vector<double> euclidean_dt(const std::vector<std::uint8_t>& mask, int w, int h)
{
    const int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    std::vector<double> sq(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < sq.size(); ++i)
        sq[i] = mask[i] ? 0.0 : kEdtInf;
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y)
            f[y] = sq[static_cast<std::size_t>(y) * w + x];
        edt_1d(f.data(), h, d.data(), v.data(), z.data());
        for (int y = 0; y < h; ++y)
            sq[static_cast<std::size_t>(y) * w + x] = d[y];
    }
    for (int y = 0; y < h; ++y) {
        double* row = sq.data() + static_cast<std::size_t>(y) * w;
        std::copy(row, row + w, f.begin());
        edt_1d(f.data(), w, d.data(), v.data(), z.data());
        for (int x = 0; x < w; ++x)
            row[x] = std::sqrt(d[x]);
    }
    return sq;
}

/// One-pixel-wide raster of a segment, endpoints rounded to the nearest pixel.
inline void rasterize_segment(std::vector<std::uint8_t>& mask, int w, int h, const Segment2D& s, bool& any)
{
    const long x0 = std::lround(s.end_a.x()), y0 = std::lround(s.end_a.y());
    const long x1 = std::lround(s.end_b.x()), y1 = std::lround(s.end_b.y());
    const long steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
    for (long i = 0; i <= steps; ++i) {
        const double t = steps == 0 ? 0.0 : static_cast<double>(i) / steps;
        const long x = std::lround(x0 + t * (x1 - x0));
        const long y = std::lround(y0 + t * (y1 - y0));
        if (x < 0 || y < 0 || x >= w || y >= h)
            continue;
        mask[static_cast<std::size_t>(y) * w + x] = 1;
        any = true;
    }
}
} // namespace detail

/// Per-bin Euclidean distance transforms of the segment rasters followed by the
/// circular orientation recursion v(x,k) = min(v(x,k), v(x,k+-1) + lambda * pi / n).
/// Returned values are the unsmoothed tensor.
inline Dt3Tensor build_dt3(const std::vector<Segment2D>& segments, int width, int height,
                           int n_orient = kDefaultOrientations, double lambda_theta = kDefaultLambdaTheta)
{
    if (width <= 0 || height <= 0)
        throw InvalidArgument("build_dt3: dimensions must be positive");
    if (n_orient < 2)
        throw InvalidArgument("build_dt3: need at least two orientation bins");
    if (segments.empty())
        throw InvalidArgument("build_dt3: no segments, tensor undefined");

    const std::size_t npix = static_cast<std::size_t>(width) * height;
    std::vector<std::vector<std::uint8_t>> masks(n_orient);
    bool any = false;
    for (const auto& s : segments) {
        const int bin = quantize_orientation(s.orientation, n_orient);
        if (masks[bin].empty())
            masks[bin].assign(npix, 0);
        detail::rasterize_segment(masks[bin], width, height, s, any);
    }
    if (!any)
        throw InvalidArgument("build_dt3: no segment pixel inside the image, tensor undefined");

    Dt3Tensor t;
    t.width = width;
    t.height = height;
    t.n_orient = n_orient;
    t.lambda_theta = lambda_theta;

    std::vector<double> work(npix * n_orient, std::numeric_limits<double>::infinity());
    for (int b = 0; b < n_orient; ++b) {
        if (masks[b].empty())
            continue;
        if (std::none_of(masks[b].begin(), masks[b].end(), [](std::uint8_t m) { return m != 0; }))
            continue;
        const auto dt = detail::euclidean_dt(masks[b], width, height);
        std::copy(dt.begin(), dt.end(), work.begin() + b * npix);
    }

    // Two forward and two backward circular passes reach the fixpoint.
    const double penalty = lambda_theta * std::numbers::pi / n_orient;
    for (int round = 0; round < 2; ++round)
        for (int k = 0; k < n_orient; ++k) {
            double* cur = work.data() + k * npix;
            const double* prev = work.data() + ((k + n_orient - 1) % n_orient) * npix;
            for (std::size_t i = 0; i < npix; ++i)
                cur[i] = std::min(cur[i], prev[i] + penalty);
        }
    for (int round = 0; round < 2; ++round)
        for (int k = n_orient - 1; k >= 0; --k) {
            double* cur = work.data() + k * npix;
            const double* next = work.data() + ((k + 1) % n_orient) * npix;
            for (std::size_t i = 0; i < npix; ++i)
                cur[i] = std::min(cur[i], next[i] + penalty);
        }

    t.values.resize(work.size());
    std::transform(work.begin(), work.end(), t.values.begin(), [](double v) { return static_cast<float>(v); });
    return t;
}

/// Circular Gaussian smoothing across orientation bins (kernel truncated at 3 sigma).
inline Dt3Tensor smooth_dt3(const Dt3Tensor& dt3, double sigma_bins = 1.0)
{
    if (!(sigma_bins > 0.0))
        throw InvalidArgument("smooth_dt3: sigma must be positive");
    const int half = static_cast<int>(std::ceil(3.0 * sigma_bins));
    std::vector<double> kernel(2 * half + 1);
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        kernel[i + half] = std::exp(-0.5 * i * i / (sigma_bins * sigma_bins));
        sum += kernel[i + half];
    }
    for (double& k : kernel)
        k /= sum;

    Dt3Tensor out = dt3;
    const std::size_t npix = dt3.slice_size();
    const int n = dt3.n_orient;
    std::vector<double> acc(npix);
    for (int b = 0; b < n; ++b) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = -half; i <= half; ++i) {
            const int src = ((b + i) % n + n) % n;
            const float* s = dt3.slice(src);
            const double w = kernel[i + half];
            for (std::size_t p = 0; p < npix; ++p)
                acc[p] += w * s[p];
        }
        float* dst = out.slice(b);
        for (std::size_t p = 0; p < npix; ++p)
            dst[p] = static_cast<float>(acc[p]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Integral tensor

/// Orientation-dependent constants used to walk integration lines.
///   x_positive: direction has non-negative x component (otherwise x is mirrored)
///   x_dominant: |dx| >= dy, integration lines are indexed by x
///   d_p: direction component along the dominant axis
///   d_s: cross-axis slope per dominant-axis step, in [0, 1]
///   l_p: dominant-axis shift of the perpendicular foot per unit of line offset
struct OrientationPrecomp
{
    bool x_positive = true;
    bool x_dominant = true;
    double d_p = 1.0;
    double d_s = 0.0;
    double l_p = 0.0;
};

inline OrientationPrecomp precompute_orientation(int bin, int n_orient)
{
    if (bin < 0 || bin >= n_orient)
        throw InvalidArgument("precompute_orientation: bin out of range");
    const double o = bin_angle(bin, n_orient);
    const double dx = std::cos(o);
    const double dy = std::sin(o); // >= 0 on [0, pi)
    const double da = std::abs(dx);
    OrientationPrecomp p;
    p.x_positive = dx >= 0.0;
    p.x_dominant = da >= dy;
    p.d_p = p.x_dominant ? da : dy;
    p.d_s = p.x_dominant ? dy / da : da / dy;
    p.l_p = da * dy;
    return p;
}

/// Cumulative integrals of one orientation slice along its integration lines.
///
/// Coordinates: `along` is the dominant axis (x, mirrored when !x_positive, or y),
/// `cross` the other one. Line j holds the points cross = j / lines_per_pixel +
/// along * d_s, and value(j, p) is the integral over along in [0, p] of the
/// bilinearly interpolated slice. With one line per pixel this is the raster
/// layout I[l + floor(p * d_s), p]; denser lines shrink the error of blending two
/// neighbouring lines. Lines are kept whole, so portions that leave the raster
/// integrate edge-clamped values.
struct IdtSlice
{
    OrientationPrecomp pre;
    int n_along = 0;
    int n_cross = 0;
    int lines_per_pixel = 1;
    int line_min = 0;
    int line_max = 0;
    std::vector<double> data;

    double at(int line, int p) const
    {
        return data[static_cast<std::size_t>(line - line_min) * n_along + p];
    }
};

struct Idt3Tensor
{
    int width = 0;
    int height = 0;
    int n_orient = 0;
    std::vector<IdtSlice> slices;
};

namespace detail
{
inline double slice_value_along_cross(const Dt3Tensor& dt3, const OrientationPrecomp& pre, const float* s, int along,
                                      int cross)
{
    int x = pre.x_dominant ? along : cross;
    const int y = pre.x_dominant ? cross : along;
    if (!pre.x_positive)
        x = dt3.width - 1 - x;
    return s[static_cast<std::size_t>(y) * dt3.width + x];
}


} // namespace detail

inline Idt3Tensor build_idt3(const Dt3Tensor& dt3, int lines_per_pixel = kDefaultLinesPerPixel)
{
    if (lines_per_pixel < 1)
        throw InvalidArgument("build_idt3: lines_per_pixel must be >= 1");
    Idt3Tensor out;
    out.width = dt3.width;
    out.height = dt3.height;
    out.n_orient = dt3.n_orient;
    out.slices.resize(dt3.n_orient);
    for (int b = 0; b < dt3.n_orient; ++b) {
        IdtSlice& sl = out.slices[b];
        sl.pre = precompute_orientation(b, dt3.n_orient);
        sl.n_along = sl.pre.x_dominant ? dt3.width : dt3.height;
        sl.n_cross = sl.pre.x_dominant ? dt3.height : dt3.width;
        const int ext = static_cast<int>(std::floor((sl.n_along - 1) * sl.pre.d_s)) + 1;
        sl.lines_per_pixel = lines_per_pixel;
        sl.line_min = -ext * lines_per_pixel;
        sl.line_max = sl.n_cross * lines_per_pixel;
        const int n_lines = sl.line_max - sl.line_min + 1;
        sl.data.assign(static_cast<std::size_t>(n_lines) * sl.n_along, 0.0);
        const int last_cross = sl.n_cross - 1;
        const int last_along = sl.n_along - 1;
        // Slice transposed into (along, cross) order.
        std::vector<double> grid(static_cast<std::size_t>(sl.n_along) * sl.n_cross);
        const float* src = dt3.slice(b);
        for (int a = 0; a < sl.n_along; ++a)
            for (int c = 0; c < sl.n_cross; ++c)
                grid[static_cast<std::size_t>(a) * sl.n_cross + c] = detail::slice_value_along_cross(dt3, sl.pre, src, a, c);
        const auto f = [&](double along, double cross) {
            cross = std::clamp(cross, 0.0, static_cast<double>(last_cross));
            const int a0 = std::min(static_cast<int>(along), last_along);
            const int r0 = std::min(static_cast<int>(cross), last_cross);
            const int a1 = std::min(a0 + 1, last_along);
            const int r1 = std::min(r0 + 1, last_cross);
            const double ta = along - a0, tc = cross - r0;
            const double* g0 = grid.data() + static_cast<std::size_t>(a0) * sl.n_cross;
            const double* g1 = grid.data() + static_cast<std::size_t>(a1) * sl.n_cross;
            return (1.0 - ta) * (g0[r0] + tc * (g0[r1] - g0[r0])) + ta * (g1[r0] + tc * (g1[r1] - g1[r0]));
        };
        const double d_s = sl.pre.d_s;
        for (int l = sl.line_min; l <= sl.line_max; ++l) {
            double* row = sl.data.data() + static_cast<std::size_t>(l - sl.line_min) * sl.n_along;
            const double offset = static_cast<double>(l) / lines_per_pixel;
            // The bilinear surface restricted to the line is quadratic between a node and
            // a row crossing, so Simpson's rule on each piece integrates it exactly.
            double acc = 0.0;
            double f_prev = f(0.0, offset);
            row[0] = 0.0;
            for (int p = 1; p < sl.n_along; ++p) {
                const double c_lo = offset + (p - 1) * d_s;
                const double c_hi = offset + p * d_s;
                const double f_cur = f(p, c_hi);
                const double crossing = std::ceil(c_lo);
                if (crossing > c_lo && crossing < c_hi) {
                    const double m = (p - 1) + (crossing - c_lo) / d_s;
                    const double f_m = f(m, crossing);
                    const double m0 = 0.5 * (p - 1 + m), m1 = 0.5 * (m + p);
                    acc += (m - (p - 1)) / 6.0 * (f_prev + 4.0 * f(m0, offset + m0 * d_s) + f_m);
                    acc += (p - m) / 6.0 * (f_m + 4.0 * f(m1, offset + m1 * d_s) + f_cur);
                } else {
                    const double m = p - 0.5;
                    acc += (f_prev + 4.0 * f(m, offset + m * d_s) + f_cur) / 6.0;
                }
                row[p] = acc;
                f_prev = f_cur;
            }
        }
    }
    return out;
}

/// Value with a flag telling whether any read fell outside the stored range or raster.
struct TensorRead
{
    double value = 0.0;
    bool clamped = false;
};

/// Linear interpolation of an integration line at a fractional pixel.
inline TensorRead get_pixel_value(const IdtSlice& slice, int line, double pixel)
{
    TensorRead r;
    if (line < slice.line_min || line > slice.line_max) {
        line = std::clamp(line, slice.line_min, slice.line_max);
        r.clamped = true;
    }
    const int last = slice.n_along - 1;
    // Rows outside the raster hold edge-clamped integrands.
    const double row = static_cast<double>(line) / slice.lines_per_pixel + pixel * slice.pre.d_s;
    if (row < 0.0 || row > slice.n_cross - 1)
        r.clamped = true;
    if (last == 0) {
        r.clamped = r.clamped || pixel != 0.0;
        r.value = slice.at(line, 0);
        return r;
    }
    // Beyond the ends the integral continues with the slope of the border step.
    if (pixel < 0.0) {
        r.clamped = true;
        r.value = pixel * (slice.at(line, 1) - slice.at(line, 0));
        return r;
    }
    if (pixel > last) {
        r.clamped = true;
        r.value = slice.at(line, last) + (pixel - last) * (slice.at(line, last) - slice.at(line, last - 1));
        return r;
    }
    const int pa = static_cast<int>(std::floor(pixel));
    const double dp = pixel - pa;
    const double va = slice.at(line, pa);
    if (dp == 0.0) {
        r.value = va;
        return r;
    }
    const double vb = slice.at(line, pa + 1);
    r.value = va + (vb - va) * dp;
    return r;
}

/// Integral of one slice over a span of half-length `radius` (pixels) centred at
/// `center` along the slice orientation. The centre is dropped perpendicularly onto
/// the two integration lines bracketing it; the span integrals on those lines are
/// blended by the fractional line offset. The result is divided by d_p so that it
/// is an integral over arc length rather than over dominant-axis steps.
inline TensorRead get_image_value(const IdtSlice& slice, const Eigen::Vector2d& center, double radius, int image_width)
{
    const OrientationPrecomp& P = slice.pre;
    const double x = P.x_positive ? center.x() : (image_width - 1) - center.x();
    const double p = P.x_dominant ? x : center.y();
    const double l = (P.x_dominant ? center.y() - p * P.d_s : x - p * P.d_s) * slice.lines_per_pixel;
    const double la_f = std::floor(l);
    const int la = static_cast<int>(la_f);
    const int lb = la + 1;
    const double dl = l - la_f;
    // Adjacent lines sit 1/K apart, so the foot shift between them is l_p / K.
    const double lp = P.l_p / slice.lines_per_pixel;
    const double pa = p + dl * lp;
    const double pb = pa - lp;
    const double rp = radius * P.d_p;

    TensorRead out;
    const TensorRead va1 = get_pixel_value(slice, la, pa - rp);
    const TensorRead va2 = get_pixel_value(slice, la, pa + rp);
    const double span_a = va2.value - va1.value;
    out.clamped = va1.clamped || va2.clamped;
    double span = span_a;
    if (dl != 0.0) {
        const TensorRead vb1 = get_pixel_value(slice, lb, pb - rp);
        const TensorRead vb2 = get_pixel_value(slice, lb, pb + rp);
        const double span_b = vb2.value - vb1.value;
        span = span_a + (span_b - span_a) * dl;
        out.clamped = out.clamped || vb1.clamped || vb2.clamped;
    }
    out.value = span / P.d_p;
    return out;
}

struct EdgeDistance
{
    double distance = 0.0; // mean chamfer distance along the edge, pixels
    bool truncated = false;
};

namespace detail
{
inline bool outside_raster(const Eigen::Vector2d& p, int w, int h)
{
    return p.x() < 0.0 || p.y() < 0.0 || p.x() > w - 1 || p.y() > h - 1;
}
} // namespace detail

/// Mean directional chamfer distance of an image edge through the integral tensor.
/// Cost is independent of the edge length: four line reads per bracketing bin.
inline EdgeDistance edge_distance_idt3(const Idt3Tensor& idt3, const Eigen::Vector2d& end_a,
                                       const Eigen::Vector2d& end_b)
{
    const Eigen::Vector2d delta = end_b - end_a;
    const double d = delta.norm();
    if (!(d > 1e-6))
        throw InvalidArgument("edge_distance_idt3: zero-length edge");
    const Eigen::Vector2d c = 0.5 * (end_a + end_b);
    const double z = fold_orientation(std::atan2(delta.y(), delta.x())) * idt3.n_orient / std::numbers::pi;
    const double r = 0.5 * d;
    int za = static_cast<int>(std::floor(z));
    const double dz = z - za;
    za %= idt3.n_orient;
    const int zb = (za + 1) % idt3.n_orient;

    EdgeDistance out;
    const TensorRead va = get_image_value(idt3.slices[za], c, r, idt3.width);
    double v = va.value;
    out.truncated = va.clamped;
    if (dz != 0.0) {
        const TensorRead vb = get_image_value(idt3.slices[zb], c, r, idt3.width);
        v = va.value + (vb.value - va.value) * dz;
        out.truncated = out.truncated || vb.clamped;
    }
    out.distance = v / d;
    out.truncated = out.truncated || detail::outside_raster(end_a, idt3.width, idt3.height) ||
                    detail::outside_raster(end_b, idt3.width, idt3.height);
    return out;
}

/// Mean directional chamfer distance read directly from the tensor: one sample per
/// pixel of length (midpoint rule), bilinear in space, linear in orientation.
inline EdgeDistance edge_distance_direct(const Dt3Tensor& dt3, const Eigen::Vector2d& end_a,
                                         const Eigen::Vector2d& end_b)
{
    const Eigen::Vector2d delta = end_b - end_a;
    const double d = delta.norm();
    if (!(d > 1e-6))
        throw InvalidArgument("edge_distance_direct: zero-length edge");
    const int n = std::max(1, static_cast<int>(std::ceil(d)));
    const double theta = std::atan2(delta.y(), delta.x());
    EdgeDistance out;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const Eigen::Vector2d p = end_a + ((k + 0.5) / n) * delta;
        sum += dt3.sample(p, theta, out.truncated);
    }
    out.distance = sum / n;
    return out;
}

/// Upper bound on the integrated quantization error of an edge of length D snapped
/// to the nearest of n_orient orientations about its midpoint.
inline double error_bound(double length_px, int n_orient)
{
    if (length_px < 0.0 || n_orient < 1)
        throw InvalidArgument("error_bound: length must be >= 0 and n_orient >= 1");
    const double delta_theta = std::numbers::pi / n_orient;
    return 0.25 * length_px * length_px * std::sin(0.25 * delta_theta);
}

/// Same bound when the edge is split into n_segments equal pieces.
inline double error_bound_n(double length_px, int n_orient, int n_segments)
{
    if (n_segments < 1)
        throw InvalidArgument("error_bound_n: n_segments must be >= 1");
    return error_bound(length_px, n_orient) / n_segments;
}

// ---------------------------------------------------------------------------
// Binary dump: four little-endian uint32 (magic, width, height, n_orient)
// followed by slice-major little-endian float32 values.

constexpr std::uint32_t kDt3Magic = 0x54335444; // "DT3T" on disk

namespace detail
{
inline void put_u32(std::ostream& out, std::uint32_t v)
{
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in)
{
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ParseError("dt3: truncated stream");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
} // namespace detail

inline void write_dt3(std::ostream& out, const Dt3Tensor& t)
{
    detail::put_u32(out, kDt3Magic);
    detail::put_u32(out, static_cast<std::uint32_t>(t.width));
    detail::put_u32(out, static_cast<std::uint32_t>(t.height));
    detail::put_u32(out, static_cast<std::uint32_t>(t.n_orient));
    for (float v : t.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        detail::put_u32(out, bits);
    }
}

inline Dt3Tensor read_dt3(std::istream& in)
{
    if (detail::get_u32(in) != kDt3Magic)
        throw ParseError("dt3: bad magic");
    Dt3Tensor t;
    t.width = static_cast<int>(detail::get_u32(in));
    t.height = static_cast<int>(detail::get_u32(in));
    t.n_orient = static_cast<int>(detail::get_u32(in));
    if (t.width <= 0 || t.height <= 0 || t.n_orient < 2 || t.width > (1 << 16) || t.height > (1 << 16) ||
        t.n_orient > 4096)
        throw ParseError("dt3: implausible header");
    t.values.resize(static_cast<std::size_t>(t.n_orient) * t.slice_size());
    for (float& v : t.values) {
        const std::uint32_t bits = detail::get_u32(in);
        std::memcpy(&v, &bits, 4);
    }
    return t;
}

} // namespace lampdet

#endif // LAMPDET_CHAMFER_TENSOR_HPP
