#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace cpalign {

/// Axis-aligned box in continuous image coordinates, corners (x_min,y_min)
/// inclusive to (x_max,y_max) exclusive.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }

    /// Finite, non-negative, strictly positive extent.
    bool valid() const {
        return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
               std::isfinite(y_max) && x_min >= 0.0 && y_min >= 0.0 && x_min < x_max &&
               y_min < y_max;
    }

    bool operator==(const BBox&) const = default;
};

inline double intersection_area(const BBox& a, const BBox& b) {
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

/// Intersection over union, in [0, 1].
inline double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

/// Integer pixel rectangle, half-open: x in [x0, x1), y in [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }

    bool operator==(const PixelRect&) const = default;
};

/// Pixels touched by a continuous box: pixel (i,j) is covered when its unit
/// square intersects the box interior. Clamped to the image grid.
inline PixelRect pixel_footprint(const BBox& b, int img_w, int img_h) {
    PixelRect r;
    r.x0 = std::max(0, static_cast<int>(std::floor(b.x_min)));
    r.y0 = std::max(0, static_cast<int>(std::floor(b.y_min)));
    r.x1 = std::min(img_w, static_cast<int>(std::ceil(b.x_max)));
    r.y1 = std::min(img_h, static_cast<int>(std::ceil(b.y_max)));
    return r;
}

}  // namespace cpalign
