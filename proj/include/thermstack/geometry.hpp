#pragma once

#include <algorithm>
#include <cmath>

namespace thermstack {

/// Lateral displacement in micrometres.
struct Offset {
    double dx = 0.0;
    double dy = 0.0;

    friend Offset operator+(Offset a, Offset b) { return {a.dx + b.dx, a.dy + b.dy}; }
    friend bool operator==(const Offset&, const Offset&) = default;
};

/// Axis-aligned rectangle in micrometres, half-open semantics irrelevant for areas.
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool valid() const { return x1 > x0 && y1 > y0; }

    Rect translated(Offset o) const { return {x0 + o.dx, y0 + o.dy, x1 + o.dx, y1 + o.dy}; }

    /// True when `inner` lies within this rectangle, with a relative slack for rounding.
    bool contains(const Rect& inner, double slack = 1e-9) const
    {
        const double tol = slack * std::max({std::abs(x0), std::abs(x1), std::abs(y0), std::abs(y1), 1.0});
        return inner.x0 >= x0 - tol && inner.y0 >= y0 - tol && inner.x1 <= x1 + tol && inner.y1 <= y1 + tol;
    }

    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Area of the intersection of two rectangles (zero when disjoint).
inline double overlap_area(const Rect& a, const Rect& b)
{
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Visits every cell of a regular lattice that `r` overlaps, passing the share of
/// `r`'s area that falls into the cell. Shares are normalized over the visited cells,
/// so they sum to one to rounding whenever `r` lies inside the lattice. Returns the
/// fraction of `r` actually covered by the lattice.
template <class Visit>
double for_each_overlap(const Rect& r, Offset origin, double pitch_x, double pitch_y, int nx, int ny,
                        Visit&& visit)
{
    const auto clamp_index = [](double v, int n) { return std::clamp(static_cast<int>(v), 0, n - 1); };
    const int ix0 = clamp_index(std::floor((r.x0 - origin.dx) / pitch_x) - 1, nx);
    const int ix1 = clamp_index(std::ceil((r.x1 - origin.dx) / pitch_x) + 1, nx);
    const int iy0 = clamp_index(std::floor((r.y0 - origin.dy) / pitch_y) - 1, ny);
    const int iy1 = clamp_index(std::ceil((r.y1 - origin.dy) / pitch_y) + 1, ny);

    double covered = 0.0;
    for (int iy = iy0; iy <= iy1; ++iy)
        for (int ix = ix0; ix <= ix1; ++ix) {
            const Rect cell{origin.dx + ix * pitch_x, origin.dy + iy * pitch_y, origin.dx + (ix + 1) * pitch_x,
                            origin.dy + (iy + 1) * pitch_y};
            covered += overlap_area(r, cell);
        }
    if (covered <= 0.0) return 0.0;

    for (int iy = iy0; iy <= iy1; ++iy)
        for (int ix = ix0; ix <= ix1; ++ix) {
            const Rect cell{origin.dx + ix * pitch_x, origin.dy + iy * pitch_y, origin.dx + (ix + 1) * pitch_x,
                            origin.dy + (iy + 1) * pitch_y};
            const double a = overlap_area(r, cell);
            if (a > 0.0) visit(ix, iy, a / covered);
        }
    return covered / r.area();
}

} // namespace thermstack
