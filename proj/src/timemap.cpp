#include "sialign/timemap.hpp"

#include <algorithm>
#include <cmath>

#include "sialign/error.hpp"

namespace sialign {

TimeMap TimeMap::identity() {
    return TimeMap({{0.0, 0.0}, {1.0, 1.0}});
}

TimeMap TimeMap::scale(double factor) {
    return TimeMap({{0.0, 0.0}, {1.0, factor}});
}

double TimeMap::at(double x) const {
    if (knots.empty()) raise(ErrorKind::state, "time map has no knots");
    if (knots.size() == 1) return knots.front().y;

    // segment index: last knot with knot.x <= x, clamped to a real segment
    std::size_t hi = 1;
    if (x >= knots.back().x) {
        hi = knots.size() - 1;
    } else if (x > knots.front().x) {
        const auto it = std::upper_bound(
            knots.begin(), knots.end(), x,
            [](double v, const TimeKnot& k) { return v < k.x; });
        hi = static_cast<std::size_t>(it - knots.begin());
        if (hi == 0) hi = 1;
        if (hi >= knots.size()) hi = knots.size() - 1;
    }
    const TimeKnot& a = knots[hi - 1];
    const TimeKnot& b = knots[hi];
    const double dx = b.x - a.x;
    if (dx <= 0.0) return a.y;
    const double t = (x - a.x) / dx;
    return a.y + t * (b.y - a.y);
}

bool TimeMap::non_decreasing() const {
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (knots[i].x <= knots[i - 1].x) return false;
        if (knots[i].y < knots[i - 1].y) return false;
    }
    return true;
}

bool TimeMap::strictly_increasing() const {
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (knots[i].x <= knots[i - 1].x) return false;
        if (knots[i].y <= knots[i - 1].y) return false;
    }
    return true;
}

void require_strictly_increasing(const TimeMap& map, const std::string& what) {
    if (map.knots.empty())
        raise(ErrorKind::invalid_argument, what + " has no knots");
    for (const TimeKnot& k : map.knots) {
        if (!std::isfinite(k.x) || !std::isfinite(k.y))
            raise(ErrorKind::invalid_argument, what + " has non-finite knots");
    }
    if (!map.strictly_increasing())
        raise(ErrorKind::invalid_argument, what + " is not strictly increasing");
}

} // namespace sialign
