#pragma once

#include <string>
#include <vector>

namespace sialign {

struct TimeKnot {
    double x = 0.0;
    double y = 0.0;
};

// Piecewise-linear map between two time axes. Knots are sorted by x;
// evaluation interpolates between knots and extrapolates linearly with the
// edge segment slopes (constant for a single knot).
struct TimeMap {
    std::vector<TimeKnot> knots;

    TimeMap() = default;
    explicit TimeMap(std::vector<TimeKnot> k) : knots(std::move(k)) {}

    static TimeMap identity();
    static TimeMap scale(double factor);

    double at(double x) const;
    double operator()(double x) const { return at(x); }

    bool empty() const { return knots.empty(); }
    double front_x() const { return knots.front().x; }
    double back_x() const { return knots.back().x; }

    bool non_decreasing() const;
    bool strictly_increasing() const;
};

// Known score-time to performance-time correspondence; strictly increasing
// in both coordinates.
using GroundTruthMap = TimeMap;

// Throws ErrorKind::invalid_argument when the map is not strictly
// increasing in both coordinates; `what` names the offender in the message.
void require_strictly_increasing(const TimeMap& map, const std::string& what);

} // namespace sialign
