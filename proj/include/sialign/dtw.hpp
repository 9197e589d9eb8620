#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sialign/similarity.hpp"
#include "sialign/timemap.hpp"

namespace sialign {

// Monotone alignment path through a cost matrix. Steps are 0-based (row,
// col) pairs from (0, 0) to (rows-1, cols-1); each step advances row and/or
// col by one. total_cost is the sum of the local costs along the path.
struct WarpingPath {
    std::vector<std::pair<int, int>> steps;
    double total_cost = 0.0;
};

// Minimum-cost monotone path via the recurrence
// D(i,j) = d(i,j) + min{D(i,j-1), D(i-1,j), D(i-1,j-1)}, D(0,0) = d(0,0).
// Ties during backtracking prefer diagonal, then vertical (i-1,j), then
// horizontal (i,j-1). `band` is an optional Sakoe-Chiba radius (cells with
// |i - j| > band are unreachable); it must satisfy band >= |rows - cols| or
// the corners disconnect.
WarpingPath align(const SimilarityMatrix& cost,
                  std::optional<int> band = std::nullopt);

// Same recurrence over a raw row-major matrix.
WarpingPath align_matrix(int rows, int cols, const float* values,
                         std::optional<int> band = std::nullopt);
WarpingPath align_matrix(int rows, int cols, const std::vector<double>& values,
                         std::optional<int> band = std::nullopt);

// Converts a path to a row-time -> col-time map: frame i sits at i * hop;
// repeated row indices (horizontal runs) collapse to one knot at the mean
// column time.
TimeMap path_to_time_map(const WarpingPath& path, double hop_row, double hop_col);

} // namespace sialign
