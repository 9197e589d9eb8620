#include "sialign/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sialign/error.hpp"

namespace sialign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum Pred : unsigned char { none = 0, diagonal = 1, vertical = 2, horizontal = 3 };

template <typename Value>
WarpingPath align_impl(int rows, int cols, const Value* d,
                       std::optional<int> band) {
    if (rows < 1 || cols < 1)
        raise(ErrorKind::invalid_argument, "cost matrix is empty");
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i)
        if (!std::isfinite(static_cast<double>(d[i])))
            raise(ErrorKind::invalid_argument, "cost matrix has non-finite entries");
    if (band) {
        if (*band < 0) raise(ErrorKind::invalid_argument, "band radius must be >= 0");
        if (*band < std::abs(rows - cols))
            raise(ErrorKind::invalid_argument,
                  "band radius " + std::to_string(*band) +
                      " disconnects the matrix corners");
    }

    auto in_band = [&](int i, int j) { return !band || std::abs(i - j) <= *band; };

    std::vector<double> acc(static_cast<std::size_t>(rows) * cols, kInf);
    std::vector<unsigned char> pred(static_cast<std::size_t>(rows) * cols, none);
    auto idx = [cols](int i, int j) {
        return static_cast<std::size_t>(i) * cols + j;
    };

    for (int i = 0; i < rows; ++i) {
        const int jlo = band ? std::max(0, i - *band) : 0;
        const int jhi = band ? std::min(cols - 1, i + *band) : cols - 1;
        for (int j = jlo; j <= jhi; ++j) {
            const double local = static_cast<double>(d[idx(i, j)]);
            if (i == 0 && j == 0) {
                acc[idx(0, 0)] = local;
                continue;
            }
            const double up =
                i > 0 && in_band(i - 1, j) ? acc[idx(i - 1, j)] : kInf;
            const double left =
                j > 0 && in_band(i, j - 1) ? acc[idx(i, j - 1)] : kInf;
            const double diag =
                i > 0 && j > 0 && in_band(i - 1, j - 1) ? acc[idx(i - 1, j - 1)] : kInf;

            // tie-break order: diagonal, vertical, horizontal
            double best = diag;
            unsigned char p = diagonal;
            if (up < best) {
                best = up;
                p = vertical;
            }
            if (left < best) {
                best = left;
                p = horizontal;
            }
            acc[idx(i, j)] = local + best;
            pred[idx(i, j)] = p;
        }
    }

    WarpingPath path;
    path.total_cost = acc[idx(rows - 1, cols - 1)];

    int i = rows - 1, j = cols - 1;
    std::vector<std::pair<int, int>> reversed;
    reversed.emplace_back(i, j);
    while (i > 0 || j > 0) {
        switch (pred[idx(i, j)]) {
        case diagonal: --i; --j; break;
        case vertical: --i; break;
        case horizontal: --j; break;
        default:
            raise(ErrorKind::state, "broken backtracking chain");
        }
        reversed.emplace_back(i, j);
    }
    path.steps.assign(reversed.rbegin(), reversed.rend());
    return path;
}

} // namespace

WarpingPath align(const SimilarityMatrix& cost, std::optional<int> band) {
    return align_impl(cost.rows, cost.cols, cost.values.data(), band);
}

WarpingPath align_matrix(int rows, int cols, const float* values,
                         std::optional<int> band) {
    return align_impl(rows, cols, values, band);
}

WarpingPath align_matrix(int rows, int cols, const std::vector<double>& values,
                         std::optional<int> band) {
    if (values.size() != static_cast<std::size_t>(rows) * cols)
        raise(ErrorKind::shape, "cost matrix size mismatch");
    return align_impl(rows, cols, values.data(), band);
}

TimeMap path_to_time_map(const WarpingPath& path, double hop_row, double hop_col) {
    if (path.steps.empty())
        raise(ErrorKind::invalid_argument, "empty warping path");

    TimeMap map;
    std::size_t k = 0;
    while (k < path.steps.size()) {
        const int row = path.steps[k].first;
        double col_sum = 0.0;
        int count = 0;
        while (k < path.steps.size() && path.steps[k].first == row) {
            col_sum += path.steps[k].second;
            ++count;
            ++k;
        }
        map.knots.push_back({row * hop_row, (col_sum / count) * hop_col});
    }
    return map;
}

} // namespace sialign
