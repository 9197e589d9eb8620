#pragma once

#include <string>
#include <vector>

namespace sialign {

// 8-bit grayscale PNG, one byte per pixel, row-major. Used for feature and
// similarity heat-map dumps.
void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<unsigned char>& pixels);

// Min-max normalizes a row-major float matrix into pixel bytes (rows become
// image rows, top row first).
std::vector<unsigned char> matrix_to_pixels(const float* values, int rows,
                                            int cols);

} // namespace sialign
