#pragma once

#include <cstdint>
#include <vector>

namespace vdio {

// Dense row-major image. Depth images store meters as float, 0 = invalid.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

  bool empty() const { return width == 0 || height == 0; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  T& at(int x, int y) { return data[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return data[size_t(y) * width + x]; }

  template <typename U>
  bool same_size(const Image<U>& o) const {
    return width == o.width && height == o.height;
  }
};

using GrayImage = Image<uint8_t>;
using DepthImage = Image<float>;
using FloatImage = Image<float>;

// Summed-area table over a gray image; mean of any axis-aligned patch in O(1).
struct IntegralImage {
  int width = 0;
  int height = 0;
  std::vector<double> sum;  // (w+1) x (h+1), sum[0,*] = sum[*,0] = 0

  explicit IntegralImage(const GrayImage& img);

  // sum over pixels [x0,x1] x [y0,y1], inclusive, all in bounds
  double box_sum(int x0, int y0, int x1, int y1) const {
    const int w = width + 1;
    return sum[size_t(y1 + 1) * w + (x1 + 1)] - sum[size_t(y0) * w + (x1 + 1)] -
           sum[size_t(y1 + 1) * w + x0] + sum[size_t(y0) * w + x0];
  }

  double patch_mean(int cx, int cy, int radius) const {
    const int n = 2 * radius + 1;
    return box_sum(cx - radius, cy - radius, cx + radius, cy + radius) / double(n * n);
  }
};

}  // namespace vdio
