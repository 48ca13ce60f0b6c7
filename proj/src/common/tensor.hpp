#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace srdet {

// Dense CHW tensor of doubles. Vectors are stored as (n,1,1).
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.c, t.h, t.w); }

  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

  double& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
  double at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  void fill(double s) { std::fill(v.begin(), v.end(), s); }

  Tensor& operator+=(const Tensor& o) {
    for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& x : v) x *= s;
    return *this;
  }
};

}  // namespace srdet
