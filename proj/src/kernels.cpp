#include <algorithm>
#include <cmath>

#include "benign/linalg.hpp"

namespace benign {

double dot_fixed(const double* a, const double* b, Index len) noexcept {
  double acc[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  Index j = 0;
  for (; j + 8 <= len; j += 8) {
    for (int q = 0; q < 8; ++q) acc[q] += a[j + q] * b[j + q];
  }
  double total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; j < len; ++j) total += a[j] * b[j];
  return total;
}

void multiply(const Matrix& X, const Vector& x, Vector& out) {
  const Index n = X.rows();
  const Index d = X.cols();
  out.setZero(n);
  const double* base = X.data();
  for (Index j0 = 0; j0 < d; j0 += kColumnBlock) {
    const Index width = std::min(kColumnBlock, d - j0);
    for (Index i = 0; i < n; ++i) out[i] += dot_fixed(base + i * d + j0, x.data() + j0, width);
  }
}

Vector multiply(const Matrix& X, const Vector& x) {
  Vector out;
  multiply(X, x, out);
  return out;
}

void multiply_transposed(const Matrix& X, const Vector& r, double scale, Vector& out) {
  const Index n = X.rows();
  const Index d = X.cols();
  out.setZero(d);
  double* o = out.data();
  const double* base = X.data();
  for (Index j0 = 0; j0 < d; j0 += kColumnBlock) {
    const Index width = std::min(kColumnBlock, d - j0);
    for (Index i = 0; i < n; ++i) {
      const double ri = r[i];
      const double* row = base + i * d + j0;
      for (Index j = 0; j < width; ++j) o[j0 + j] += ri * row[j];
    }
    for (Index j = 0; j < width; ++j) o[j0 + j] *= scale;
  }
}

Vector multiply_transposed(const Matrix& X, const Vector& r, double scale) {
  Vector out;
  multiply_transposed(X, r, scale, out);
  return out;
}

double norm2(const Vector& x) noexcept {
  return std::sqrt(dot_fixed(x.data(), x.data(), x.size()));
}

double norm_inf(const Vector& x) noexcept {
  double m = 0.0;
  for (Index k = 0; k < x.size(); ++k) m = std::max(m, std::abs(x[k]));
  return m;
}

}  // namespace benign
