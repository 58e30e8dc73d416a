#pragma once

#include <Eigen/Core>

namespace benign {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
/// Design matrices are stored dense and row-major (one sample per row).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Column block width used by every X-touching kernel. Changing it changes
/// the floating-point summation order and therefore bitwise results.
inline constexpr Index kColumnBlock = 512;

/// Dot product with eight interleaved partial sums combined pairwise. The
/// summation order depends only on `len`, never on the vector unit.
double dot_fixed(const double* a, const double* b, Index len) noexcept;

/// out = X x, accumulated block by block over kColumnBlock-wide column slabs.
void multiply(const Matrix& X, const Vector& x, Vector& out);
Vector multiply(const Matrix& X, const Vector& x);

/// out = X^T r * scale, rows accumulated in index order.
void multiply_transposed(const Matrix& X, const Vector& r, double scale, Vector& out);
Vector multiply_transposed(const Matrix& X, const Vector& r, double scale = 1.0);

double norm2(const Vector& x) noexcept;
double norm_inf(const Vector& x) noexcept;

}  // namespace benign
