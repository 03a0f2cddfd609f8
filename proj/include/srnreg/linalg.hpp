#pragma once

// Dense linear algebra over doubles.
//
// Convention: vectors are ROW vectors. A delta is propagated backward by
// multiplying it on the right, delta * W^T * diag(f'), so `row_vec_mat(v, m)`
// computes v^T m and returns a vector of length m.cols(). Every weight matrix
// is stored (fan_in x fan_out) so that the forward pass is u * w_in.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srnreg {

/// Shape or length mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vec(std::initializer_list<double> values) : data_(values) {}
  explicit Vec(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Vec&) const = default;

 private:
  std::vector<double> data_;
};

/// Row-major dense matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  static Mat identity(std::size_t n);
  static Mat diag(const Vec& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_str(const Mat& m);

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

/// v^T m, length m.cols().
Vec row_vec_mat(const Vec& v, const Mat& m);
/// m v treating v as a column, length m.rows().
Vec mat_vec(const Mat& m, const Vec& v);

/// m * diag(d): result(i, j) = m(i, j) * d[j].
Mat scale_cols_by(const Mat& m, const Vec& d);

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);
/// Frobenius norm.
double norm2(const Mat& m);

/// a^T b, shape (a.size(), b.size()).
Mat outer(const Vec& a, const Vec& b);

Vec hadamard(const Vec& a, const Vec& b);

Vec operator+(const Vec& a, const Vec& b);
Vec operator-(const Vec& a, const Vec& b);
Vec operator*(double s, const Vec& v);
Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& m);

/// y += alpha * x
void axpy(double alpha, const Vec& x, Vec& y);
void axpy(double alpha, const Mat& x, Mat& y);
/// y += alpha * outer(a, b) without materializing the outer product.
void add_outer(double alpha, const Vec& a, const Vec& b, Mat& y);

Vec map(const Vec& v, const std::function<double(double)>& f);
Mat map(const Mat& m, const std::function<double(double)>& f);

bool all_finite(std::span<const double> xs);

}  // namespace srnreg
