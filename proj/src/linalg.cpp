#include "srnreg/linalg.hpp"

#include <cmath>
#include <sstream>

namespace srnreg {

namespace {

[[noreturn]] void mismatch(const char* op, const std::string& lhs, const std::string& rhs) {
  std::ostringstream os;
  os << op << ": dimension mismatch " << lhs << " vs " << rhs;
  throw DimensionError(os.str());
}

std::string len_str(const Vec& v) { return "[" + std::to_string(v.size()) + "]"; }

void require_same(const char* op, const Vec& a, const Vec& b) {
  if (a.size() != b.size()) mismatch(op, len_str(a), len_str(b));
}

void require_same(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, shape_str(a), shape_str(b));
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Mat: data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Mat: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::diag(const Vec& d) {
  Mat m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

std::string shape_str(const Mat& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) mismatch("matmul", shape_str(a), shape_str(b));
  Mat out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Vec row_vec_mat(const Vec& v, const Mat& m) {
  if (v.size() != m.rows()) mismatch("row_vec_mat", len_str(v), shape_str(m));
  Vec out(m.cols());
  double* __restrict o = out.span().data();
  const std::size_t cols = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* __restrict mrow = m.row(i).data();
    for (std::size_t j = 0; j < cols; ++j) o[j] += vi * mrow[j];
  }
  return out;
}

Vec mat_vec(const Mat& m, const Vec& v) {
  if (v.size() != m.cols()) mismatch("mat_vec", shape_str(m), len_str(v));
  Vec out(m.rows());
  const std::size_t cols = m.cols();
  const double* __restrict x = v.span().data();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* __restrict mrow = m.row(i).data();
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += mrow[j] * x[j];
    out[i] = acc;
  }
  return out;
}

Mat scale_cols_by(const Mat& m, const Vec& d) {
  if (m.cols() != d.size()) mismatch("scale_cols_by", shape_str(m), len_str(d));
  Mat out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] *= d[j];
  }
  return out;
}

double dot(const Vec& a, const Vec& b) {
  require_same("dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

double norm2(const Mat& m) {
  double acc = 0.0;
  for (double x : m.span()) acc += x * x;
  return std::sqrt(acc);
}

Mat outer(const Vec& a, const Vec& b) {
  Mat out(a.size(), b.size());
  add_outer(1.0, a, b, out);
  return out;
}

Vec hadamard(const Vec& a, const Vec& b) {
  require_same("hadamard", a, b);
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vec operator+(const Vec& a, const Vec& b) {
  Vec out = a;
  axpy(1.0, b, out);
  return out;
}

Vec operator-(const Vec& a, const Vec& b) {
  Vec out = a;
  axpy(-1.0, b, out);
  return out;
}

Vec operator*(double s, const Vec& v) {
  Vec out = v;
  for (double& x : out) x *= s;
  return out;
}

Mat operator+(const Mat& a, const Mat& b) {
  Mat out = a;
  axpy(1.0, b, out);
  return out;
}

Mat operator-(const Mat& a, const Mat& b) {
  Mat out = a;
  axpy(-1.0, b, out);
  return out;
}

Mat operator*(double s, const Mat& m) {
  Mat out = m;
  for (double& x : out.span()) x *= s;
  return out;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  require_same("axpy", x, y);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const Mat& x, Mat& y) {
  require_same("axpy", x, y);
  auto xs = x.span();
  auto ys = y.span();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] += alpha * xs[i];
}

void add_outer(double alpha, const Vec& a, const Vec& b, Mat& y) {
  if (y.rows() != a.size() || y.cols() != b.size()) {
    mismatch("add_outer", len_str(a) + "x" + len_str(b), shape_str(y));
  }
  const double* __restrict bs = b.span().data();
  const std::size_t cols = b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = alpha * a[i];
    if (ai == 0.0) continue;
    double* __restrict r = y.row(i).data();
    for (std::size_t j = 0; j < cols; ++j) r[j] += ai * bs[j];
  }
}

Vec map(const Vec& v, const std::function<double(double)>& f) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  return out;
}

Mat map(const Mat& m, const std::function<double(double)>& f) {
  Mat out(m.rows(), m.cols());
  auto src = m.span();
  auto dst = out.span();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace srnreg
