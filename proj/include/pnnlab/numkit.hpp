#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pnnlab {

// Dense row-major matrix of doubles. Column vectors are Mats with cols() == 1.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat zeros(std::size_t rows, std::size_t cols) { return Mat(rows, cols); }
  static Mat identity(std::size_t n);
  static Mat column(std::initializer_list<double> values);
  static Mat column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v);
  bool same_shape(const Mat& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// xoshiro256** seeded through splitmix64. Same seed, same stream, on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1), 53 random bits
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal, Box-Muller
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n);  // uniform in [0, n), unbiased

  // Fisher-Yates with this generator, so shuffles do not depend on the standard library.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

double relu(double x);
double sigmoid(double x);
double tanh_act(double x);

// Linear algebra. Every routine sums left to right, so results are bitwise reproducible.
Mat matvec(const Mat& a, const Mat& v);
Mat matmul(const Mat& a, const Mat& b);
Mat outer(const Mat& u, const Mat& v);
double dot(const Mat& u, const Mat& v);
double dot(std::span<const double> u, std::span<const double> v);
void axpy(double alpha, const Mat& x, Mat& y);  // y += alpha * x
Mat transpose(const Mat& a);

// Central differences, one coordinate at a time.
Mat finite_diff_grad(const std::function<double(const Mat&)>& f, const Mat& at, double eps);

}  // namespace pnnlab
