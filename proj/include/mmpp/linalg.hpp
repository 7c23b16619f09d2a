#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mmpp {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense dim x dim matrix of finite reals, stored row-major.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t dim, double fill = 0.0);
  SquareMatrix(std::size_t dim, std::vector<double> entries);
  SquareMatrix(std::initializer_list<std::initializer_list<double>> rows);
  explicit SquareMatrix(const RowMajorMatrix& m);

  static SquareMatrix identity(std::size_t dim);
  static SquareMatrix diagonal(std::span<const double> diag);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * dim_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * dim_ + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<double>& entries() const { return data_; }

  Eigen::Map<const RowMajorMatrix> eigen() const {
    return {data_.data(), static_cast<Eigen::Index>(dim_),
            static_cast<Eigen::Index>(dim_)};
  }

  SquareMatrix operator*(const SquareMatrix& rhs) const;
  SquareMatrix operator-(const SquareMatrix& rhs) const;
  SquareMatrix operator+(const SquareMatrix& rhs) const;
  SquareMatrix scaled(double c) const;

  double max_abs_diff(const SquareMatrix& other) const;
  bool all_finite() const;
  // True when every off-diagonal entry is >= 0, so exp(A t) is entrywise
  // nonnegative.
  bool is_metzler() const;

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// exp(A t) by scaling and squaring with a diagonal Pade approximant. The
// scaled matrix has 1-norm <= 0.5 before the approximant is applied. When A
// is Metzler, negative round-off in the result is clamped to zero.
SquareMatrix expm(const SquareMatrix& a, double t);

// exp{(Q - diag(lambda)) delta}: the probability of moving i -> k over delta
// with no point-process event in between. Rows are sub-stochastic.
SquareMatrix eta_matrix(const SquareMatrix& q, std::span<const double> lambda,
                        double delta);

// y = x^T M, the forward-propagation product used by filters.
void left_multiply(std::span<const double> x, const SquareMatrix& m,
                   std::span<double> y);

}  // namespace mmpp
