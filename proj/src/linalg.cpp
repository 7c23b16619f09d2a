#include "mmpp/linalg.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mmpp/errors.hpp"

namespace mmpp {

namespace {

void require_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput("matrix entry is not finite");
  }
}

// Diagonal Pade [8/8] coefficients: c_k = c_{k-1} (p-k+1) / (k (2p-k+1)).
constexpr int kPadeOrder = 8;

constexpr std::array<double, kPadeOrder + 1> pade_coefficients() {
  std::array<double, kPadeOrder + 1> c{};
  c[0] = 1.0;
  for (int k = 1; k <= kPadeOrder; ++k) {
    c[k] = c[k - 1] * static_cast<double>(kPadeOrder - k + 1) /
           static_cast<double>(k * (2 * kPadeOrder - k + 1));
  }
  return c;
}

constexpr auto kPade = pade_coefficients();

}  // namespace

SquareMatrix::SquareMatrix(std::size_t dim, double fill)
    : dim_(dim), data_(dim * dim, fill) {
  if (dim == 0) throw InvalidInput("matrix dimension must be >= 1");
  require_finite(data_);
}

SquareMatrix::SquareMatrix(std::size_t dim, std::vector<double> entries)
    : dim_(dim), data_(std::move(entries)) {
  if (dim == 0) throw InvalidInput("matrix dimension must be >= 1");
  if (data_.size() != dim * dim) {
    throw InvalidInput("matrix needs " + std::to_string(dim * dim) +
                       " entries, got " + std::to_string(data_.size()));
  }
  require_finite(data_);
}

SquareMatrix::SquareMatrix(
    std::initializer_list<std::initializer_list<double>> rows)
    : dim_(rows.size()) {
  if (dim_ == 0) throw InvalidInput("matrix dimension must be >= 1");
  data_.reserve(dim_ * dim_);
  for (const auto& r : rows) {
    if (r.size() != dim_) throw InvalidInput("matrix rows must be square");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_);
}

SquareMatrix::SquareMatrix(const RowMajorMatrix& m)
    : dim_(static_cast<std::size_t>(m.rows())),
      data_(m.data(), m.data() + m.size()) {
  if (m.rows() != m.cols() || dim_ == 0) {
    throw InvalidInput("matrix must be square and non-empty");
  }
  require_finite(data_);
}

SquareMatrix SquareMatrix::identity(std::size_t dim) {
  SquareMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::diagonal(std::span<const double> diag) {
  SquareMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  require_finite(m.data_);
  return m;
}

SquareMatrix SquareMatrix::operator*(const SquareMatrix& rhs) const {
  if (rhs.dim_ != dim_) throw InvalidInput("dimension mismatch in product");
  SquareMatrix out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t l = 0; l < dim_; ++l) {
      const double a = (*this)(i, l);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < dim_; ++j) out(i, j) += a * rhs(l, j);
    }
  }
  return out;
}

SquareMatrix SquareMatrix::operator-(const SquareMatrix& rhs) const {
  if (rhs.dim_ != dim_) throw InvalidInput("dimension mismatch in difference");
  SquareMatrix out(*this);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= rhs.data_[i];
  return out;
}

SquareMatrix SquareMatrix::operator+(const SquareMatrix& rhs) const {
  if (rhs.dim_ != dim_) throw InvalidInput("dimension mismatch in sum");
  SquareMatrix out(*this);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += rhs.data_[i];
  return out;
}

SquareMatrix SquareMatrix::scaled(double c) const {
  SquareMatrix out(*this);
  for (double& x : out.data_) x *= c;
  return out;
}

double SquareMatrix::max_abs_diff(const SquareMatrix& other) const {
  if (other.dim_ != dim_) throw InvalidInput("dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    d = std::max(d, std::abs(data_[i] - other.data_[i]));
  }
  return d;
}

bool SquareMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

bool SquareMatrix::is_metzler() const {
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      if (i != j && (*this)(i, j) < 0.0) return false;
    }
  }
  return true;
}

namespace {

// Pade approximant of exp(x) followed by `squarings` squarings. Fixed-size
// instantiations avoid heap traffic for the small generators used here.
template <typename Mat>
Mat pade_expm(const Mat& x, int squarings) {
  const auto n = x.rows();
  const Mat id = Mat::Identity(n, n);
  Mat power = id;
  Mat even = kPade[0] * id;
  Mat odd = Mat::Zero(n, n);
  for (int k = 1; k <= kPadeOrder; ++k) {
    power = (power * x).eval();
    if (k % 2 == 0) {
      even += kPade[k] * power;
    } else {
      odd += kPade[k] * power;
    }
  }
  Mat r = (even - odd).partialPivLu().solve(even + odd);
  for (int s = 0; s < squarings; ++s) r = (r * r).eval();
  return r;
}

template <int N>
std::vector<double> fixed_expm(const RowMajorMatrix& x, int squarings) {
  using Fixed = Eigen::Matrix<double, N, N, N == 1 ? Eigen::ColMajor
                                                   : Eigen::RowMajor>;
  const Fixed r = pade_expm<Fixed>(Fixed(x), squarings);
  return std::vector<double>(r.data(), r.data() + N * N);
}

}  // namespace

SquareMatrix expm(const SquareMatrix& a, double t) {
  if (!a.all_finite() || !std::isfinite(t)) {
    throw InvalidInput("expm: non-finite input");
  }
  if (t < 0.0) throw InvalidInput("expm: time must be nonnegative");
  if (t == 0.0) return SquareMatrix::identity(a.dim());

  RowMajorMatrix x = a.eigen() * t;
  const double norm = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    x /= std::ldexp(1.0, squarings);
  }

  std::vector<double> r;
  switch (a.dim()) {
    case 1: r = fixed_expm<1>(x, squarings); break;
    case 2: r = fixed_expm<2>(x, squarings); break;
    case 3: r = fixed_expm<3>(x, squarings); break;
    case 4: r = fixed_expm<4>(x, squarings); break;
    default: {
      const RowMajorMatrix d = pade_expm<RowMajorMatrix>(x, squarings);
      r.assign(d.data(), d.data() + d.size());
    }
  }
  for (double v : r) {
    if (!std::isfinite(v)) throw InvalidInput("expm: result overflowed");
  }
  SquareMatrix out(a.dim(), std::move(r));
  if (a.is_metzler()) {
    for (std::size_t i = 0; i < out.dim(); ++i) {
      for (std::size_t j = 0; j < out.dim(); ++j) {
        if (out(i, j) < 0.0) out(i, j) = 0.0;
      }
    }
  }
  return out;
}

SquareMatrix eta_matrix(const SquareMatrix& q, std::span<const double> lambda,
                        double delta) {
  if (lambda.size() != q.dim()) {
    throw InvalidInput("eta_matrix: rate vector has " +
                       std::to_string(lambda.size()) + " entries for a " +
                       std::to_string(q.dim()) + "-state generator");
  }
  if (!(delta >= 0.0)) throw InvalidInput("eta_matrix: negative interval");
  SquareMatrix g(q);
  for (std::size_t i = 0; i < q.dim(); ++i) g(i, i) -= lambda[i];
  return expm(g, delta);
}

void left_multiply(std::span<const double> x, const SquareMatrix& m,
                   std::span<double> y) {
  const std::size_t k = m.dim();
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto r = m.row(i);
    for (std::size_t j = 0; j < k; ++j) y[j] += xi * r[j];
  }
}

}  // namespace mmpp
