#ifndef OPTSTOP_REGRESSION_HPP
#define OPTSTOP_REGRESSION_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace optstop {

/// Gaussian kernel Gram block K_ij = exp(-(a_i - b_j)^2 / (2 bandwidth^2))
/// for one-dimensional features stored as column vectors.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_gram(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    typename DerivedA::Scalar bandwidth) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar scale = Scalar(-0.5) / (bandwidth * bandwidth);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sq =
      (a.derived().replicate(1, b.size()).rowwise() - b.derived().transpose()).array().square().matrix();
  return (scale * sq.array()).exp().matrix();
}

enum class RegressionBackend { kernel, polynomial, tabular };

std::string_view to_string(RegressionBackend backend);

/// Accepts "kernel", "poly"/"polynomial", "tabular".
RegressionBackend parse_backend(std::string_view name);

struct KernelSpec {
  double bandwidth = 1.0;  ///< sigma of the Gaussian kernel
  double ridge = 1e-6;     ///< lambda added to the Gram diagonal

  void validate() const;
};

struct RegressionSpec {
  RegressionBackend backend = RegressionBackend::kernel;
  KernelSpec kernel;
  int poly_degree = 3;
  std::size_t support_cap = 2000;  ///< kernel backend only; larger sets are subsampled
  bool merge_duplicates = true;    ///< kernel backend only
  std::uint64_t seed = 0;          ///< subsampling stream seed
};

/// Raised when the kernel system is numerically singular.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fitted one-dimensional regressor.
///
/// kernel:     support = x_1..x_d, weights = w_1..w_d
/// polynomial: weights = c_0..c_k (ascending powers), support empty
/// tabular:    support = sorted distinct keys, weights = per-key mean target;
///             inputs between keys map to the nearest key (lower on ties)
/// zero:       predicts 0 everywhere
class FittedRegressor {
 public:
  enum class Kind { zero, kernel, polynomial, tabular };

  FittedRegressor() = default;

  static FittedRegressor kernel(const KernelSpec& spec, Eigen::VectorXd support, Eigen::VectorXd weights);
  static FittedRegressor polynomial(Eigen::VectorXd coefficients);
  static FittedRegressor tabular(Eigen::VectorXd keys, Eigen::VectorXd values);

  double predict(double x) const;
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& xs) const;

  Kind kind() const { return kind_; }
  const KernelSpec& kernel_spec() const { return spec_; }
  const Eigen::VectorXd& support() const { return support_; }
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  Kind kind_ = Kind::zero;
  KernelSpec spec_;
  Eigen::VectorXd support_;
  Eigen::VectorXd weights_;
};

std::string_view to_string(FittedRegressor::Kind kind);
FittedRegressor::Kind parse_regressor_kind(std::string_view name);

inline FittedRegressor zero_regressor() { return {}; }

/// Solves (K + ridge I) w = y on the given points without any preprocessing.
/// Throws SingularSystemError when the factorization fails or the reciprocal
/// condition estimate drops below 1e-14.
FittedRegressor fit_kernel(const Eigen::Ref<const Eigen::VectorXd>& xs,
                           const Eigen::Ref<const Eigen::VectorXd>& ys, const KernelSpec& spec);

/// Least squares on 1, x, ..., x^degree; the degree drops to d - 1 when
/// fewer than degree + 1 points are given.
FittedRegressor fit_polynomial(const Eigen::Ref<const Eigen::VectorXd>& xs,
                               const Eigen::Ref<const Eigen::VectorXd>& ys, int degree);

/// Per-distinct-feature mean of the targets.
FittedRegressor fit_tabular(const Eigen::Ref<const Eigen::VectorXd>& xs,
                            const Eigen::Ref<const Eigen::VectorXd>& ys);

/// Collapses exactly equal features, averaging their targets. Output is
/// sorted by feature.
std::pair<Eigen::VectorXd, Eigen::VectorXd> merge_duplicate_features(
    const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& ys);

/// Backend dispatch with the kernel preprocessing (duplicate merge, seeded
/// subsample above the cap). `stream_id` keys the subsample stream.
FittedRegressor fit(const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& ys,
                    const RegressionSpec& spec, std::uint64_t stream_id = 0);

}  // namespace optstop

#endif  // OPTSTOP_REGRESSION_HPP
