#include "optstop/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "optstop/rng.hpp"

namespace optstop {

std::string_view to_string(RegressionBackend backend) {
  switch (backend) {
    case RegressionBackend::kernel: return "kernel";
    case RegressionBackend::polynomial: return "poly";
    case RegressionBackend::tabular: return "tabular";
  }
  return "unknown";
}

RegressionBackend parse_backend(std::string_view name) {
  if (name == "kernel") return RegressionBackend::kernel;
  if (name == "poly" || name == "polynomial") return RegressionBackend::polynomial;
  if (name == "tabular") return RegressionBackend::tabular;
  throw std::invalid_argument("unknown regression backend '" + std::string(name) + "'");
}

std::string_view to_string(FittedRegressor::Kind kind) {
  switch (kind) {
    case FittedRegressor::Kind::zero: return "zero";
    case FittedRegressor::Kind::kernel: return "kernel";
    case FittedRegressor::Kind::polynomial: return "poly";
    case FittedRegressor::Kind::tabular: return "tabular";
  }
  return "unknown";
}

FittedRegressor::Kind parse_regressor_kind(std::string_view name) {
  if (name == "zero") return FittedRegressor::Kind::zero;
  return [&] {
    switch (parse_backend(name)) {
      case RegressionBackend::kernel: return FittedRegressor::Kind::kernel;
      case RegressionBackend::polynomial: return FittedRegressor::Kind::polynomial;
      case RegressionBackend::tabular: return FittedRegressor::Kind::tabular;
    }
    return FittedRegressor::Kind::zero;
  }();
}

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("kernel: bandwidth must be a positive finite number");
  if (!(ridge >= 0.0) || !std::isfinite(ridge))
    throw std::invalid_argument("kernel: ridge must be non-negative and finite");
}

FittedRegressor FittedRegressor::kernel(const KernelSpec& spec, Eigen::VectorXd support, Eigen::VectorXd weights) {
  spec.validate();
  if (support.size() == 0 || support.size() != weights.size())
    throw std::invalid_argument("kernel regressor needs matching non-empty support and weights");
  if (!weights.allFinite()) throw std::invalid_argument("kernel regressor weights must be finite");
  FittedRegressor out;
  out.kind_ = Kind::kernel;
  out.spec_ = spec;
  out.support_ = std::move(support);
  out.weights_ = std::move(weights);
  return out;
}

FittedRegressor FittedRegressor::polynomial(Eigen::VectorXd coefficients) {
  if (coefficients.size() == 0 || !coefficients.allFinite())
    throw std::invalid_argument("polynomial regressor needs finite coefficients");
  FittedRegressor out;
  out.kind_ = Kind::polynomial;
  out.weights_ = std::move(coefficients);
  return out;
}

FittedRegressor FittedRegressor::tabular(Eigen::VectorXd keys, Eigen::VectorXd values) {
  if (keys.size() == 0 || keys.size() != values.size())
    throw std::invalid_argument("tabular regressor needs matching non-empty keys and values");
  if (!std::is_sorted(keys.begin(), keys.end()) || std::adjacent_find(keys.begin(), keys.end()) != keys.end())
    throw std::invalid_argument("tabular regressor keys must be strictly increasing");
  FittedRegressor out;
  out.kind_ = Kind::tabular;
  out.support_ = std::move(keys);
  out.weights_ = std::move(values);
  return out;
}

double FittedRegressor::predict(double x) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::kernel: {
      const double scale = -0.5 / (spec_.bandwidth * spec_.bandwidth);
      return weights_.dot(((support_.array() - x).square() * scale).exp().matrix());
    }
    case Kind::polynomial: {
      double acc = 0.0;
      for (Eigen::Index k = weights_.size(); k-- > 0;) acc = acc * x + weights_[k];
      return acc;
    }
    case Kind::tabular: {
      const auto begin = support_.begin();
      const auto it = std::lower_bound(begin, support_.end(), x);
      if (it == support_.end()) return weights_[support_.size() - 1];
      const auto hi = it - begin;
      if (*it == x || hi == 0) return weights_[hi];
      return (x - support_[hi - 1] <= *it - x) ? weights_[hi - 1] : weights_[hi];
    }
  }
  return 0.0;
}

Eigen::VectorXd FittedRegressor::predict(const Eigen::Ref<const Eigen::VectorXd>& xs) const {
  if (kind_ == Kind::kernel) return gaussian_gram(xs, support_, spec_.bandwidth) * weights_;
  Eigen::VectorXd out(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = predict(xs[i]);
  return out;
}

namespace {

void check_training_data(const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& ys) {
  if (xs.size() == 0) throw std::invalid_argument("fit: no training points");
  if (xs.size() != ys.size()) throw std::invalid_argument("fit: feature and target lengths differ");
  if (!xs.allFinite() || !ys.allFinite()) throw std::invalid_argument("fit: non-finite training data");
}

}  // namespace

FittedRegressor fit_kernel(const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& ys,
                           const KernelSpec& spec) {
  spec.validate();
  check_training_data(xs, ys);
  Eigen::MatrixXd system = gaussian_gram(xs, xs, spec.bandwidth);
  system.diagonal().array() += spec.ridge;

  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= 1e-14))
    throw SingularSystemError("fit_kernel: Gram system is numerically singular (d = " +
                              std::to_string(xs.size()) + ", ridge = " + std::to_string(spec.ridge) + ")");
  Eigen::VectorXd weights = llt.solve(ys);
  // One step of iterative refinement tightens the residual on ill-conditioned Gram blocks.
  weights += llt.solve(ys - system * weights);
  return FittedRegressor::kernel(spec, xs, std::move(weights));
}

FittedRegressor fit_polynomial(const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& ys,
                               int degree) {
  check_training_data(xs, ys);
  if (degree < 0) throw std::invalid_argument("fit_polynomial: degree must be >= 0");
  const Eigen::Index terms = std::min<Eigen::Index>(degree + 1, xs.size());
  Eigen::MatrixXd design(xs.size(), terms);
  design.col(0).setOnes();
  for (Eigen::Index k = 1; k < terms; ++k) design.col(k) = design.col(k - 1).cwiseProduct(xs);
  Eigen::VectorXd coefficients = design.colPivHouseholderQr().solve(ys);
  if (!coefficients.allFinite()) throw SingularSystemError("fit_polynomial: least-squares solve failed");
  return FittedRegressor::polynomial(std::move(coefficients));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> merge_duplicate_features(const Eigen::Ref<const Eigen::VectorXd>& xs,
                                                                     const Eigen::Ref<const Eigen::VectorXd>& ys) {
  check_training_data(xs, ys);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(xs.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return xs[a] < xs[b]; });

  std::vector<double> keys;
  std::vector<double> means;
  std::size_t run = 0;
  for (Eigen::Index idx : order) {
    if (!keys.empty() && xs[idx] == keys.back()) {
      ++run;
      means.back() += (ys[idx] - means.back()) / static_cast<double>(run);
    } else {
      keys.push_back(xs[idx]);
      means.push_back(ys[idx]);
      run = 1;
    }
  }
  return {Eigen::Map<Eigen::VectorXd>(keys.data(), static_cast<Eigen::Index>(keys.size())),
          Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()))};
}

FittedRegressor fit_tabular(const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& ys) {
  auto [keys, values] = merge_duplicate_features(xs, ys);
  return FittedRegressor::tabular(std::move(keys), std::move(values));
}

FittedRegressor fit(const Eigen::Ref<const Eigen::VectorXd>& xs, const Eigen::Ref<const Eigen::VectorXd>& ys,
                    const RegressionSpec& spec, std::uint64_t stream_id) {
  check_training_data(xs, ys);
  switch (spec.backend) {
    case RegressionBackend::polynomial:
      return fit_polynomial(xs, ys, spec.poly_degree);
    case RegressionBackend::tabular:
      return fit_tabular(xs, ys);
    case RegressionBackend::kernel:
      break;
  }

  Eigen::VectorXd support = xs;
  Eigen::VectorXd targets = ys;
  if (spec.merge_duplicates) std::tie(support, targets) = merge_duplicate_features(xs, ys);

  if (spec.support_cap > 0 && static_cast<std::size_t>(support.size()) > spec.support_cap) {
    // Partial Fisher-Yates, then restore index order.
    RngStream rng(spec.seed, substream::subsample, stream_id);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(support.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (std::size_t i = 0; i < spec.support_cap; ++i) {
      const auto remaining = idx.size() - i;
      const auto j = i + static_cast<std::size_t>(rng.next_u64() % remaining);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(spec.support_cap);
    std::sort(idx.begin(), idx.end());
    Eigen::VectorXd sub_x(static_cast<Eigen::Index>(idx.size()));
    Eigen::VectorXd sub_y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      sub_x[static_cast<Eigen::Index>(i)] = support[idx[i]];
      sub_y[static_cast<Eigen::Index>(i)] = targets[idx[i]];
    }
    support = std::move(sub_x);
    targets = std::move(sub_y);
  }
  return fit_kernel(support, targets, spec.kernel);
}

}  // namespace optstop
