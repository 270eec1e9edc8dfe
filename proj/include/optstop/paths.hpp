#ifndef OPTSTOP_PATHS_HPP
#define OPTSTOP_PATHS_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "optstop/model.hpp"

namespace optstop {

/// One realized trajectory over t = 0..T.
///
/// `observation` has T entries (y_1..y_T); every other vector has T + 1.
/// The seller posterior after pricing at t is kept alongside for traces.
struct SamplePath {
  Eigen::VectorXd valuation;
  Eigen::VectorXd observation;
  Eigen::VectorXd price;
  Eigen::VectorXd purchase;
  Eigen::VectorXd exit;
  Eigen::VectorXd seller_mean;
  Eigen::VectorXd seller_variance;

  int horizon() const { return static_cast<int>(exit.size()) - 1; }
};

/// Simulates path `index` of `substream`. Draw order per path: v_0 (unless
/// fixed), then for each t >= 1 the valuation shock followed by the seller's
/// observation noise.
SamplePath generate_path(const ModelParams& params, std::uint64_t substream, std::uint64_t index);

std::vector<SamplePath> generate_paths(const ModelParams& params, std::uint64_t substream,
                                       std::size_t count);

/// N x (T+1) matrix of exit payoffs H.
Eigen::MatrixXd exit_matrix(const std::vector<SamplePath>& paths);

/// N x (T+1) matrix of purchase payoffs pi.
Eigen::MatrixXd purchase_matrix(const std::vector<SamplePath>& paths);

/// FNV-1a over the bit patterns of every path array.
std::uint64_t checksum(const std::vector<SamplePath>& paths);

}  // namespace optstop

#endif  // OPTSTOP_PATHS_HPP
