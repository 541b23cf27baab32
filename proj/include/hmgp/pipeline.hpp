#pragma once

#include <memory>
#include <span>

#include "hmgp/hfactor.hpp"
#include "hmgp/hmatrix.hpp"

namespace hmgp {

// Knobs shared by every H-pipeline entry point (likelihood, fitting,
// prediction, benchmarks).
struct HConfig {
  double eta = 2.0;
  int leaf_size = 32;
  RankControl rank = RankControl::fixed_accuracy(1e-6);
  double eps_factor = -1.0;  // < 0: reuse the assembly accuracy
  FactorForm form = FactorForm::Ldl;
  int threads = 1;

  double factor_eps() const {
    if (eps_factor > 0.0) return eps_factor;
    return rank.mode == RankControl::Mode::FixedAccuracy ? rank.eps : 1e-6;
  }
};

// Covariance matrix assembled through the H-pipeline together with the
// structures it points into.
struct AssembledCov {
  std::unique_ptr<ClusterTree> tree;
  std::unique_ptr<BlockClusterTree> blocks;
  HMatrix matrix;
};

AssembledCov assemble_covariance(std::span<const Location> locations,
                                 const MaternParams& params, const HConfig& cfg);

}  // namespace hmgp
