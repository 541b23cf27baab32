#pragma once

#include <Eigen/Core>
#include <limits>
#include <stdexcept>
#include <string>

#include "hmgp/hmatrix.hpp"

namespace hmgp {

enum class FactorForm { Cholesky, Ldl };

// Raised when a pivot makes the factorization impossible (Cholesky: any
// nonpositive pivot; LDL: an exactly zero pivot). Carries the original index
// of the failing row.
struct FactorError : std::runtime_error {
  FactorError(const std::string& msg, int index, double value)
      : std::runtime_error(msg), pivot_index(index), pivot_value(value) {}
  int pivot_index;
  double pivot_value;
};

struct FactorInfo {
  double eps = 0.0;
  int clamped = 0;   // tiny negative pivots lifted to +1e-14 * max_diag (LDL)
  int negative = 0;  // genuinely negative pivots kept (LDL); log_det rejects
  double min_pivot = std::numeric_limits<double>::infinity();
};

// Triangular H-factor: C~ ~= L L^T (Cholesky) or L D L^T (LDL, unit-diagonal
// L). Solves and the log-determinant run over the factor without ever forming
// an inverse.
class HFactor {
 public:
  FactorForm form() const { return form_; }
  const FactorInfo& info() const { return info_; }
  int size() const { return tree_->size(); }

  // v with L v = P b, returned in original index order.
  Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const;
  // x with C~ x ~= b (forward, diagonal, backward).
  Eigen::VectorXd solve_factored(const Eigen::VectorXd& b) const;
  // b^T C~^{-1} b via the forward solve.
  double quad_form(const Eigen::VectorXd& b) const;
  // Cholesky: 2 sum log L_ii; LDL: sum log D_ii (throws on an indefinite D).
  double log_det() const;

  // Diagonal of the factor in original index order (L_ii or D_ii).
  Eigen::VectorXd diagonal() const;

  std::size_t storage_bytes() const;

  // Dense lower factor in tree order (n <= 4096; test support).
  Eigen::MatrixXd lower_dense() const;
  // P^T L (D) L^T P in original order (n <= 4096; test support).
  Eigen::MatrixXd reconstruct() const;

 private:
  friend HFactor factorize(const HMatrix&, double, FactorForm);

  std::unique_ptr<HBlock> root_;
  const ClusterTree* tree_ = nullptr;
  std::shared_ptr<const ClusterTree> owned_tree_;
  Eigen::VectorXd diag_;  // tree order
  FactorForm form_ = FactorForm::Ldl;
  FactorInfo info_;
};

HFactor factorize(const HMatrix& h, double eps_f, FactorForm form);

inline HFactor h_cholesky(const HMatrix& h, double eps_f) {
  return factorize(h, eps_f, FactorForm::Cholesky);
}
inline HFactor h_ldl(const HMatrix& h, double eps_f) {
  return factorize(h, eps_f, FactorForm::Ldl);
}

}  // namespace hmgp
