#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace cemflow {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Compressed sparse row operator over fine degrees of freedom.
using SparseOperator = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
/// Column-major sparse storage, used for factorizations and basis matrices.
using SparseColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

}  // namespace cemflow
