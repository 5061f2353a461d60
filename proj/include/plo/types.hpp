#pragma once
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <limits>

namespace plo {

template <class Scalar_, int Rows_ = Eigen::Dynamic>
using vec_type = Eigen::Matrix<Scalar_, Rows_, 1>;

template <class Scalar_, int Rows_ = Eigen::Dynamic, int Cols_ = Eigen::Dynamic>
using mat_type = Eigen::Matrix<Scalar_, Rows_, Cols_>;

template <class Scalar_>
using sp_mat_type = Eigen::SparseMatrix<Scalar_, Eigen::ColMajor, int>;

template <class Scalar_>
using triplet_type = Eigen::Triplet<Scalar_, int>;

using Vector = vec_type<double>;
using Matrix = mat_type<double>;
using SparseMatrix = sp_mat_type<double>;
using Triplet = triplet_type<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Bounds at or beyond this magnitude are treated as absent.
inline constexpr double kBoundInf = 1e19;

}  // namespace plo
