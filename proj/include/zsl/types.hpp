#pragma once

#include <Eigen/Dense>

namespace zsl {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatrixF = Matrix<float>;
using RowVectorF = RowVector<float>;

}  // namespace zsl
