#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace emg2artic {

/// Row-major dense matrix; every sequence tensor in the project is
/// [time, features] in this layout.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatD = Mat<double>;
using MatF = Mat<float>;
using VecD = Vec<double>;
using VecF = Vec<float>;

/// Raised when on-disk data (corpus, checkpoint, config) is malformed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emg2artic
