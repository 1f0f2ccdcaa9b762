#pragma once

#include <Eigen/Dense>

namespace varhhmm {

template <typename T>
using MatXT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
using VecXT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Working scalar for the whole library.
using Mat = MatXT<double>;
using Vec = VecXT<double>;
using IVec = VecXT<int>;

}  // namespace varhhmm
