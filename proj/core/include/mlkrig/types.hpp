#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace mlkrig {

using Index = std::ptrdiff_t;

// Point clouds are stored column-wise: one column per point, d rows.
using Points = Eigen::MatrixXd;

} // namespace mlkrig
