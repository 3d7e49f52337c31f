#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace lacal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Row-major point sets: one row per point, one column per input.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Positions = std::vector<Vec3>;

}  // namespace lacal
