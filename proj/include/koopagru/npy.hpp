#pragma once

#include "koopagru/common.hpp"

#include <string>

namespace koopagru::npy {

// Minimal NumPy .npy support: little-endian float/int/bool arrays of rank
// 1 or 2. Rank-1 arrays load as a single column.
Eigen::MatrixXd load(const std::string& path);
void save(const std::string& path, const Eigen::MatrixXd& values);

}  // namespace koopagru::npy
