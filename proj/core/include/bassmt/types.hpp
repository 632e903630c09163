#pragma once

#include <Eigen/Dense>

namespace bassmt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace bassmt
