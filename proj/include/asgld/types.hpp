#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace asgld {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error taxonomy mirrored by the CLI exit codes: config 2, data 3, numerical 4.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_dim(const Vector& x, Eigen::Index d, const char* what) {
  if (x.size() != d)
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(d) + ", got " +
                                std::to_string(x.size()));
}

}  // namespace asgld
