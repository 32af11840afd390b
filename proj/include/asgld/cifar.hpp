#pragma once

#include <string>

#include "asgld/types.hpp"

namespace asgld {

// Reads a CIFAR-10 binary batch: k records of 1 label byte (0-9) followed by
// 3072 pixel bytes. Returns a k x 3072 matrix of pixels scaled to [0,1];
// labels are discarded.
Matrix load_cifar10(const std::string& path);

}  // namespace asgld
