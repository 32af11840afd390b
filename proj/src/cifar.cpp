#include "asgld/cifar.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

namespace asgld {

namespace {
constexpr std::int64_t kRecordBytes = 3073;
constexpr std::int64_t kPixels = 3072;
}  // namespace

Matrix load_cifar10(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("load_cifar10: cannot open " + path);
  in.seekg(0, std::ios::end);
  const std::int64_t size = in.tellg();
  in.seekg(0, std::ios::beg);
  if (size <= 0 || size % kRecordBytes != 0) {
    std::ostringstream os;
    os << "load_cifar10: " << path << " has " << size
       << " bytes, not a positive multiple of " << kRecordBytes;
    throw data_error(os.str());
  }
  const std::int64_t k = size / kRecordBytes;
  Matrix out(k, kPixels);
  std::vector<unsigned char> rec(static_cast<std::size_t>(kRecordBytes));
  for (std::int64_t r = 0; r < k; ++r) {
    in.read(reinterpret_cast<char*>(rec.data()), kRecordBytes);
    if (!in) throw data_error("load_cifar10: short read in " + path);
    if (rec[0] > 9) {
      std::ostringstream os;
      os << "load_cifar10: record " << r << " has label " << int(rec[0])
         << " (valid labels are 0-9)";
      throw data_error(os.str());
    }
    for (std::int64_t c = 0; c < kPixels; ++c)
      out(r, c) = static_cast<double>(rec[static_cast<std::size_t>(c) + 1]) / 255.0;
  }
  return out;
}

}  // namespace asgld
