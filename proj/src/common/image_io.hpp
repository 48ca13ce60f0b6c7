#pragma once

#include <string>

#include "common/tensor.hpp"

namespace srdet {

// Binary PGM (c==1) / PPM (c==3), 8-bit. Values are mapped [0,1] <-> [0,255]
// with round-to-nearest on write.
void write_image(const std::string& path, const Tensor& img);
Tensor read_image(const std::string& path);

}  // namespace srdet
