#pragma once

#include <string>

#include "disen/tensor.hpp"

namespace disen {

// 8-bit RGB PNG I/O. Tensors are [3, H, W] with values in [0,1]; writing
// quantizes with round(255*v). Reading maps bytes back to v/255, so images
// whose values are already multiples of 1/255 round-trip losslessly.
void write_png(const std::string& path, const Tensor& image);
Tensor read_png(const std::string& path);

}  // namespace disen
