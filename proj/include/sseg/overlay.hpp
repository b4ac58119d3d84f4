#pragma once

#include <array>
#include <map>
#include <string>

#include "sseg/image.hpp"
#include "sseg/schema.hpp"

namespace sseg {

using Rgb = std::array<std::uint8_t, 3>;

// class name -> tint; background is never tinted.
using Palette = std::map<std::string, Rgb>;

Palette default_palette();

// Alpha-blends each labeled pixel with its class tint. Throws if the mask
// uses a class that has no palette entry.
RgbImage overlay_mask(const GrayImage& image, const LabelImage& mask, const ClassSchema& schema,
                      int level_index, const Palette& palette, double alpha = 0.45);

// "<class> #rrggbb" per line for the classes of one level.
std::string palette_legend(const ClassSchema& schema, int level_index, const Palette& palette);

}  // namespace sseg
