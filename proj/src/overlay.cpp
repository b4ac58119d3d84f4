#include "sseg/overlay.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sseg {

Palette default_palette() {
    return {
        {"border", {120, 120, 120}},
        {"textrun", {0, 200, 0}},
        {"widget", {255, 220, 0}},
        {"textblock", {70, 130, 255}},
        {"choicegroup_title", {255, 140, 0}},
        {"textfield", {0, 210, 210}},
        {"choicefield", {230, 60, 230}},
        {"choicegroup", {230, 40, 40}},
        {"table", {70, 130, 255}},
        {"list", {0, 200, 0}},
        {"table_row", {255, 140, 0}},
        {"table_column", {0, 210, 210}},
    };
}

RgbImage overlay_mask(const GrayImage& image, const LabelImage& mask, const ClassSchema& schema,
                      int level_index, const Palette& palette, double alpha) {
    if (image.h != mask.h || image.w != mask.w) {
        throw std::invalid_argument("overlay: image " + std::to_string(image.h) + "x" +
                                    std::to_string(image.w) + " vs mask " + std::to_string(mask.h) +
                                    "x" + std::to_string(mask.w));
    }
    // every class of the level must have a tint before any pixel is touched
    for (int c = 1; c < schema.class_count(level_index); ++c) {
        const auto& name = schema.class_name(level_index, c);
        if (!palette.contains(name)) {
            throw std::invalid_argument("overlay: palette has no entry for class '" + name + "'");
        }
    }

    RgbImage out(image.h, image.w);
    for (int y = 0; y < image.h; ++y) {
        for (int x = 0; x < image.w; ++x) {
            const float g = std::clamp(image.at(y, x), 0.0f, 1.0f);
            const double base = 255.0 * g;
            double r = base, gg = base, b = base;
            const std::int32_t cls = mask.at(y, x);
            if (cls != ClassSchema::kBackground) {
                if (cls < 0 || cls >= schema.class_count(level_index)) {
                    throw std::invalid_argument("overlay: mask value " + std::to_string(cls) +
                                                " outside level's class set");
                }
                const Rgb tint = palette.at(schema.class_name(level_index, cls));
                r = (1.0 - alpha) * base + alpha * tint[0];
                gg = (1.0 - alpha) * base + alpha * tint[1];
                b = (1.0 - alpha) * base + alpha * tint[2];
            }
            const std::size_t i = (static_cast<std::size_t>(y) * image.w + x) * 3;
            out.px[i] = static_cast<std::uint8_t>(std::lround(r));
            out.px[i + 1] = static_cast<std::uint8_t>(std::lround(gg));
            out.px[i + 2] = static_cast<std::uint8_t>(std::lround(b));
        }
    }
    return out;
}

std::string palette_legend(const ClassSchema& schema, int level_index, const Palette& palette) {
    std::ostringstream os;
    os << "level " << (level_index + 1) << " (" << schema.levels[static_cast<std::size_t>(level_index)].name
       << ")\n";
    for (int c = 1; c < schema.class_count(level_index); ++c) {
        const auto& name = schema.class_name(level_index, c);
        const Rgb tint = palette.at(name);
        char hex[8];
        std::snprintf(hex, sizeof(hex), "#%02x%02x%02x", tint[0], tint[1], tint[2]);
        os << name << " " << hex << "\n";
    }
    return os.str();
}

}  // namespace sseg
