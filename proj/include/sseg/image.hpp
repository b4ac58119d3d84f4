#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sseg {

// Grayscale raster, values in [0,1]; 0 is black ink / padding, 1 is paper.
struct GrayImage {
    int h = 0, w = 0;
    std::vector<float> px;

    GrayImage() = default;
    GrayImage(int h_, int w_, float fill = 1.0f)
        : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_, fill) {}

    float& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

struct RgbImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> px;  // interleaved rgb

    RgbImage() = default;
    RgbImage(int h_, int w_) : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_ * 3, 0) {}
};

// Integer label raster (class ids), one hierarchy level of one page.
struct LabelImage {
    int h = 0, w = 0;
    std::vector<std::int32_t> px;

    LabelImage() = default;
    LabelImage(int h_, int w_, std::int32_t fill = 0)
        : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_, fill) {}

    std::int32_t& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
    std::int32_t at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

// Binary PGM (P5), 8-bit. Images store round(v*255); label masks store the
// class id directly in the byte value.
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);
void write_label_pgm(const std::string& path, const LabelImage& mask);
LabelImage read_label_pgm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& img);

GrayImage resize_bilinear(const GrayImage& src, int out_h, int out_w);

}  // namespace sseg
