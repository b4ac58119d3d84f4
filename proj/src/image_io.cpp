#include "sseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sseg {

namespace {

void write_pnm_header(std::ofstream& f, const char* magic, int w, int h) {
    f << magic << "\n" << w << " " << h << "\n255\n";
}

// Reads "P5\n<w> <h>\n<maxval>\n" tolerating comments and any whitespace.
struct PnmHeader {
    int w = 0, h = 0, maxval = 0;
};

int next_pnm_int(std::istream& f) {
    int c = f.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = f.get();
        }
        c = f.get();
    }
    if (c == EOF) throw std::runtime_error("pgm: truncated header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = f.get();
    }
    return v;
}

PnmHeader read_pgm_header(std::ifstream& f, const std::string& path) {
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '5') throw std::runtime_error("not a P5 pgm: " + path);
    PnmHeader h;
    h.w = next_pnm_int(f);
    h.h = next_pnm_int(f);
    h.maxval = next_pnm_int(f);
    if (h.w < 1 || h.h < 1 || h.maxval != 255) {
        throw std::runtime_error("unsupported pgm geometry in " + path);
    }
    return h;
}

std::vector<std::uint8_t> read_payload(std::ifstream& f, std::size_t n, const std::string& path) {
    std::vector<std::uint8_t> bytes(n);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f.gcount()) != n) {
        throw std::runtime_error("pgm: truncated pixel data in " + path);
    }
    return bytes;
}

}  // namespace

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_pnm_header(f, "P5", img.w, img.h);
    std::vector<std::uint8_t> bytes(img.px.size());
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        const float v = std::clamp(img.px[i], 0.0f, 1.0f);
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    const PnmHeader h = read_pgm_header(f, path);
    const auto bytes = read_payload(f, static_cast<std::size_t>(h.w) * h.h, path);
    GrayImage img(h.h, h.w);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.px[i] = static_cast<float>(bytes[i]) / 255.0f;
    return img;
}

void write_label_pgm(const std::string& path, const LabelImage& mask) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_pnm_header(f, "P5", mask.w, mask.h);
    std::vector<std::uint8_t> bytes(mask.px.size());
    for (std::size_t i = 0; i < mask.px.size(); ++i) {
        const std::int32_t v = mask.px[i];
        if (v < 0 || v > 255) throw std::runtime_error("label out of byte range in " + path);
        bytes[i] = static_cast<std::uint8_t>(v);
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

LabelImage read_label_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    const PnmHeader h = read_pgm_header(f, path);
    const auto bytes = read_payload(f, static_cast<std::size_t>(h.w) * h.h, path);
    LabelImage mask(h.h, h.w);
    for (std::size_t i = 0; i < bytes.size(); ++i) mask.px[i] = bytes[i];
    return mask;
}

void write_ppm(const std::string& path, const RgbImage& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_pnm_header(f, "P6", img.w, img.h);
    f.write(reinterpret_cast<const char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

GrayImage resize_bilinear(const GrayImage& src, int out_h, int out_w) {
    if (src.h < 1 || src.w < 1 || out_h < 1 || out_w < 1) {
        throw std::invalid_argument("resize_bilinear: degenerate size");
    }
    GrayImage out(out_h, out_w);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
        const int y0 = std::min(src.h - 1, static_cast<int>(fy));
        const int y1 = std::min(src.h - 1, y0 + 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
            const int x0 = std::min(src.w - 1, static_cast<int>(fx));
            const int x1 = std::min(src.w - 1, x0 + 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
            const double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

}  // namespace sseg
