#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dguard/maps.hpp"

namespace dguard {

// W x H x C grid of channel values in [0, 1]. Stored scanline-major
// ((y * W + x) * C + c), matching PPM byte order.
struct Image {
    int width = 0, height = 0, channels = 3;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c = 3)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float at(int x, int y, int c) const { return data[index(x, y, c)]; }
    float& at(int x, int y, int c) { return data[index(x, y, c)]; }
};

inline std::uint8_t to_byte(float v) {
    float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

inline std::string encode_ppm(const Image& img) {
    if (img.channels != 3) throw std::invalid_argument("ppm: image must have 3 channels");
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.reserve(out.size() + img.data.size());
    for (float v : img.data) out.push_back(static_cast<char>(to_byte(v)));
    return out;
}

inline void write_ppm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ppm: cannot open for writing: " + path);
    const std::string bytes = encode_ppm(img);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("ppm: write failed: " + path);
}

namespace detail {

inline int pnm_read_int(std::istream& in) {
    // Skips whitespace and '#' comment lines, per the netpbm header grammar.
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch)) throw std::runtime_error("pnm: malformed header");
    int value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = in.get();
    }
    return value;
}

} // namespace detail

inline Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ppm: cannot open: " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '6') throw std::runtime_error("ppm: not a P6 file: " + path);
    const int w = detail::pnm_read_int(f);
    const int h = detail::pnm_read_int(f);
    const int maxval = detail::pnm_read_int(f);
    if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 supported: " + path);
    Image img(w, h, 3);
    std::vector<char> raw(static_cast<std::size_t>(w) * h * 3);
    f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("ppm: truncated pixel data: " + path);
    for (std::size_t k = 0; k < raw.size(); ++k)
        img.data[k] = static_cast<float>(static_cast<std::uint8_t>(raw[k])) / 255.0f;
    return img;
}

// Objectness map rendering: 1-cells map to 255, 0-cells to 0. Map column i
// becomes pixel column x, row j pixel row y.
inline std::string encode_pgm(const ObjectnessMap& om) {
    std::string out = "P5\n" + std::to_string(om.X) + " " + std::to_string(om.Y) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(om.X) * om.Y);
    for (int j = 0; j < om.Y; ++j)
        for (int i = 0; i < om.X; ++i)
            out.push_back(static_cast<char>(om.at(i, j) ? 255 : 0));
    return out;
}

inline void write_pgm(const std::string& path, const ObjectnessMap& om) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("pgm: cannot open for writing: " + path);
    const std::string bytes = encode_pgm(om);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("pgm: write failed: " + path);
}

} // namespace dguard
