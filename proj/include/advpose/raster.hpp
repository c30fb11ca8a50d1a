#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "advpose/error.hpp"

namespace advpose {

// Row-major RGB8 image buffer.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;   // width * height * 3

    Raster() = default;
    Raster(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
        if (w <= 0 || h <= 0) throw InvalidInput("raster dimensions must be positive");
        for (std::size_t i = 0; i < pixels.size(); i += 3) {
            pixels[i] = r;
            pixels[i + 1] = g;
            pixels[i + 2] = b;
        }
    }

    std::uint8_t* at(int x, int y) {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    bool operator==(const Raster& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

// "ADPR" raster format: 4 magic bytes, little-endian u32 width, little-endian
// u32 height, then width*height*3 RGB8 bytes row-major, top row first. Used
// for scene backgrounds and as the on-the-wire image payload.
namespace adpr {

inline void append_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::string encode(const Raster& img) {
    std::string out;
    out.reserve(12 + img.pixels.size());
    out += "ADPR";
    append_u32le(out, static_cast<std::uint32_t>(img.width));
    append_u32le(out, static_cast<std::uint32_t>(img.height));
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    return out;
}

inline Raster decode(const std::string& bytes) {
    if (bytes.size() < 12 || bytes.compare(0, 4, "ADPR") != 0)
        throw ParseError("ADPR raster: missing magic bytes");
    auto u32 = [&](std::size_t off) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) |
               (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 8) |
               (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 16) |
               (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3])) << 24);
    };
    std::uint32_t w = u32(4);
    std::uint32_t h = u32(8);
    if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16)
        throw ParseError("ADPR raster: implausible dimensions");
    std::size_t expect = 12 + static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() != expect)
        throw ParseError("ADPR raster: payload size " + std::to_string(bytes.size()) +
                         " does not match header (expected " + std::to_string(expect) + ")");
    Raster img(static_cast<int>(w), static_cast<int>(h));
    std::memcpy(img.pixels.data(), bytes.data() + 12, img.pixels.size());
    return img;
}

inline void save(const Raster& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path);
    std::string bytes = encode(img);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("write failed: " + path);
}

inline Raster load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

}  // namespace adpr

// Binary coverage mask; 1 where the foreground covers the pixel.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;   // width * height, values 0/1

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }
};

}  // namespace advpose
