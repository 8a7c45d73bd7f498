#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctt {

// Binary PPM (P6) / PGM (P5) with maxval 255. Row-major, top-left origin;
// PPM pixels are interleaved RGB.

void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& rgb);
void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& gray);

struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;  // 3 for PPM, 1 for PGM
    std::vector<std::uint8_t> pixels;
};

ImageU8 read_ppm(const std::filesystem::path& path);
ImageU8 read_pgm(const std::filesystem::path& path);

}  // namespace ctt
