#include "ctt/image_io.hpp"

#include <fstream>

#include "ctt/common.hpp"

namespace ctt {

namespace {

void write_pnm(const std::filesystem::path& path, const char* magic, int width, int height,
               const std::vector<std::uint8_t>& pixels, int channels) {
    if (width <= 0 || height <= 0) throw ShapeError("pnm write: nonpositive dimensions");
    const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
    if (pixels.size() != expected) throw ShapeError("pnm write: pixel buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << magic << "\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw DataError("short write: " + path.string());
}

int next_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then reads one unsigned integer.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            while (c != '\n' && c != EOF) c = in.get();
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    return value;
}

ImageU8 read_pnm(const std::filesystem::path& path, const char* magic, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != magic[0] || m1 != magic[1]) {
        throw DataError("bad magic in " + path.string() + " (expected " + magic + ")");
    }
    ImageU8 img;
    img.channels = channels;
    img.width = next_pnm_token(in);
    img.height = next_pnm_token(in);
    const int maxval = next_pnm_token(in);
    if (img.width <= 0 || img.height <= 0 || maxval != 255) {
        throw DataError("unsupported pnm header in " + path.string());
    }
    in.get();  // single whitespace byte before raster
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * channels);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw DataError("truncated pnm raster in " + path.string());
    }
    return img;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
    write_pnm(path, "P6", width, height, rgb, 3);
}

void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& gray) {
    write_pnm(path, "P5", width, height, gray, 1);
}

ImageU8 read_ppm(const std::filesystem::path& path) { return read_pnm(path, "P6", 3); }
ImageU8 read_pgm(const std::filesystem::path& path) { return read_pnm(path, "P5", 1); }

}  // namespace ctt
