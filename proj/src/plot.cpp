#include "ctt/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>

#include "ctt/common.hpp"
#include "ctt/image_io.hpp"

namespace ctt {
namespace {

struct Rgb {
    std::uint8_t r, g, b;
};

constexpr Rgb kBackground{255, 255, 255};
constexpr Rgb kAxis{64, 64, 64};
constexpr Rgb kGrid{225, 225, 225};
constexpr Rgb kText{32, 32, 32};
constexpr Rgb kPalette[] = {
    {214, 39, 40}, {31, 119, 180}, {44, 160, 44},
    {255, 127, 14}, {148, 103, 189}, {140, 86, 75},
};

// 5x7 bitmap glyphs, bit 4 = leftmost column. Lowercase maps to uppercase.
struct Glyph {
    char ch;
    std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont) {
        if (g.ch == u) return &g;
    }
    return nullptr;
}

struct Canvas {
    int w, h;
    std::vector<std::uint8_t> px;

    Canvas(int width, int height) : w(width), h(height) {
        px.assign(static_cast<std::size_t>(w) * h * 3, 0);
        fill({0, 0, w, h}, kBackground);
    }

    struct Rect {
        int x0, y0, x1, y1;  // half-open
    };

    void put(int x, int y, Rgb c) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        std::uint8_t* p = px.data() + (static_cast<std::size_t>(y) * w + x) * 3;
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    void fill(Rect r, Rgb c) {
        for (int y = std::max(0, r.y0); y < std::min(h, r.y1); ++y) {
            for (int x = std::max(0, r.x0); x < std::min(w, r.x1); ++x) put(x, y, c);
        }
    }

    void line(int x0, int y0, int x1, int y1, Rgb c) {
        const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            put(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    /// Line thickened by one pixel down-right, easier to see on white.
    void fat_line(int x0, int y0, int x1, int y1, Rgb c) {
        line(x0, y0, x1, y1, c);
        line(x0, y0 + 1, x1, y1 + 1, c);
    }

    void text(int x, int y, const std::string& s, Rgb c) {
        for (char ch : s) {
            if (const Glyph* g = find_glyph(ch)) {
                for (int row = 0; row < 7; ++row) {
                    for (int col = 0; col < 5; ++col) {
                        if (g->rows[row] & (1 << (4 - col))) put(x + col, y + row, c);
                    }
                }
            }
            x += 6;
        }
    }
};

int text_width(const std::string& s) { return static_cast<int>(s.size()) * 6; }

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v == 0.0 ? 0.0 : v);  // normalize -0
    return buf;
}

struct Ticks {
    double lo, hi;  // padded data range
    std::vector<double> at;
};

/// 1/2/5 ladder covering [lo, hi] with about `target` ticks.
Ticks nice_ticks(double lo, double hi, int target) {
    if (lo == hi) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        lo -= pad;
        hi += pad;
    }
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    }
    Ticks t;
    t.lo = lo;
    t.hi = hi;
    const double first = std::ceil(lo / step) * step;
    for (double v = first; v <= hi + step * 1e-9; v += step) {
        t.at.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    }
    return t;
}

}  // namespace

void render_chart(const std::vector<Series>& series, const ChartOptions& opt,
                  const std::filesystem::path& path) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    std::size_t points = 0;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) {
            throw ConfigError("render_chart: series \"" + s.label + "\" has " +
                              std::to_string(s.x.size()) + " x values for " +
                              std::to_string(s.y.size()) + " y values");
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
            ++points;
        }
    }
    if (points == 0) throw ConfigError("render_chart: no data points");

    const Ticks tx = nice_ticks(xmin, xmax, 6);
    const Ticks ty = nice_ticks(ymin, ymax, 5);

    Canvas cv(opt.width, opt.height);
    const int left = 64, right = 16, top = 34, bottom = 40;
    const int px0 = left, px1 = opt.width - right;
    const int py0 = top, py1 = opt.height - bottom;
    const auto sx = [&](double v) {
        return px0 + static_cast<int>(std::lround((v - tx.lo) / (tx.hi - tx.lo) * (px1 - px0)));
    };
    const auto sy = [&](double v) {
        return py1 - static_cast<int>(std::lround((v - ty.lo) / (ty.hi - ty.lo) * (py1 - py0)));
    };

    for (double v : tx.at) cv.line(sx(v), py0, sx(v), py1, kGrid);
    for (double v : ty.at) cv.line(px0, sy(v), px1, sy(v), kGrid);
    cv.line(px0, py0, px0, py1, kAxis);
    cv.line(px0, py1, px1, py1, kAxis);
    for (double v : tx.at) {
        cv.line(sx(v), py1, sx(v), py1 + 3, kAxis);
        const std::string lab = fmt_tick(v);
        cv.text(sx(v) - text_width(lab) / 2, py1 + 6, lab, kText);
    }
    for (double v : ty.at) {
        cv.line(px0 - 3, sy(v), px0, sy(v), kAxis);
        const std::string lab = fmt_tick(v);
        cv.text(px0 - 5 - text_width(lab), sy(v) - 3, lab, kText);
    }

    cv.text(px0, 4, opt.title, kText);
    cv.text((px0 + px1 - text_width(opt.x_label)) / 2, opt.height - 12, opt.x_label, kText);
    cv.text(2, py0 - 12, opt.y_label, kText);

    // Legend: one swatch+label per series, flowing right from the title row.
    int lx = px0;
    const int ly = 16;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const Rgb c = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
        cv.fill({lx, ly + 2, lx + 10, ly + 5}, c);
        cv.text(lx + 13, ly - 1, series[si].label, kText);
        lx += 13 + text_width(series[si].label) + 12;
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const Rgb c = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
        if (s.x.size() == 1) {
            cv.fill({sx(s.x[0]) - 1, sy(s.y[0]) - 1, sx(s.x[0]) + 2, sy(s.y[0]) + 2}, c);
            continue;
        }
        for (std::size_t i = 1; i < s.x.size(); ++i) {
            cv.fat_line(sx(s.x[i - 1]), sy(s.y[i - 1]), sx(s.x[i]), sy(s.y[i]), c);
        }
    }

    write_ppm(path, opt.width, opt.height, cv.px);
}

}  // namespace ctt
