#include "ctt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ctt/common.hpp"
#include "ctt/image_io.hpp"

namespace ctt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Base colors: background plus disk / rectangle / triangle classes. The
// foreground colors deliberately sit close enough that per-instance jitter
// makes color alone an unreliable cue.
constexpr std::array<std::array<double, 3>, 4> kBaseColors = {{
    {0.36, 0.42, 0.48},
    {0.78, 0.32, 0.30},
    {0.34, 0.70, 0.38},
    {0.76, 0.66, 0.30},
}};

struct ShapeParams {
    int cls = 1;
    // disk: cx, cy, r. rect: cx, cy, rx, ry. triangle: cx, cy, r, angle.
    double a = 0, b = 0, c = 0, d = 0;
    std::array<double, 3> color{};
};

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

bool point_in_triangle(double px, double py, const std::array<double, 2>& v0,
                       const std::array<double, 2>& v1, const std::array<double, 2>& v2) {
    auto side = [](double ax, double ay, double bx, double by, double cx, double cy) {
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    };
    const double d0 = side(v0[0], v0[1], v1[0], v1[1], px, py);
    const double d1 = side(v1[0], v1[1], v2[0], v2[1], px, py);
    const double d2 = side(v2[0], v2[1], v0[0], v0[1], px, py);
    const bool has_neg = (d0 < 0) || (d1 < 0) || (d2 < 0);
    const bool has_pos = (d0 > 0) || (d1 > 0) || (d2 > 0);
    return !(has_neg && has_pos);
}

}  // namespace

void validate(const SceneSpec& spec) {
    if (spec.num_classes < 2) throw ConfigError("SceneSpec.num_classes must be >= 2");
    if (spec.num_classes > 4) {
        throw ConfigError("SceneSpec.num_classes must be <= 4 (one shape type per foreground class)");
    }
    if (spec.height < 32) throw ConfigError("SceneSpec.height must be >= 32");
    if (spec.width < 32) throw ConfigError("SceneSpec.width must be >= 32");
    if (spec.shapes_min < 1) throw ConfigError("SceneSpec.shapes_min must be >= 1");
    if (spec.shapes_max < spec.shapes_min) throw ConfigError("SceneSpec.shapes_max must be >= shapes_min");
    if (spec.color_jitter < 0.0 || spec.color_jitter > 1.0) {
        throw ConfigError("SceneSpec.color_jitter must be in [0,1]");
    }
    if (spec.noise_std < 0.0 || spec.noise_std > 1.0) {
        throw ConfigError("SceneSpec.noise_std must be in [0,1]");
    }
}

std::array<double, 3> background_color() { return kBaseColors[0]; }

Sample generate_sample(const SceneSpec& spec, std::uint64_t index) {
    validate(spec);
    Rng rng = Rng::for_index(spec.seed, index);
    const int H = spec.height, W = spec.width;

    Sample s;
    s.h = H;
    s.w = W;
    s.image = Tensor{1, 3, H, W};
    s.label.assign(static_cast<std::size_t>(H) * W, 0);

    // Background: jittered base color plus two low-frequency waves.
    std::array<double, 3> bg = kBaseColors[0];
    for (auto& ch : bg) ch = clamp01(ch + 0.5 * spec.color_jitter * rng.next_double(-1.0, 1.0));
    struct Wave {
        double kx, ky, phase, amp;
    };
    std::array<Wave, 2> waves{};
    for (auto& wv : waves) {
        const double angle = rng.next_double(0.0, 2.0 * kPi);
        const double freq = rng.next_double(1.5, 4.0);  // cycles across the image
        wv.kx = std::cos(angle) * 2.0 * kPi * freq / W;
        wv.ky = std::sin(angle) * 2.0 * kPi * freq / H;
        wv.phase = rng.next_double(0.0, 2.0 * kPi);
        wv.amp = 0.05;
    }
    const double brightness = 1.0 + 0.3 * spec.color_jitter * rng.next_double(-1.0, 1.0);

    // Draw all shape parameters before rasterizing.
    const int num_shapes = static_cast<int>(rng.next_int(spec.shapes_min, spec.shapes_max));
    const double dim = std::min(H, W);
    std::vector<ShapeParams> shapes(static_cast<std::size_t>(num_shapes));
    for (auto& sh : shapes) {
        sh.cls = static_cast<int>(rng.next_int(1, spec.num_classes - 1));
        if (sh.cls == 1) {  // disk
            sh.c = rng.next_double(0.07, 0.16) * dim;
            sh.a = rng.next_double(sh.c, W - 1 - sh.c);
            sh.b = rng.next_double(sh.c, H - 1 - sh.c);
        } else if (sh.cls == 2) {  // axis-aligned rectangle
            sh.c = rng.next_double(0.06, 0.15) * dim;
            sh.d = rng.next_double(0.06, 0.15) * dim;
            sh.a = rng.next_double(sh.c, W - 1 - sh.c);
            sh.b = rng.next_double(sh.d, H - 1 - sh.d);
        } else {  // triangle
            sh.c = rng.next_double(0.09, 0.18) * dim;
            sh.a = rng.next_double(sh.c, W - 1 - sh.c);
            sh.b = rng.next_double(sh.c, H - 1 - sh.c);
            sh.d = rng.next_double(0.0, 2.0 * kPi);
        }
        for (int ch = 0; ch < 3; ++ch) {
            sh.color[ch] = clamp01(kBaseColors[static_cast<std::size_t>(sh.cls)][ch] +
                                   spec.color_jitter * rng.next_double(-1.0, 1.0));
        }
    }

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double tex = 0.0;
            for (const auto& wv : waves) tex += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
            for (int ch = 0; ch < 3; ++ch) s.image.at4(0, ch, y, x) = clamp01(bg[ch] + tex);
        }
    }

    for (const auto& sh : shapes) {
        int x0 = 0, x1 = W - 1, y0 = 0, y1 = H - 1;
        if (sh.cls == 1) {
            x0 = static_cast<int>(std::floor(sh.a - sh.c));
            x1 = static_cast<int>(std::ceil(sh.a + sh.c));
            y0 = static_cast<int>(std::floor(sh.b - sh.c));
            y1 = static_cast<int>(std::ceil(sh.b + sh.c));
        } else if (sh.cls == 2) {
            x0 = static_cast<int>(std::floor(sh.a - sh.c));
            x1 = static_cast<int>(std::ceil(sh.a + sh.c));
            y0 = static_cast<int>(std::floor(sh.b - sh.d));
            y1 = static_cast<int>(std::ceil(sh.b + sh.d));
        } else {
            x0 = static_cast<int>(std::floor(sh.a - sh.c));
            x1 = static_cast<int>(std::ceil(sh.a + sh.c));
            y0 = static_cast<int>(std::floor(sh.b - sh.c));
            y1 = static_cast<int>(std::ceil(sh.b + sh.c));
        }
        x0 = std::max(0, x0);
        y0 = std::max(0, y0);
        x1 = std::min(W - 1, x1);
        y1 = std::min(H - 1, y1);

        std::array<std::array<double, 2>, 3> tri{};
        if (sh.cls == 3) {
            for (int i = 0; i < 3; ++i) {
                const double ang = sh.d + 2.0 * kPi * i / 3.0;
                tri[static_cast<std::size_t>(i)] = {sh.a + sh.c * std::cos(ang), sh.b + sh.c * std::sin(ang)};
            }
        }

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                bool inside = false;
                if (sh.cls == 1) {
                    const double dx = x - sh.a, dy = y - sh.b;
                    inside = dx * dx + dy * dy <= sh.c * sh.c;
                } else if (sh.cls == 2) {
                    inside = std::abs(x - sh.a) <= sh.c && std::abs(y - sh.b) <= sh.d;
                } else {
                    inside = point_in_triangle(x, y, tri[0], tri[1], tri[2]);
                }
                if (!inside) continue;
                s.label_at(y, x) = sh.cls;
                for (int ch = 0; ch < 3; ++ch) s.image.at4(0, ch, y, x) = sh.color[ch];
            }
        }
    }

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                double v = s.image.at4(0, ch, y, x) * brightness;
                if (spec.noise_std > 0.0) v += spec.noise_std * rng.next_normal();
                s.image.at4(0, ch, y, x) = clamp01(v);
            }
        }
    }
    return s;
}

std::vector<Sample> generate_dataset(const SceneSpec& spec, int count) {
    validate(spec);
    if (count < 1) throw ConfigError("generate_dataset: count must be >= 1");
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        samples.push_back(generate_sample(spec, static_cast<std::uint64_t>(i)));
    }
    return samples;
}

SplitResult split_labeled(std::size_t dataset_size, const SplitSpec& split) {
    if (dataset_size == 0) throw ConfigError("split_labeled: dataset is empty");
    if (split.labeled_fraction <= 0.0 || split.labeled_fraction > 1.0) {
        throw ConfigError("SplitSpec.labeled_fraction must be in (0,1]");
    }
    const auto n = static_cast<long long>(dataset_size);
    long long num_labeled = std::llround(split.labeled_fraction * static_cast<double>(n));
    num_labeled = std::max(1LL, std::min(num_labeled, n));

    Rng rng(split.seed);
    std::vector<int> order(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);

    SplitResult result;
    result.labeled.assign(order.begin(), order.begin() + num_labeled);
    result.unlabeled.assign(order.begin() + num_labeled, order.end());
    std::sort(result.labeled.begin(), result.labeled.end());
    std::sort(result.unlabeled.begin(), result.unlabeled.end());
    return result;
}

namespace {

Sample flip_horizontal(const Sample& in) {
    Sample out = in;
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            out.label_at(y, x) = in.label_at(y, in.w - 1 - x);
            for (int ch = 0; ch < 3; ++ch) out.image.at4(0, ch, y, x) = in.image.at4(0, ch, y, in.w - 1 - x);
        }
    }
    return out;
}

// 90 degrees clockwise; output is (w_in, h_in).
Sample rotate90_cw(const Sample& in) {
    Sample out;
    out.h = in.w;
    out.w = in.h;
    out.image = Tensor{1, 3, out.h, out.w};
    out.label.assign(static_cast<std::size_t>(out.h) * out.w, 0);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            const int sy = in.h - 1 - x;
            const int sx = y;
            out.label_at(y, x) = in.label_at(sy, sx);
            for (int ch = 0; ch < 3; ++ch) out.image.at4(0, ch, y, x) = in.image.at4(0, ch, sy, sx);
        }
    }
    return out;
}

Sample translate(const Sample& in, int dx, int dy) {
    Sample out = in;
    const auto fill = background_color();
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            const int sy = y - dy;
            const int sx = x - dx;
            if (sy >= 0 && sy < in.h && sx >= 0 && sx < in.w) {
                out.label_at(y, x) = in.label_at(sy, sx);
                for (int ch = 0; ch < 3; ++ch) out.image.at4(0, ch, y, x) = in.image.at4(0, ch, sy, sx);
            } else {
                out.label_at(y, x) = kIgnoreLabel;
                for (int ch = 0; ch < 3; ++ch) out.image.at4(0, ch, y, x) = fill[static_cast<std::size_t>(ch)];
            }
        }
    }
    return out;
}

Sample crop(const Sample& in, int y0, int x0, int ch_, int cw_) {
    Sample out;
    out.h = ch_;
    out.w = cw_;
    out.image = Tensor{1, 3, ch_, cw_};
    out.label.assign(static_cast<std::size_t>(ch_) * cw_, 0);
    for (int y = 0; y < ch_; ++y) {
        for (int x = 0; x < cw_; ++x) {
            out.label_at(y, x) = in.label_at(y0 + y, x0 + x);
            for (int c = 0; c < 3; ++c) out.image.at4(0, c, y, x) = in.image.at4(0, c, y0 + y, x0 + x);
        }
    }
    return out;
}

}  // namespace

Sample augment(const Sample& sample, const AugmentConfig& cfg, Rng& rng) {
    if (cfg.crop_h < 1 || cfg.crop_w < 1) throw ConfigError("AugmentConfig.crop size must be >= 1");
    Sample cur = sample;

    if (rng.next_bool(cfg.p_flip)) cur = flip_horizontal(cur);

    if (rng.next_bool(cfg.p_rotate)) {
        const int quarter_turns = static_cast<int>(rng.next_int(1, 3));
        for (int i = 0; i < quarter_turns; ++i) cur = rotate90_cw(cur);
    }

    if (rng.next_bool(cfg.p_translate)) {
        const int max_dx = static_cast<int>(std::floor(cfg.max_translate_frac * cur.w));
        const int max_dy = static_cast<int>(std::floor(cfg.max_translate_frac * cur.h));
        const int dx = static_cast<int>(rng.next_int(-max_dx, max_dx));
        const int dy = static_cast<int>(rng.next_int(-max_dy, max_dy));
        if (dx != 0 || dy != 0) cur = translate(cur, dx, dy);
    }

    if (cfg.crop_h > cur.h || cfg.crop_w > cur.w) {
        throw ConfigError("AugmentConfig.crop size exceeds image size after augmentation");
    }
    const int y0 = static_cast<int>(rng.next_int(0, cur.h - cfg.crop_h));
    const int x0 = static_cast<int>(rng.next_int(0, cur.w - cfg.crop_w));
    return crop(cur, y0, x0, cfg.crop_h, cfg.crop_w);
}

// --- disk I/O ---

namespace {

std::string index_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", i);
    return buf;
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string t) {
            const auto b = t.find_first_not_of(" \t");
            const auto e = t.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace

std::vector<std::uint8_t> quantize_image(const Sample& s) {
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(s.h) * s.w * 3);
    std::size_t p = 0;
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                rgb[p++] = static_cast<std::uint8_t>(std::lround(clamp01(s.image.at4(0, ch, y, x)) * 255.0));
            }
        }
    }
    return rgb;
}

void write_dataset(const std::filesystem::path& dir, const SceneSpec& spec, int count) {
    validate(spec);
    if (count < 1) throw ConfigError("write_dataset: count must be >= 1");
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "labels");

    {
        std::ofstream m(dir / "manifest");
        if (!m) throw DataError("cannot write manifest in " + dir.string());
        m << "format_version = 1\n"
          << "kind = ctt-dataset\n"
          << "count = " << count << "\n"
          << "height = " << spec.height << "\n"
          << "width = " << spec.width << "\n"
          << "num_classes = " << spec.num_classes << "\n"
          << "shapes_min = " << spec.shapes_min << "\n"
          << "shapes_max = " << spec.shapes_max << "\n"
          << "color_jitter = " << spec.color_jitter << "\n"
          << "noise_std = " << spec.noise_std << "\n"
          << "seed = " << spec.seed << "\n"
          << "image_format = ppm\n"
          << "label_format = pgm\n";
    }

    for (int i = 0; i < count; ++i) {
        const Sample s = generate_sample(spec, static_cast<std::uint64_t>(i));
        write_ppm(dir / "images" / (index_name(i) + ".ppm"), s.w, s.h, quantize_image(s));
        std::vector<std::uint8_t> lab(s.label.size());
        for (std::size_t p = 0; p < lab.size(); ++p) lab[p] = static_cast<std::uint8_t>(s.label[p]);
        write_pgm(dir / "labels" / (index_name(i) + ".pgm"), s.w, s.h, lab);
    }
}

DatasetOnDisk read_dataset(const std::filesystem::path& dir) {
    const auto kv = read_kv_file(dir / "manifest");
    auto need = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("dataset manifest missing key: " + std::string(key));
        return it->second;
    };
    if (need("kind") != "ctt-dataset") throw DataError("not a dataset directory: " + dir.string());
    if (need("format_version") != "1") throw DataError("unsupported dataset format_version");

    DatasetOnDisk ds;
    ds.count = std::stoi(need("count"));
    ds.spec.height = std::stoi(need("height"));
    ds.spec.width = std::stoi(need("width"));
    ds.spec.num_classes = std::stoi(need("num_classes"));
    ds.spec.shapes_min = std::stoi(need("shapes_min"));
    ds.spec.shapes_max = std::stoi(need("shapes_max"));
    ds.spec.color_jitter = std::stod(need("color_jitter"));
    ds.spec.noise_std = std::stod(need("noise_std"));
    ds.spec.seed = std::stoull(need("seed"));

    ds.samples.reserve(static_cast<std::size_t>(ds.count));
    for (int i = 0; i < ds.count; ++i) {
        const ImageU8 img = read_ppm(dir / "images" / (index_name(i) + ".ppm"));
        const ImageU8 lab = read_pgm(dir / "labels" / (index_name(i) + ".pgm"));
        if (img.width != ds.spec.width || img.height != ds.spec.height ||
            lab.width != img.width || lab.height != img.height) {
            throw DataError("dataset sample " + index_name(i) + " has inconsistent dimensions");
        }
        Sample s;
        s.h = img.height;
        s.w = img.width;
        s.image = Tensor{1, 3, s.h, s.w};
        s.label.resize(static_cast<std::size_t>(s.h) * s.w);
        std::size_t p = 0;
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                for (int ch = 0; ch < 3; ++ch) {
                    s.image.at4(0, ch, y, x) = static_cast<double>(img.pixels[p * 3 + ch]) / 255.0;
                }
                const int lv = lab.pixels[p];
                if (lv != kIgnoreLabel && lv >= ds.spec.num_classes) {
                    throw DataError("dataset sample " + index_name(i) + " has label value out of range");
                }
                s.label[p] = lv;
                ++p;
            }
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_split_file(const std::filesystem::path& path, const std::vector<int>& indices) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write split file: " + path.string());
    for (int i : indices) out << i << "\n";
}

std::vector<int> read_split_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split file: " + path.string());
    std::vector<int> indices;
    int v = 0;
    while (in >> v) indices.push_back(v);
    return indices;
}

}  // namespace ctt
