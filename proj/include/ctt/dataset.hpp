#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ctt/rng.hpp"
#include "ctt/tensor.hpp"

namespace ctt {

/// Procedural scene description. Identical specs generate byte-identical
/// datasets; every sample's randomness is a pure function of (seed, index).
struct SceneSpec {
    int height = 96;
    int width = 96;
    int num_classes = 4;   // background (0) plus up to three shape classes
    int shapes_min = 2;
    int shapes_max = 5;
    double color_jitter = 0.25;  // in [0,1]
    double noise_std = 0.05;     // in [0,1]
    std::uint64_t seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate(const SceneSpec& spec);

/// One image with its per-pixel label map. Image is NCHW (1, 3, h, w) in
/// [0,1]; labels are class indices or kIgnoreLabel.
struct Sample {
    int h = 0;
    int w = 0;
    Tensor image;            // (1, 3, h, w)
    std::vector<int> label;  // h * w, row-major

    int label_at(int y, int x) const { return label[static_cast<std::size_t>(y) * w + x]; }
    int& label_at(int y, int x) { return label[static_cast<std::size_t>(y) * w + x]; }
};

/// Fill color used for pixels vacated by augmentation shifts (the untextured
/// background base color).
std::array<double, 3> background_color();

Sample generate_sample(const SceneSpec& spec, std::uint64_t index);
std::vector<Sample> generate_dataset(const SceneSpec& spec, int count);

struct SplitSpec {
    double labeled_fraction = 0.05;  // in (0, 1]
    std::uint64_t seed = 0;
};

struct SplitResult {
    std::vector<int> labeled;    // ascending sample indices
    std::vector<int> unlabeled;  // ascending sample indices
};

/// |labeled| = max(1, round(labeled_fraction * n)); seeded uniform draw
/// without replacement.
SplitResult split_labeled(std::size_t dataset_size, const SplitSpec& split);

struct AugmentConfig {
    int crop_h = 64;
    int crop_w = 64;
    double p_flip = 0.5;
    double p_rotate = 0.5;
    double p_translate = 0.5;
    double max_translate_frac = 0.125;
};

/// Random horizontal flip, rotation by a multiple of 90 degrees, integer
/// translation (vacated pixels: background color in the image, kIgnoreLabel
/// in the label), then a random crop. Image and label move together.
Sample augment(const Sample& sample, const AugmentConfig& cfg, Rng& rng);

// --- on-disk dataset layout ---
// dir/manifest            key = value lines (SceneSpec, count, format version)
// dir/images/NNNNNN.ppm   8-bit RGB
// dir/labels/NNNNNN.pgm   8-bit class indices

void write_dataset(const std::filesystem::path& dir, const SceneSpec& spec, int count);

struct DatasetOnDisk {
    SceneSpec spec;
    int count = 0;
    std::vector<Sample> samples;
};

DatasetOnDisk read_dataset(const std::filesystem::path& dir);

/// Newline-delimited sample indices.
void write_split_file(const std::filesystem::path& path, const std::vector<int>& indices);
std::vector<int> read_split_file(const std::filesystem::path& path);

/// 8-bit quantization used when writing samples to disk.
std::vector<std::uint8_t> quantize_image(const Sample& s);

}  // namespace ctt
