#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctt/tensor.hpp"

namespace ctt {

/// Encoder-decoder geometry. The encoder downsamples one level below the
/// feature stride and the decoder fuses back up, so `widths` must hold
/// log2(stride) + 2 entries (stem, one per downsampling stage).
struct BackboneConfig {
    int feature_dim = 64;                    // d, >= 8
    int stride = 4;                          // s in {2, 4, 8}
    std::vector<int> widths = {12, 24, 36, 48};
    int num_classes = 4;                     // |C|, >= 2
    std::uint64_t init_seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate(const BackboneConfig& config);

struct ParamTensor {
    std::string name;
    Tensor value;
};

/// Ordered collection of named parameter tensors. Two ModelParams built from
/// the same BackboneConfig agree in names and shapes.
struct ModelParams {
    std::vector<ParamTensor> tensors;

    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;
    std::size_t scalar_count() const;
};

/// Same names/shapes as `like`, all values zero (gradient/momentum buffers).
ModelParams zeros_like(const ModelParams& like);

struct StudentTeacherPair {
    ModelParams student;
    ModelParams teacher;
    double ema_decay = 0.99;
};

/// teacher <- ema_decay * teacher + (1 - ema_decay) * student, elementwise.
/// Student untouched. Mismatched names or shapes indicate a corrupted pair
/// and throw StateError.
void ema_update(StudentTeacherPair& pair);

/// All maps live at feature resolution (H/s, W/s).
struct ForwardOutput {
    Tensor features;    // (N, d, h, w), pre-classifier, no activation
    Tensor logits;      // (N, |C|, h, w)
    Tensor probs;       // (N, |C|, h, w), softmax over the class axis
    Tensor confidence;  // (N, h, w), max class probability
    LabelMap hard_labels;  // argmax, ties broken toward the lowest class index
};

/// Post-activation maps kept by the training forward pass for backprop.
struct ForwardCache {
    Tensor input;
    std::vector<Tensor> stage_out;  // stem + each downsampling stage, post-relu
    Tensor concat;                  // upsampled deepest ++ skip, pre-fuse
    Tensor fuse_out;                // post-relu
    Tensor features;
};

/// Stateless layer geometry for one BackboneConfig. Parameters are passed in
/// explicitly so student and teacher share one Network.
class Network {
public:
    explicit Network(BackboneConfig config);

    const BackboneConfig& config() const { return config_; }

    /// Deterministic He initialization from config.init_seed (override the
    /// seed in the config to build distinct peers).
    ModelParams init_params() const;

    /// Inference pass. Image dims must be divisible by stride.
    ForwardOutput forward(const ModelParams& params, const Tensor& images) const;

    /// Training pass: same result, also fills `cache` for backward().
    ForwardOutput forward(const ModelParams& params, const Tensor& images, ForwardCache& cache) const;

    /// Accumulates d(loss)/d(param) into `grads` given upstream gradients on
    /// the logits and on the features (either may be empty for zero).
    void backward(const ModelParams& params, const ForwardCache& cache, const Tensor& dlogits,
                  const Tensor& dfeatures, ModelParams& grads) const;

private:
    BackboneConfig config_;
    int depth_ = 0;  // number of stride-2 stages = log2(stride) + 1
};

ModelParams init_model(const BackboneConfig& config);

/// Bilinear upsample of per-pixel probability maps to (out_h, out_w),
/// half-pixel aligned. Convexity preserves the sum-to-one invariant.
Tensor upsample_probs_bilinear(const Tensor& probs, int out_h, int out_w);

}  // namespace ctt
