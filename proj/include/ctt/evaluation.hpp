#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctt/dataset.hpp"
#include "ctt/model.hpp"
#include "ctt/tensor.hpp"

namespace ctt {

/// Rows are ground truth, columns prediction; IGNORE pixels never counted.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<long long> counts;  // row-major C x C

    explicit ConfusionMatrix(int num_classes_)
        : num_classes(num_classes_),
          counts(static_cast<std::size_t>(num_classes_) * num_classes_, 0) {}

    long long& at(int gt, int pred) {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    long long at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    long long total() const;
};

void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt);

struct MiouResult {
    std::vector<double> per_class;  // NaN for classes with zero denominator
    double mean = 0.0;              // over classes with a defined IoU
};

/// IoU_c = TP / (TP + FP + FN); zero-denominator classes are excluded from
/// the mean. Throws StateError when the matrix is empty.
MiouResult miou(const ConfusionMatrix& cm);

/// Tabular text: one line per class (index, IoU or "n/a", gt pixel count),
/// then the mean and total valid pixels.
std::string miou_report(const ConfusionMatrix& cm);

/// Fraction of non-IGNORE gt pixels where pseudo = gt; 0 when none valid.
double pseudo_label_quality(const LabelMap& pseudo, const LabelMap& gt);

/// Full-resolution prediction: bilinear prob upsampling then argmax (ties
/// toward the lowest class). With several models, probabilities are averaged
/// before the argmax (eval-time ensemble).
LabelMap predict_full_res(const Network& net, const std::vector<const ModelParams*>& models,
                          const Tensor& images);

/// Confusion matrix of `models` over `samples` at full resolution.
ConfusionMatrix evaluate_model(const Network& net, const std::vector<const ModelParams*>& models,
                               const std::vector<Sample>& samples);

/// Writes a feature dump for external projection (t-SNE and friends): a
/// header line, then one row per feature with its class tag, origin tag
/// (labeled/unlabeled) and d values. At most `per_class_cap` rows per
/// (class, origin); class tags come from downsampled ground truth for
/// labeled samples and from the model's own prediction for unlabeled ones.
/// Deterministic: samples and pixels are scanned in order.
void export_features(const Network& net, const ModelParams& params,
                     const std::vector<const Sample*>& labeled,
                     const std::vector<const Sample*>& unlabeled, int per_class_cap,
                     const std::filesystem::path& out_path);

}  // namespace ctt
