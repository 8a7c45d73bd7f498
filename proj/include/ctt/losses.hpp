#pragma once

#include <cstdint>
#include <vector>

#include "ctt/memory_bank.hpp"
#include "ctt/model.hpp"
#include "ctt/tensor.hpp"

namespace ctt {

struct LossWeights {
    double sup = 1.0;
    double ct = 1.0;
    double hc = 0.1;
    double lc = 0.1;
};

struct ContrastConfig {
    double temperature = 0.5;  // tau, > 0
    double phi = 0.75;         // confidence threshold, in [0,1]
};

/// {0,1} map at feature resolution, (N, h, w).
struct BinaryMask {
    std::vector<int> dims;
    std::vector<std::uint8_t> v;

    BinaryMask() = default;
    BinaryMask(int n, int h, int w) : dims{n, h, w}, v(static_cast<std::size_t>(n) * h * w, 0) {}
    std::uint8_t at(int n, int h, int w) const {
        return v[(static_cast<std::size_t>(n) * dims[1] + h) * dims[2] + w];
    }
};

/// Nearest-neighbor downsampling by `stride`, sampling each cell's center.
/// Integrality (and IGNORE) preserved exactly.
LabelMap downsample_labels(const LabelMap& labels, int stride);

/// Mean over non-IGNORE pixels of -log P[label], probs clamped at 1e-12.
/// Returns 0 when no pixel is valid.
double pixel_cross_entropy(const Tensor& probs, const LabelMap& labels);

/// Same value as pixel_cross_entropy; also accumulates
/// scale * d(loss)/d(logits) = scale * (P - Y) / |valid| into dlogits.
double softmax_ce_loss_grad(const Tensor& probs, const LabelMap& labels, double scale,
                            Tensor& dlogits);

/// Sum over students of pixel_cross_entropy against the shared ground truth.
double supervised_loss(const std::vector<const Tensor*>& student_probs, const LabelMap& labels);

/// Gradient-free one-hot argmax of the teacher (ties toward lowest index).
LabelMap make_pseudo_labels(const ForwardOutput& teacher_out);

/// Two-pair form of Eq. 5: H(P_A, Y_B) + H(P_B, Y_A). The n-pair
/// generalization is composed in the trainer from softmax_ce_loss_grad.
double cross_teacher_loss(const Tensor& probs_a, const Tensor& probs_b, const LabelMap& pseudo_b,
                          const LabelMap& pseudo_a);

/// 1 where confidence strictly exceeds phi.
BinaryMask hc_mask(const Tensor& confidence, double phi);

/// (1 - m_a) * [conf_a < conf_b], strict inequality.
BinaryMask lc_mask(const BinaryMask& m_a, const Tensor& conf_a, const Tensor& conf_b);

struct ContrastiveResult {
    double loss = 0.0;
    int active_classes = 0;      // classes contributing >= 1 query
    std::size_t query_count = 0;
};

/// InfoNCE against the network's own bank: queries are masked-in pixels
/// grouped by their class assignment, positives the class queue, negatives
/// the other queues. Per class, the loss averages over (query, positive)
/// pairs; the outer average runs over classes with at least one query.
/// Accumulates scale * d(loss)/d(features) into *dfeatures when non-null.
/// Queries are L2-normalized internally (gradients account for it).
/// Throws StateError if the bank is not full.
ContrastiveResult hc_loss(const Tensor& features, const LabelMap& assignments,
                          const BinaryMask& mask, const MemoryBank& bank, double temperature,
                          double scale, Tensor* dfeatures);

/// InfoNCE where the positive is the peer network's feature at the same
/// pixel (detached) and negatives come from both banks. Gradients flow only
/// into features_a. Throws StateError unless both banks are full.
ContrastiveResult lc_loss(const Tensor& features_a, const Tensor& features_b,
                          const LabelMap& assignments_a, const BinaryMask& mask,
                          const MemoryBank& bank_a, const MemoryBank& bank_b, double temperature,
                          double scale, Tensor* dfeatures_a);

struct LossComponents {
    double sup = 0.0;
    double ct = 0.0;
    double hc = 0.0;
    double lc = 0.0;
};

/// Eq. 10 with the bank gate: contrastive terms contribute only once the
/// bank is full. Negative weights are rejected.
double total_loss(const LossComponents& components, const LossWeights& weights, bool bank_full);

}  // namespace ctt
