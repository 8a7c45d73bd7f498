#include "ctt/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctt/common.hpp"

namespace ctt {

MemoryBank new_bank(int num_classes, int capacity, int dim) {
    if (num_classes < 1) throw ConfigError("new_bank: num_classes must be >= 1");
    if (capacity < 1) throw ConfigError("new_bank: capacity must be >= 1");
    if (dim < 1) throw ConfigError("new_bank: dim must be >= 1");
    MemoryBank bank;
    bank.num_classes = num_classes;
    bank.capacity = capacity;
    bank.dim = dim;
    bank.queues.resize(static_cast<std::size_t>(num_classes));
    return bank;
}

std::vector<std::vector<CandidateFeature>> select_candidates(const ForwardOutput& teacher_out,
                                                             const LabelMap& gt_labels_ds, int k,
                                                             SelectionMode mode, Rng& rng) {
    if (k < 1) throw ConfigError("select_candidates: k must be >= 1");
    const int n = teacher_out.features.dim(0);
    const int d = teacher_out.features.dim(1);
    const int h = teacher_out.features.dim(2);
    const int w = teacher_out.features.dim(3);
    const int num_classes = teacher_out.probs.dim(1);
    if (gt_labels_ds.dims != std::vector<int>{n, h, w}) {
        throw ShapeError("select_candidates: labels not aligned to feature grid");
    }

    // Criterion 2: teacher prediction agrees with ground truth.
    std::vector<std::vector<std::size_t>> agree(static_cast<std::size_t>(num_classes));
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t idx = static_cast<std::size_t>(i) * plane + p;
            const int gt = gt_labels_ds.v[idx];
            if (gt == kIgnoreLabel) continue;
            if (gt < 0 || gt >= num_classes) throw ShapeError("select_candidates: label out of range");
            if (teacher_out.hard_labels.v[idx] == gt) agree[static_cast<std::size_t>(gt)].push_back(idx);
        }
    }

    auto extract = [&](std::size_t idx, int cls) {
        CandidateFeature cf;
        cf.cls = cls;
        cf.confidence = teacher_out.confidence[idx];
        cf.vec.resize(static_cast<std::size_t>(d));
        const std::size_t img = idx / plane, pix = idx % plane;
        const double* base = teacher_out.features.data() + img * static_cast<std::size_t>(d) * plane + pix;
        double norm2 = 0.0;
        for (int c = 0; c < d; ++c) {
            const double v = base[static_cast<std::size_t>(c) * plane];
            cf.vec[static_cast<std::size_t>(c)] = v;
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12) return CandidateFeature{};  // degenerate, signalled by empty vec
        for (auto& v : cf.vec) v /= norm;
        return cf;
    };

    std::vector<std::vector<CandidateFeature>> out(static_cast<std::size_t>(num_classes));
    for (int cls = 0; cls < num_classes; ++cls) {
        auto& pixels = agree[static_cast<std::size_t>(cls)];
        std::vector<std::size_t> chosen;
        if (static_cast<int>(pixels.size()) <= k) {
            chosen.assign(pixels.begin(), pixels.end());
        } else if (mode == SelectionMode::kRandom) {
            for (std::size_t pos : rng.sample_without_replacement(pixels.size(), static_cast<std::size_t>(k))) {
                chosen.push_back(pixels[pos]);
            }
        } else {
            // Top-k by confidence; ties resolved by pixel order for determinism.
            std::vector<std::size_t> order(pixels.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return teacher_out.confidence[pixels[a]] > teacher_out.confidence[pixels[b]];
            });
            for (int i = 0; i < k; ++i) chosen.push_back(pixels[order[static_cast<std::size_t>(i)]]);
        }
        for (std::size_t idx : chosen) {
            CandidateFeature cf = extract(idx, cls);
            if (!cf.vec.empty()) out[static_cast<std::size_t>(cls)].push_back(std::move(cf));
        }
    }
    return out;
}

int compute_k(long long num_labeled, int capacity) {
    if (num_labeled < 1) throw ConfigError("compute_k: num_labeled must be >= 1");
    if (capacity < 1) throw ConfigError("compute_k: capacity must be >= 1");
    return static_cast<int>(std::max<long long>(1, num_labeled / capacity));
}

void push(MemoryBank& bank, int cls, const std::vector<std::vector<double>>& features) {
    if (cls < 0 || cls >= bank.num_classes) throw ConfigError("push: class out of range");
    auto& q = bank.queues[static_cast<std::size_t>(cls)];
    for (const auto& f : features) {
        if (static_cast<int>(f.size()) != bank.dim) {
            throw ShapeError("push: feature dim " + std::to_string(f.size()) + " != bank dim " +
                             std::to_string(bank.dim));
        }
        q.push_back(f);
        if (static_cast<int>(q.size()) > bank.capacity) q.pop_front();
    }
}

bool is_full(const MemoryBank& bank) {
    for (const auto& q : bank.queues) {
        if (static_cast<int>(q.size()) != bank.capacity) return false;
    }
    return true;
}

namespace {

Tensor rows_from(const std::vector<const std::deque<std::vector<double>>*>& queues, int dim) {
    std::size_t total = 0;
    for (const auto* q : queues) total += q->size();
    Tensor out{static_cast<int>(total), dim};
    std::size_t r = 0;
    for (const auto* q : queues) {
        for (const auto& v : *q) {
            std::copy(v.begin(), v.end(), out.data() + r * static_cast<std::size_t>(dim));
            ++r;
        }
    }
    return out;
}

}  // namespace

Tensor negatives(const MemoryBank& bank, int cls) {
    if (cls < 0 || cls >= bank.num_classes) throw ConfigError("negatives: class out of range");
    std::vector<const std::deque<std::vector<double>>*> qs;
    for (int c = 0; c < bank.num_classes; ++c) {
        if (c != cls) qs.push_back(&bank.queues[static_cast<std::size_t>(c)]);
    }
    return rows_from(qs, bank.dim);
}

Tensor positives(const MemoryBank& bank, int cls) {
    if (cls < 0 || cls >= bank.num_classes) throw ConfigError("positives: class out of range");
    return rows_from({&bank.queues[static_cast<std::size_t>(cls)]}, bank.dim);
}

}  // namespace ctt
