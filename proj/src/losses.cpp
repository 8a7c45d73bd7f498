#include "ctt/losses.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ctt/common.hpp"

namespace ctt {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapRM = Eigen::Map<const MatRM>;

constexpr double kProbFloor = 1e-12;

void check_label_grid(const Tensor& probs, const LabelMap& labels, const char* what) {
    if (probs.dims().size() != 4) throw ShapeError(std::string(what) + ": probs must be rank 4");
    const std::vector<int> want{probs.dim(0), probs.dim(2), probs.dim(3)};
    if (labels.dims != want) {
        throw ShapeError(std::string(what) + ": labels not aligned to probability grid");
    }
}

}  // namespace

LabelMap downsample_labels(const LabelMap& labels, int stride) {
    if (stride < 1) throw ConfigError("downsample_labels: stride must be >= 1");
    const int n = labels.dims[0], h = labels.dims[1], w = labels.dims[2];
    if (h % stride != 0 || w % stride != 0) {
        throw ShapeError("downsample_labels: dims not divisible by stride");
    }
    LabelMap out(n, h / stride, w / stride);
    const int off = stride / 2;
    for (int i = 0; i < n; ++i) {
        for (int y = 0; y < h / stride; ++y) {
            for (int x = 0; x < w / stride; ++x) {
                out.at(i, y, x) = labels.at(i, y * stride + off, x * stride + off);
            }
        }
    }
    return out;
}

double pixel_cross_entropy(const Tensor& probs, const LabelMap& labels) {
    check_label_grid(probs, labels, "pixel_cross_entropy");
    const int n = probs.dim(0), C = probs.dim(1);
    const std::size_t plane = static_cast<std::size_t>(probs.dim(2)) * probs.dim(3);
    double loss = 0.0;
    std::size_t valid = 0;
    for (int i = 0; i < n; ++i) {
        const double* p = probs.data() + static_cast<std::size_t>(i) * C * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            const int lab = labels.v[static_cast<std::size_t>(i) * plane + px];
            if (lab == kIgnoreLabel) continue;
            if (lab < 0 || lab >= C) throw DataError("pixel_cross_entropy: label out of range");
            loss -= std::log(std::max(p[static_cast<std::size_t>(lab) * plane + px], kProbFloor));
            ++valid;
        }
    }
    return valid == 0 ? 0.0 : loss / static_cast<double>(valid);
}

double softmax_ce_loss_grad(const Tensor& probs, const LabelMap& labels, double scale,
                            Tensor& dlogits) {
    check_label_grid(probs, labels, "softmax_ce_loss_grad");
    check_same_shape(probs, dlogits, "softmax_ce_loss_grad dlogits");
    const int n = probs.dim(0), C = probs.dim(1);
    const std::size_t plane = static_cast<std::size_t>(probs.dim(2)) * probs.dim(3);

    std::size_t valid = 0;
    for (std::size_t i = 0; i < labels.v.size(); ++i) {
        if (labels.v[i] != kIgnoreLabel) ++valid;
    }
    if (valid == 0) return 0.0;
    const double g = scale / static_cast<double>(valid);

    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* p = probs.data() + static_cast<std::size_t>(i) * C * plane;
        double* d = dlogits.data() + static_cast<std::size_t>(i) * C * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            const int lab = labels.v[static_cast<std::size_t>(i) * plane + px];
            if (lab == kIgnoreLabel) continue;
            if (lab < 0 || lab >= C) throw DataError("softmax_ce_loss_grad: label out of range");
            loss -= std::log(std::max(p[static_cast<std::size_t>(lab) * plane + px], kProbFloor));
            for (int c = 0; c < C; ++c) {
                const double y = (c == lab) ? 1.0 : 0.0;
                d[static_cast<std::size_t>(c) * plane + px] +=
                    g * (p[static_cast<std::size_t>(c) * plane + px] - y);
            }
        }
    }
    return loss / static_cast<double>(valid);
}

double supervised_loss(const std::vector<const Tensor*>& student_probs, const LabelMap& labels) {
    double total = 0.0;
    for (const Tensor* p : student_probs) total += pixel_cross_entropy(*p, labels);
    return total;
}

LabelMap make_pseudo_labels(const ForwardOutput& teacher_out) { return teacher_out.hard_labels; }

double cross_teacher_loss(const Tensor& probs_a, const Tensor& probs_b, const LabelMap& pseudo_b,
                          const LabelMap& pseudo_a) {
    return pixel_cross_entropy(probs_a, pseudo_b) + pixel_cross_entropy(probs_b, pseudo_a);
}

BinaryMask hc_mask(const Tensor& confidence, double phi) {
    if (confidence.dims().size() != 3) throw ShapeError("hc_mask: confidence must be (N, h, w)");
    BinaryMask m(confidence.dim(0), confidence.dim(1), confidence.dim(2));
    for (std::size_t i = 0; i < confidence.numel(); ++i) m.v[i] = confidence[i] > phi ? 1 : 0;
    return m;
}

BinaryMask lc_mask(const BinaryMask& m_a, const Tensor& conf_a, const Tensor& conf_b) {
    if (conf_a.dims() != conf_b.dims()) throw ShapeError("lc_mask: confidence shape mismatch");
    if (m_a.dims != std::vector<int>{conf_a.dim(0), conf_a.dim(1), conf_a.dim(2)}) {
        throw ShapeError("lc_mask: mask shape mismatch");
    }
    BinaryMask m(conf_a.dim(0), conf_a.dim(1), conf_a.dim(2));
    for (std::size_t i = 0; i < conf_a.numel(); ++i) {
        m.v[i] = (m_a.v[i] == 0 && conf_a[i] < conf_b[i]) ? 1 : 0;
    }
    return m;
}

namespace {

struct Query {
    std::size_t flat;    // n * plane + pixel
    double inv_norm;     // 1 / ||z||
};

// Per-class lists of masked-in pixels with a usable (nonzero) feature.
// `plane` and `dim` describe the feature tensor geometry.
std::vector<std::vector<Query>> gather_queries(const Tensor& features, const LabelMap& assignments,
                                               const BinaryMask& mask, int num_classes,
                                               const char* what) {
    if (features.dims().size() != 4) throw ShapeError(std::string(what) + ": features must be rank 4");
    const int n = features.dim(0), d = features.dim(1);
    const std::size_t plane = static_cast<std::size_t>(features.dim(2)) * features.dim(3);
    const std::vector<int> grid{n, features.dim(2), features.dim(3)};
    if (assignments.dims != grid) throw ShapeError(std::string(what) + ": assignments misaligned");
    if (mask.dims != grid) throw ShapeError(std::string(what) + ": mask misaligned");

    std::vector<std::vector<Query>> groups(static_cast<std::size_t>(num_classes));
    for (int i = 0; i < n; ++i) {
        const double* base = features.data() + static_cast<std::size_t>(i) * d * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            const std::size_t idx = static_cast<std::size_t>(i) * plane + px;
            if (!mask.v[idx]) continue;
            const int cls = assignments.v[idx];
            if (cls == kIgnoreLabel) continue;
            if (cls < 0 || cls >= num_classes) {
                throw DataError(std::string(what) + ": class assignment out of range");
            }
            double norm2 = 0.0;
            for (int c = 0; c < d; ++c) {
                const double v = base[static_cast<std::size_t>(c) * plane + px];
                norm2 += v * v;
            }
            if (norm2 < 1e-24) continue;
            groups[static_cast<std::size_t>(cls)].push_back({idx, 1.0 / std::sqrt(norm2)});
        }
    }
    return groups;
}

MatRM load_queries(const Tensor& features, const std::vector<Query>& qs) {
    const int d = features.dim(1);
    const std::size_t plane = static_cast<std::size_t>(features.dim(2)) * features.dim(3);
    MatRM Q(static_cast<Eigen::Index>(qs.size()), d);
    for (std::size_t r = 0; r < qs.size(); ++r) {
        const std::size_t img = qs[r].flat / plane, px = qs[r].flat % plane;
        const double* base = features.data() + img * static_cast<std::size_t>(d) * plane + px;
        for (int c = 0; c < d; ++c) {
            Q(static_cast<Eigen::Index>(r), c) = base[static_cast<std::size_t>(c) * plane] * qs[r].inv_norm;
        }
    }
    return Q;
}

// dz = (dq - (dq . q) q) / ||z||, scattered back onto the feature grid.
void scatter_query_grads(const MatRM& dQ, const MatRM& Q, const std::vector<Query>& qs,
                         double scale, Tensor& dfeatures) {
    const int d = dfeatures.dim(1);
    const std::size_t plane = static_cast<std::size_t>(dfeatures.dim(2)) * dfeatures.dim(3);
    for (std::size_t r = 0; r < qs.size(); ++r) {
        const auto dq = dQ.row(static_cast<Eigen::Index>(r));
        const auto q = Q.row(static_cast<Eigen::Index>(r));
        const double dot = dq.dot(q);
        const std::size_t img = qs[r].flat / plane, px = qs[r].flat % plane;
        double* base = dfeatures.data() + img * static_cast<std::size_t>(d) * plane + px;
        for (int c = 0; c < d; ++c) {
            base[static_cast<std::size_t>(c) * plane] +=
                scale * (dq(c) - dot * q(c)) * qs[r].inv_norm;
        }
    }
}

}  // namespace

ContrastiveResult hc_loss(const Tensor& features, const LabelMap& assignments,
                          const BinaryMask& mask, const MemoryBank& bank, double temperature,
                          double scale, Tensor* dfeatures) {
    if (temperature <= 0.0) throw ConfigError("hc_loss: temperature must be > 0");
    if (!is_full(bank)) throw StateError("hc_loss: memory bank not full; caller must gate");
    if (features.dim(1) != bank.dim) throw ShapeError("hc_loss: feature dim != bank dim");
    if (dfeatures) check_same_shape(features, *dfeatures, "hc_loss dfeatures");

    const auto groups = gather_queries(features, assignments, mask, bank.num_classes, "hc_loss");
    ContrastiveResult res;
    for (const auto& g : groups) {
        if (!g.empty()) ++res.active_classes;
    }
    if (res.active_classes == 0) return res;

    for (int cls = 0; cls < bank.num_classes; ++cls) {
        const auto& qs = groups[static_cast<std::size_t>(cls)];
        if (qs.empty()) continue;
        res.query_count += qs.size();

        const MatRM Q = load_queries(features, qs);
        const Tensor pos_t = positives(bank, cls);
        const Tensor neg_t = negatives(bank, cls);
        CMapRM P(pos_t.data(), pos_t.dim(0), pos_t.dim(1));
        CMapRM Ng(neg_t.data(), neg_t.dim(0), neg_t.dim(1));
        const Eigen::Index I = Q.rows(), Pn = P.rows(), M = Ng.rows();

        MatRM Spos = (Q * P.transpose()) / temperature;
        MatRM Sneg = (Q * Ng.transpose()) / temperature;

        const double w = 1.0 / (static_cast<double>(res.active_classes) * static_cast<double>(I) *
                                static_cast<double>(Pn));
        MatRM coefP(I, Pn), coefN;
        if (dfeatures) coefN.setZero(I, M);

        double class_loss = 0.0;
        for (Eigen::Index i = 0; i < I; ++i) {
            double K = Spos.row(i).maxCoeff();
            if (M > 0) K = std::max(K, Sneg.row(i).maxCoeff());
            double fsum = 0.0;
            for (Eigen::Index j = 0; j < M; ++j) {
                Sneg(i, j) = std::exp(Sneg(i, j) - K);
                fsum += Sneg(i, j);
            }
            double inv_denom_sum = 0.0;
            for (Eigen::Index m = 0; m < Pn; ++m) {
                const double e = std::exp(Spos(i, m) - K);
                const double denom = e + fsum;
                class_loss += std::log(denom) - (Spos(i, m) - K);
                coefP(i, m) = -fsum / denom;
                inv_denom_sum += 1.0 / denom;
            }
            if (dfeatures && M > 0) {
                for (Eigen::Index j = 0; j < M; ++j) coefN(i, j) = Sneg(i, j) * inv_denom_sum;
            }
        }
        res.loss += w * class_loss;

        if (dfeatures) {
            MatRM dQ = (coefP * P) * (w / temperature);
            if (M > 0) dQ.noalias() += (coefN * Ng) * (w / temperature);
            scatter_query_grads(dQ, Q, qs, scale, *dfeatures);
        }
    }
    return res;
}

ContrastiveResult lc_loss(const Tensor& features_a, const Tensor& features_b,
                          const LabelMap& assignments_a, const BinaryMask& mask,
                          const MemoryBank& bank_a, const MemoryBank& bank_b, double temperature,
                          double scale, Tensor* dfeatures_a) {
    if (temperature <= 0.0) throw ConfigError("lc_loss: temperature must be > 0");
    if (!is_full(bank_a) || !is_full(bank_b)) {
        throw StateError("lc_loss: memory banks not full; caller must gate");
    }
    check_same_shape(features_a, features_b, "lc_loss features");
    if (features_a.dim(1) != bank_a.dim || bank_a.dim != bank_b.dim) {
        throw ShapeError("lc_loss: feature dim != bank dim");
    }
    if (bank_a.num_classes != bank_b.num_classes) {
        throw ShapeError("lc_loss: banks disagree on class count");
    }
    if (dfeatures_a) check_same_shape(features_a, *dfeatures_a, "lc_loss dfeatures");

    const int d = features_a.dim(1);
    const std::size_t plane = static_cast<std::size_t>(features_a.dim(2)) * features_a.dim(3);

    // Queries additionally require a usable positive: the peer feature at the
    // same pixel must have nonzero norm.
    auto groups = gather_queries(features_a, assignments_a, mask, bank_a.num_classes, "lc_loss");
    auto peer_norm2 = [&](std::size_t flat) {
        const std::size_t img = flat / plane, px = flat % plane;
        const double* base = features_b.data() + img * static_cast<std::size_t>(d) * plane + px;
        double n2 = 0.0;
        for (int c = 0; c < d; ++c) {
            const double v = base[static_cast<std::size_t>(c) * plane];
            n2 += v * v;
        }
        return n2;
    };
    for (auto& g : groups) {
        std::erase_if(g, [&](const Query& q) { return peer_norm2(q.flat) < 1e-24; });
    }

    ContrastiveResult res;
    for (const auto& g : groups) {
        if (!g.empty()) ++res.active_classes;
    }
    if (res.active_classes == 0) return res;

    for (int cls = 0; cls < bank_a.num_classes; ++cls) {
        const auto& qs = groups[static_cast<std::size_t>(cls)];
        if (qs.empty()) continue;
        res.query_count += qs.size();

        const MatRM Q = load_queries(features_a, qs);
        const MatRM Pos = load_queries(features_b, [&] {
            std::vector<Query> peer(qs.size());
            for (std::size_t r = 0; r < qs.size(); ++r) {
                peer[r].flat = qs[r].flat;
                peer[r].inv_norm = 1.0 / std::sqrt(peer_norm2(qs[r].flat));
            }
            return peer;
        }());
        const Tensor neg_a = negatives(bank_a, cls);
        const Tensor neg_b = negatives(bank_b, cls);
        MatRM Ng(neg_a.dim(0) + neg_b.dim(0), d);
        Ng.topRows(neg_a.dim(0)) = CMapRM(neg_a.data(), neg_a.dim(0), d);
        Ng.bottomRows(neg_b.dim(0)) = CMapRM(neg_b.data(), neg_b.dim(0), d);

        const Eigen::Index I = Q.rows(), M = Ng.rows();
        Eigen::VectorXd Spos(I);
        for (Eigen::Index i = 0; i < I; ++i) Spos(i) = Q.row(i).dot(Pos.row(i)) / temperature;
        MatRM Sneg = (Q * Ng.transpose()) / temperature;

        const double w = 1.0 / (static_cast<double>(res.active_classes) * static_cast<double>(I));
        Eigen::VectorXd coefP(I);
        MatRM coefN;
        if (dfeatures_a) coefN.setZero(I, M);

        double class_loss = 0.0;
        for (Eigen::Index i = 0; i < I; ++i) {
            double K = Spos(i);
            if (M > 0) K = std::max(K, Sneg.row(i).maxCoeff());
            double fsum = 0.0;
            for (Eigen::Index j = 0; j < M; ++j) {
                Sneg(i, j) = std::exp(Sneg(i, j) - K);
                fsum += Sneg(i, j);
            }
            const double e = std::exp(Spos(i) - K);
            const double denom = e + fsum;
            class_loss += std::log(denom) - (Spos(i) - K);
            coefP(i) = -fsum / denom;
            if (dfeatures_a && M > 0) {
                for (Eigen::Index j = 0; j < M; ++j) coefN(i, j) = Sneg(i, j) / denom;
            }
        }
        res.loss += w * class_loss;

        if (dfeatures_a) {
            MatRM dQ = coefP.asDiagonal() * Pos * (w / temperature);
            if (M > 0) dQ.noalias() += (coefN * Ng) * (w / temperature);
            scatter_query_grads(dQ, Q, qs, scale, *dfeatures_a);
        }
    }
    return res;
}

double total_loss(const LossComponents& components, const LossWeights& weights, bool bank_full) {
    if (weights.sup < 0 || weights.ct < 0 || weights.hc < 0 || weights.lc < 0) {
        throw ConfigError("total_loss: loss weights must be nonnegative");
    }
    double total = weights.sup * components.sup + weights.ct * components.ct;
    if (bank_full) total += weights.hc * components.hc + weights.lc * components.lc;
    return total;
}

}  // namespace ctt
