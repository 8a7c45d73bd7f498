#include "ctt/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ctt/common.hpp"
#include "ctt/losses.hpp"

namespace ctt {

long long ConfusionMatrix::total() const {
    long long t = 0;
    for (long long v : counts) t += v;
    return t;
}

void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt) {
    if (pred.dims != gt.dims) throw ShapeError("accumulate: pred/gt shape mismatch");
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        const int g = gt.v[i];
        if (g == kIgnoreLabel) continue;
        const int p = pred.v[i];
        if (g < 0 || g >= cm.num_classes || p < 0 || p >= cm.num_classes) {
            throw DataError("accumulate: label outside [0, num_classes)");
        }
        ++cm.at(g, p);
    }
}

MiouResult miou(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw StateError("miou: empty confusion matrix");
    MiouResult res;
    res.per_class.assign(static_cast<std::size_t>(cm.num_classes),
                         std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < cm.num_classes; ++c) {
        const long long tp = cm.at(c, c);
        long long fp = 0, fn = 0;
        for (int o = 0; o < cm.num_classes; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const long long denom = tp + fp + fn;
        if (denom == 0) continue;
        const double iou = static_cast<double>(tp) / static_cast<double>(denom);
        res.per_class[static_cast<std::size_t>(c)] = iou;
        sum += iou;
        ++defined;
    }
    if (defined == 0) throw StateError("miou: no class has a defined IoU");
    res.mean = sum / defined;
    return res;
}

std::string miou_report(const ConfusionMatrix& cm) {
    const MiouResult res = miou(cm);
    std::string out = "class  iou      gt_pixels\n";
    char buf[96];
    for (int c = 0; c < cm.num_classes; ++c) {
        long long gt_count = 0;
        for (int o = 0; o < cm.num_classes; ++o) gt_count += cm.at(c, o);
        const double iou = res.per_class[static_cast<std::size_t>(c)];
        if (std::isnan(iou)) {
            std::snprintf(buf, sizeof(buf), "%-6d n/a      %lld\n", c, gt_count);
        } else {
            std::snprintf(buf, sizeof(buf), "%-6d %.6f %lld\n", c, iou, gt_count);
        }
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean   %.6f (over %lld valid pixels)\n", res.mean, cm.total());
    out += buf;
    return out;
}

double pseudo_label_quality(const LabelMap& pseudo, const LabelMap& gt) {
    if (pseudo.dims != gt.dims) throw ShapeError("pseudo_label_quality: shape mismatch");
    long long valid = 0, correct = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        if (gt.v[i] == kIgnoreLabel) continue;
        ++valid;
        correct += (pseudo.v[i] == gt.v[i]);
    }
    return valid == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(valid);
}

LabelMap predict_full_res(const Network& net, const std::vector<const ModelParams*>& models,
                          const Tensor& images) {
    if (models.empty()) throw ConfigError("predict_full_res: no models given");
    const int H = images.dim(2), W = images.dim(3);
    Tensor mean_probs;
    for (const ModelParams* m : models) {
        const ForwardOutput out = net.forward(*m, images);
        Tensor up = upsample_probs_bilinear(out.probs, H, W);
        if (mean_probs.empty()) {
            mean_probs = std::move(up);
        } else {
            for (std::size_t i = 0; i < mean_probs.numel(); ++i) mean_probs[i] += up[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    const int n = mean_probs.dim(0), C = mean_probs.dim(1);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    LabelMap pred(n, H, W);
    for (int i = 0; i < n; ++i) {
        const double* p = mean_probs.data() + static_cast<std::size_t>(i) * C * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            double best = p[px] * inv;
            int arg = 0;
            for (int c = 1; c < C; ++c) {
                const double v = p[static_cast<std::size_t>(c) * plane + px] * inv;
                if (v > best) {
                    best = v;
                    arg = c;
                }
            }
            pred.v[static_cast<std::size_t>(i) * plane + px] = arg;
        }
    }
    return pred;
}

ConfusionMatrix evaluate_model(const Network& net, const std::vector<const ModelParams*>& models,
                               const std::vector<Sample>& samples) {
    ConfusionMatrix cm(net.config().num_classes);
    for (const Sample& s : samples) {
        const LabelMap pred = predict_full_res(net, models, s.image);
        LabelMap gt(1, s.h, s.w);
        gt.v = s.label;
        accumulate(cm, pred, gt);
    }
    return cm;
}

void export_features(const Network& net, const ModelParams& params,
                     const std::vector<const Sample*>& labeled,
                     const std::vector<const Sample*>& unlabeled, int per_class_cap,
                     const std::filesystem::path& out_path) {
    if (per_class_cap < 1) throw ConfigError("export_features: per_class_cap must be >= 1");
    const int C = net.config().num_classes;
    const int d = net.config().feature_dim;
    const int stride = net.config().stride;

    std::ofstream out(out_path);
    if (!out) throw DataError("export_features: cannot write " + out_path.string());
    out << "class origin";
    for (int c = 0; c < d; ++c) out << " f" << c;
    out << "\n";

    std::vector<int> emitted(static_cast<std::size_t>(C) * 2, 0);
    char buf[32];
    auto dump = [&](const std::vector<const Sample*>& samples, bool is_labeled) {
        const char* origin = is_labeled ? "labeled" : "unlabeled";
        const int origin_idx = is_labeled ? 0 : 1;
        for (const Sample* s : samples) {
            bool quota_left = false;
            for (int c = 0; c < C; ++c) {
                quota_left |= emitted[static_cast<std::size_t>(c) * 2 + origin_idx] < per_class_cap;
            }
            if (!quota_left) return;

            const ForwardOutput fw = net.forward(params, s->image);
            const int hf = fw.features.dim(2), wf = fw.features.dim(3);
            LabelMap tags(1, hf, wf);
            if (is_labeled) {
                LabelMap full(1, s->h, s->w);
                full.v = s->label;
                tags = downsample_labels(full, stride);
            } else {
                tags = fw.hard_labels;
            }
            for (int y = 0; y < hf; ++y) {
                for (int x = 0; x < wf; ++x) {
                    const int cls = tags.at(0, y, x);
                    if (cls == kIgnoreLabel) continue;
                    int& count = emitted[static_cast<std::size_t>(cls) * 2 + origin_idx];
                    if (count >= per_class_cap) continue;
                    ++count;
                    out << cls << " " << origin;
                    for (int c = 0; c < d; ++c) {
                        std::snprintf(buf, sizeof(buf), " %.6f", fw.features.at4(0, c, y, x));
                        out << buf;
                    }
                    out << "\n";
                }
            }
        }
    };
    dump(labeled, true);
    dump(unlabeled, false);
    if (!out) throw DataError("export_features: write failed for " + out_path.string());
}

}  // namespace ctt
