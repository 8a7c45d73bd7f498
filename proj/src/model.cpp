#include "ctt/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ctt/common.hpp"
#include "ctt/rng.hpp"

namespace ctt {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

int out_size(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// (Cin*k*k, Ho*Wo) patch matrix for one sample. Out-of-bounds taps are zero.
void im2col(const double* x, int cin, int h, int w, int k, int stride, int pad, int ho, int wo,
            MatRM& col) {
    col.resize(static_cast<Eigen::Index>(cin) * k * k, static_cast<Eigen::Index>(ho) * wo);
    for (int c = 0; c < cin; ++c) {
        const double* xc = x + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = col.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    double* out = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(out, out + wo, 0.0);
                        continue;
                    }
                    const double* xr = xc + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        out[ox] = (ix >= 0 && ix < w) ? xr[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Scatter-add of a column gradient back onto the input image.
void col2im_add(const MatRM& dcol, int cin, int h, int w, int k, int stride, int pad, int ho,
                int wo, double* dx) {
    for (int c = 0; c < cin; ++c) {
        double* dxc = dx + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row =
                    dcol.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dxr = dxc + static_cast<std::size_t>(iy) * w;
                    const double* r = row + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dxr[ix] += r[ox];
                    }
                }
            }
        }
    }
}

// y = w * im2col(x) + b, per sample. w is (Cout, Cin, k, k).
void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                    Tensor& y) {
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2);
    const int ho = out_size(h, k, stride, pad), wo = out_size(wd, k, stride, pad);
    y = Tensor{n, cout, ho, wo};
    CMapRM wm(w.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    if (k == 1 && stride == 1 && pad == 0) {
        for (int i = 0; i < n; ++i) {
            CMapRM xm(x.data() + static_cast<std::size_t>(i) * cin * h * wd, cin,
                      static_cast<Eigen::Index>(h) * wd);
            MapRM ym(y.data() + static_cast<std::size_t>(i) * cout * ho * wo, cout,
                     static_cast<Eigen::Index>(ho) * wo);
            ym.noalias() = wm * xm;
        }
    } else {
        MatRM col;
        for (int i = 0; i < n; ++i) {
            im2col(x.data() + static_cast<std::size_t>(i) * cin * h * wd, cin, h, wd, k, stride, pad,
                   ho, wo, col);
            MapRM ym(y.data() + static_cast<std::size_t>(i) * cout * ho * wo, cout,
                     static_cast<Eigen::Index>(ho) * wo);
            ym.noalias() = wm * col;
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < cout; ++c) {
            double* yc = y.data() + (static_cast<std::size_t>(i) * cout + c) * ho * wo;
            const double bc = b[static_cast<std::size_t>(c)];
            for (int p = 0; p < ho * wo; ++p) yc[p] += bc;
        }
    }
}

// Accumulates dw/db; writes dx if non-null (zeroed by caller or accumulated).
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, int stride, int pad,
                     Tensor* dx, Tensor& dw, Tensor& db) {
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2);
    const int ho = dy.dim(2), wo = dy.dim(3);
    CMapRM wm(w.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    MapRM dwm(dw.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    const bool pointwise = (k == 1 && stride == 1 && pad == 0);
    MatRM col, dcol;
    for (int i = 0; i < n; ++i) {
        CMapRM dym(dy.data() + static_cast<std::size_t>(i) * cout * ho * wo, cout,
                   static_cast<Eigen::Index>(ho) * wo);
        const double* xi = x.data() + static_cast<std::size_t>(i) * cin * h * wd;
        if (pointwise) {
            CMapRM xm(xi, cin, static_cast<Eigen::Index>(h) * wd);
            dwm.noalias() += dym * xm.transpose();
            if (dx) {
                MapRM dxm(dx->data() + static_cast<std::size_t>(i) * cin * h * wd, cin,
                          static_cast<Eigen::Index>(h) * wd);
                dxm.noalias() += wm.transpose() * dym;
            }
        } else {
            im2col(xi, cin, h, wd, k, stride, pad, ho, wo, col);
            dwm.noalias() += dym * col.transpose();
            if (dx) {
                dcol.noalias() = wm.transpose() * dym;
                col2im_add(dcol, cin, h, wd, k, stride, pad, ho, wo,
                           dx->data() + static_cast<std::size_t>(i) * cin * h * wd);
            }
        }
        // Fixed-order sum: Eigen's redux splits by runtime alignment, which
        // would make the last ulp depend on heap addresses.
        for (int c = 0; c < cout; ++c) {
            const double* r = dy.data() + (static_cast<std::size_t>(i) * cout + c) * ho * wo;
            double s = 0.0;
            for (int p = 0; p < ho * wo; ++p) s += r[p];
            db[static_cast<std::size_t>(c)] += s;
        }
    }
}

void relu_inplace(Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (t[i] < 0.0) t[i] = 0.0;
    }
}

// d(pre) = d(post) where post > 0, else 0. Uses the post-activation map.
void relu_backward_inplace(const Tensor& post, Tensor& d) {
    for (std::size_t i = 0; i < d.numel(); ++i) {
        if (post[i] <= 0.0) d[i] = 0.0;
    }
}

// Nearest-neighbor upsample to exactly (oh, ow); source index = dest / 2.
void upsample2x_nearest(const Tensor& x, int oh, int ow, Tensor& y) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    y = Tensor{n, c, oh, ow};
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const double* src = x.data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
            double* dst = y.data() + (static_cast<std::size_t>(i) * c + ch) * oh * ow;
            for (int y2 = 0; y2 < oh; ++y2) {
                const double* sr = src + static_cast<std::size_t>(y2 / 2) * w;
                double* dr = dst + static_cast<std::size_t>(y2) * ow;
                for (int x2 = 0; x2 < ow; ++x2) dr[x2] = sr[x2 / 2];
            }
        }
    }
}

void upsample2x_nearest_backward(const Tensor& dy, int ih, int iw, Tensor& dx) {
    const int n = dy.dim(0), c = dy.dim(1), oh = dy.dim(2), ow = dy.dim(3);
    dx = Tensor{n, c, ih, iw};
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const double* src = dy.data() + (static_cast<std::size_t>(i) * c + ch) * oh * ow;
            double* dst = dx.data() + (static_cast<std::size_t>(i) * c + ch) * ih * iw;
            for (int y2 = 0; y2 < oh; ++y2) {
                const double* sr = src + static_cast<std::size_t>(y2) * ow;
                double* dr = dst + static_cast<std::size_t>(y2 / 2) * iw;
                for (int x2 = 0; x2 < ow; ++x2) dr[x2 / 2] += sr[x2];
            }
        }
    }
}

int log2_exact(int v) {
    int e = 0;
    while ((1 << e) < v) ++e;
    return e;
}

}  // namespace

void validate(const BackboneConfig& config) {
    if (config.feature_dim < 8) throw ConfigError("BackboneConfig.feature_dim must be >= 8");
    if (config.stride != 2 && config.stride != 4 && config.stride != 8) {
        throw ConfigError("BackboneConfig.stride must be one of {2, 4, 8}");
    }
    if (config.num_classes < 2) throw ConfigError("BackboneConfig.num_classes must be >= 2");
    const std::size_t want = static_cast<std::size_t>(log2_exact(config.stride)) + 2;
    if (config.widths.size() != want) {
        throw ConfigError("BackboneConfig.widths must have log2(stride)+2 = " +
                          std::to_string(want) + " entries");
    }
    for (int w : config.widths) {
        if (w < 1) throw ConfigError("BackboneConfig.widths entries must be >= 1");
    }
}

Tensor& ModelParams::find(const std::string& name) {
    for (auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw StateError("no parameter tensor named " + name);
}

const Tensor& ModelParams::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw StateError("no parameter tensor named " + name);
}

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.value.numel();
    return n;
}

ModelParams zeros_like(const ModelParams& like) {
    ModelParams out;
    out.tensors.reserve(like.tensors.size());
    for (const auto& t : like.tensors) {
        out.tensors.push_back({t.name, Tensor{t.value.dims()}});
    }
    return out;
}

void ema_update(StudentTeacherPair& pair) {
    if (pair.ema_decay < 0.0 || pair.ema_decay > 1.0) {
        throw ConfigError("StudentTeacherPair.ema_decay must be in [0,1]");
    }
    if (pair.student.tensors.size() != pair.teacher.tensors.size()) {
        throw StateError("ema_update: student/teacher tensor counts differ");
    }
    const double tau = pair.ema_decay;
    for (std::size_t i = 0; i < pair.student.tensors.size(); ++i) {
        const auto& s = pair.student.tensors[i];
        auto& t = pair.teacher.tensors[i];
        if (s.name != t.name || !s.value.same_shape(t.value)) {
            throw StateError("ema_update: tensor mismatch at " + s.name);
        }
        for (std::size_t j = 0; j < s.value.numel(); ++j) {
            t.value[j] = tau * t.value[j] + (1.0 - tau) * s.value[j];
        }
    }
}

Network::Network(BackboneConfig config) : config_(std::move(config)) {
    validate(config_);
    depth_ = log2_exact(config_.stride) + 1;
}

namespace {

struct LayerDef {
    std::string name;
    int cin, cout, k, stride;
};

// stem + depth stride-2 stages + fuse + head + cls, in forward order.
std::vector<LayerDef> layer_defs(const BackboneConfig& cfg, int depth) {
    std::vector<LayerDef> defs;
    defs.push_back({"stem", 3, cfg.widths[0], 3, 1});
    for (int i = 1; i <= depth; ++i) {
        defs.push_back({"down" + std::to_string(i), cfg.widths[static_cast<std::size_t>(i) - 1],
                        cfg.widths[static_cast<std::size_t>(i)], 3, 2});
    }
    const int skip = cfg.widths[static_cast<std::size_t>(depth) - 1];
    const int deep = cfg.widths[static_cast<std::size_t>(depth)];
    defs.push_back({"fuse", skip + deep, skip, 3, 1});
    defs.push_back({"head", skip, cfg.feature_dim, 1, 1});
    defs.push_back({"cls", cfg.feature_dim, cfg.num_classes, 1, 1});
    return defs;
}

}  // namespace

ModelParams Network::init_params() const {
    Rng rng(config_.init_seed);
    ModelParams params;
    for (const auto& def : layer_defs(config_, depth_)) {
        Tensor w{def.cout, def.cin, def.k, def.k};
        const double stddev = std::sqrt(2.0 / (static_cast<double>(def.cin) * def.k * def.k));
        for (std::size_t i = 0; i < w.numel(); ++i) w[i] = stddev * rng.next_normal();
        params.tensors.push_back({def.name + ".w", std::move(w)});
        Tensor b{def.cout};
        // Small positive bias keeps relu units off the kink at init (the
        // head and classifier have no relu and start at zero).
        if (def.name != "head" && def.name != "cls") b.fill(0.01);
        params.tensors.push_back({def.name + ".b", std::move(b)});
    }
    return params;
}

ModelParams init_model(const BackboneConfig& config) { return Network(config).init_params(); }

ForwardOutput Network::forward(const ModelParams& params, const Tensor& images) const {
    ForwardCache cache;
    return forward(params, images, cache);
}

ForwardOutput Network::forward(const ModelParams& params, const Tensor& images,
                               ForwardCache& cache) const {
    if (images.dims().size() != 4 || images.dim(1) != 3) {
        throw ShapeError("forward: images must be (N, 3, H, W)");
    }
    const int H = images.dim(2), W = images.dim(3);
    if (H % config_.stride != 0 || W % config_.stride != 0) {
        throw ShapeError("forward: image dims " + images.shape_str() +
                         " not divisible by stride " + std::to_string(config_.stride));
    }

    cache.input = images;
    cache.stage_out.clear();

    Tensor cur;
    conv2d_forward(images, params.find("stem.w"), params.find("stem.b"), 1, 1, cur);
    relu_inplace(cur);
    cache.stage_out.push_back(cur);
    for (int i = 1; i <= depth_; ++i) {
        Tensor next;
        conv2d_forward(cache.stage_out.back(), params.find("down" + std::to_string(i) + ".w"),
                       params.find("down" + std::to_string(i) + ".b"), 2, 1, next);
        relu_inplace(next);
        cache.stage_out.push_back(std::move(next));
    }

    const Tensor& skip = cache.stage_out[static_cast<std::size_t>(depth_) - 1];
    const Tensor& deep = cache.stage_out[static_cast<std::size_t>(depth_)];
    Tensor up;
    upsample2x_nearest(deep, skip.dim(2), skip.dim(3), up);

    const int n = skip.dim(0), hs = skip.dim(2), ws = skip.dim(3);
    const int c_skip = skip.dim(1), c_up = up.dim(1);
    cache.concat = Tensor{n, c_skip + c_up, hs, ws};
    for (int i = 0; i < n; ++i) {
        std::copy(skip.data() + static_cast<std::size_t>(i) * c_skip * hs * ws,
                  skip.data() + static_cast<std::size_t>(i + 1) * c_skip * hs * ws,
                  cache.concat.data() + static_cast<std::size_t>(i) * (c_skip + c_up) * hs * ws);
        std::copy(up.data() + static_cast<std::size_t>(i) * c_up * hs * ws,
                  up.data() + static_cast<std::size_t>(i + 1) * c_up * hs * ws,
                  cache.concat.data() + static_cast<std::size_t>(i) * (c_skip + c_up) * hs * ws +
                      static_cast<std::size_t>(c_skip) * hs * ws);
    }

    conv2d_forward(cache.concat, params.find("fuse.w"), params.find("fuse.b"), 1, 1, cache.fuse_out);
    relu_inplace(cache.fuse_out);

    ForwardOutput out;
    conv2d_forward(cache.fuse_out, params.find("head.w"), params.find("head.b"), 1, 0,
                   out.features);
    cache.features = out.features;
    conv2d_forward(out.features, params.find("cls.w"), params.find("cls.b"), 1, 0, out.logits);

    const int C = config_.num_classes, hf = out.logits.dim(2), wf = out.logits.dim(3);
    out.probs = Tensor{n, C, hf, wf};
    out.confidence = Tensor{n, hf, wf};
    out.hard_labels = LabelMap(n, hf, wf);
    const std::size_t plane = static_cast<std::size_t>(hf) * wf;
    for (int i = 0; i < n; ++i) {
        const double* lg = out.logits.data() + static_cast<std::size_t>(i) * C * plane;
        double* pr = out.probs.data() + static_cast<std::size_t>(i) * C * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            double mx = lg[p];
            int arg = 0;
            for (int c = 1; c < C; ++c) {
                const double v = lg[static_cast<std::size_t>(c) * plane + p];
                if (v > mx) {
                    mx = v;
                    arg = c;
                }
            }
            double z = 0.0;
            for (int c = 0; c < C; ++c) {
                const double e = std::exp(lg[static_cast<std::size_t>(c) * plane + p] - mx);
                pr[static_cast<std::size_t>(c) * plane + p] = e;
                z += e;
            }
            double best = 0.0;
            for (int c = 0; c < C; ++c) {
                const double v = pr[static_cast<std::size_t>(c) * plane + p] / z;
                pr[static_cast<std::size_t>(c) * plane + p] = v;
                if (v > best) best = v;
            }
            out.confidence[static_cast<std::size_t>(i) * plane + p] = best;
            out.hard_labels.v[static_cast<std::size_t>(i) * plane + p] = arg;
        }
    }
    return out;
}

void Network::backward(const ModelParams& params, const ForwardCache& cache, const Tensor& dlogits,
                       const Tensor& dfeatures, ModelParams& grads) const {
    const Tensor& feats = cache.features;
    Tensor dfeat{feats.dims()};
    if (!dlogits.empty()) {
        conv2d_backward(feats, params.find("cls.w"), dlogits, 1, 0, &dfeat, grads.find("cls.w"),
                        grads.find("cls.b"));
    }
    if (!dfeatures.empty()) {
        check_same_shape(dfeat, dfeatures, "backward dfeatures");
        for (std::size_t i = 0; i < dfeat.numel(); ++i) dfeat[i] += dfeatures[i];
    }

    Tensor dfuse{cache.fuse_out.dims()};
    conv2d_backward(cache.fuse_out, params.find("head.w"), dfeat, 1, 0, &dfuse,
                    grads.find("head.w"), grads.find("head.b"));
    relu_backward_inplace(cache.fuse_out, dfuse);

    Tensor dconcat{cache.concat.dims()};
    conv2d_backward(cache.concat, params.find("fuse.w"), dfuse, 1, 1, &dconcat,
                    grads.find("fuse.w"), grads.find("fuse.b"));

    // Split the concat gradient back into skip and upsampled-deep parts.
    const Tensor& skip = cache.stage_out[static_cast<std::size_t>(depth_) - 1];
    const Tensor& deep = cache.stage_out[static_cast<std::size_t>(depth_)];
    const int n = skip.dim(0), hs = skip.dim(2), ws = skip.dim(3);
    const int c_skip = skip.dim(1), c_up = deep.dim(1);
    Tensor dskip{n, c_skip, hs, ws};
    Tensor dup{n, c_up, hs, ws};
    for (int i = 0; i < n; ++i) {
        const double* src = dconcat.data() + static_cast<std::size_t>(i) * (c_skip + c_up) * hs * ws;
        std::copy(src, src + static_cast<std::size_t>(c_skip) * hs * ws,
                  dskip.data() + static_cast<std::size_t>(i) * c_skip * hs * ws);
        std::copy(src + static_cast<std::size_t>(c_skip) * hs * ws,
                  src + static_cast<std::size_t>(c_skip + c_up) * hs * ws,
                  dup.data() + static_cast<std::size_t>(i) * c_up * hs * ws);
    }

    Tensor dcur;
    upsample2x_nearest_backward(dup, deep.dim(2), deep.dim(3), dcur);

    // Down stages in reverse; the skip gradient joins at stage depth_-1.
    for (int i = depth_; i >= 1; --i) {
        const Tensor& stage = cache.stage_out[static_cast<std::size_t>(i)];
        relu_backward_inplace(stage, dcur);
        const Tensor& below = cache.stage_out[static_cast<std::size_t>(i) - 1];
        Tensor dbelow{below.dims()};
        const std::string nm = "down" + std::to_string(i);
        conv2d_backward(below, params.find(nm + ".w"), dcur, 2, 1, &dbelow, grads.find(nm + ".w"),
                        grads.find(nm + ".b"));
        if (i - 1 == depth_ - 1) {
            for (std::size_t j = 0; j < dbelow.numel(); ++j) dbelow[j] += dskip[j];
        }
        dcur = std::move(dbelow);
    }

    relu_backward_inplace(cache.stage_out[0], dcur);
    conv2d_backward(cache.input, params.find("stem.w"), dcur, 1, 1, nullptr, grads.find("stem.w"),
                    grads.find("stem.b"));
}

Tensor upsample_probs_bilinear(const Tensor& probs, int out_h, int out_w) {
    if (probs.dims().size() != 4) throw ShapeError("upsample_probs_bilinear: rank-4 input required");
    const int n = probs.dim(0), c = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
    if (out_h < 1 || out_w < 1) throw ShapeError("upsample_probs_bilinear: bad output size");
    Tensor out{n, c, out_h, out_w};
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int i = 0; i < n; ++i) {
                for (int ch = 0; ch < c; ++ch) {
                    const double* src = probs.data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
                    const double v00 = src[static_cast<std::size_t>(y0) * w + x0];
                    const double v01 = src[static_cast<std::size_t>(y0) * w + x1];
                    const double v10 = src[static_cast<std::size_t>(y1) * w + x0];
                    const double v11 = src[static_cast<std::size_t>(y1) * w + x1];
                    out.at4(i, ch, oy, ox) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                             wy * ((1 - wx) * v10 + wx * v11);
                }
            }
        }
    }
    return out;
}

}  // namespace ctt
