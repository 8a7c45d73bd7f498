#include "ctt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ctt/common.hpp"
#include "ctt/evaluation.hpp"

namespace ctt {
namespace {

// Rng stream tags; fixed so checkpoints stay replayable across versions.
constexpr std::uint64_t kStreamLabeled = 1;
constexpr std::uint64_t kStreamUnlabeled = 2;
constexpr std::uint64_t kStreamBank = 3;
constexpr std::uint64_t kStreamInitBase = 16;   // + pair index
constexpr std::uint64_t kStreamReinitBase = 64; // self-training phase 2

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return Rng::for_index(seed, tag).next_u64();
}

/// Rows [from, from + count) along dim 0, as an owning copy.
Tensor take_rows(const Tensor& t, int from, int count) {
    std::vector<int> dims = t.dims();
    std::size_t row = 1;
    for (std::size_t i = 1; i < dims.size(); ++i) row *= static_cast<std::size_t>(dims[i]);
    dims[0] = count;
    Tensor out(dims);
    std::copy(t.data() + static_cast<std::size_t>(from) * row,
              t.data() + (static_cast<std::size_t>(from) + count) * row, out.data());
    return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (b.empty()) return a;
    std::vector<int> dims = a.dims();
    dims[0] = a.dim(0) + b.dim(0);
    Tensor out(dims);
    std::copy(a.data(), a.data() + a.numel(), out.data());
    std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
    return out;
}

LabelMap concat_labels(const LabelMap& a, const LabelMap& b) {
    if (b.v.empty()) return a;
    LabelMap out(a.dims[0] + b.dims[0], a.dims[1], a.dims[2]);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
    return out;
}

ForwardOutput slice_output(const ForwardOutput& fo, int b) {
    ForwardOutput one;
    one.features = take_rows(fo.features, b, 1);
    one.logits = take_rows(fo.logits, b, 1);
    one.probs = take_rows(fo.probs, b, 1);
    one.confidence = take_rows(fo.confidence, b, 1);
    one.hard_labels = LabelMap(1, fo.hard_labels.dims[1], fo.hard_labels.dims[2]);
    const std::size_t plane = one.hard_labels.v.size();
    std::copy(fo.hard_labels.v.begin() + static_cast<std::ptrdiff_t>(plane * b),
              fo.hard_labels.v.begin() + static_cast<std::ptrdiff_t>(plane * (b + 1)),
              one.hard_labels.v.begin());
    return one;
}

LabelMap slice_labels(const LabelMap& m, int b) {
    LabelMap one(1, m.dims[1], m.dims[2]);
    const std::size_t plane = one.v.size();
    std::copy(m.v.begin() + static_cast<std::ptrdiff_t>(plane * b),
              m.v.begin() + static_cast<std::ptrdiff_t>(plane * (b + 1)), one.v.begin());
    return one;
}

/// Argmax over the summed probability maps (ties toward the lowest class).
LabelMap argmax_mean(const std::vector<const Tensor*>& probs) {
    const Tensor& f = *probs.front();
    const int n = f.dim(0), c = f.dim(1), h = f.dim(2), w = f.dim(3);
    LabelMap out(n, h, w);
    for (int i = 0; i < n; ++i) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int best = 0;
                double best_v = 0.0;
                for (int cls = 0; cls < c; ++cls) {
                    double v = 0.0;
                    for (const Tensor* p : probs) v += p->at4(i, cls, y, x);
                    if (cls == 0 || v > best_v) {
                        best = cls;
                        best_v = v;
                    }
                }
                out.at(i, y, x) = best;
            }
        }
    }
    return out;
}

BinaryMask complement(const BinaryMask& m) {
    BinaryMask out = m;
    for (auto& v : out.v) v = v ? 0 : 1;
    return out;
}

double label_agreement(const LabelMap& a, const LabelMap& b) {
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) same += a.v[i] == b.v[i] ? 1 : 0;
    return a.v.empty() ? 0.0 : static_cast<double>(same) / static_cast<double>(a.v.size());
}

}  // namespace

double poly_lr(double base_lr, long long iter, long long max_iters, double power) {
    if (max_iters < 1) {
        throw std::out_of_range("poly_lr: max_iters must be >= 1, got " + std::to_string(max_iters));
    }
    if (iter < 0 || iter > max_iters) {
        throw std::out_of_range("poly_lr: iter " + std::to_string(iter) + " outside [0, " +
                                std::to_string(max_iters) + "]");
    }
    const double t = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iters);
    return base_lr * std::pow(t, power);
}

std::string metrics_to_json(const MetricsRecord& r) {
    nlohmann::ordered_json j;
    j["iter"] = r.iter;
    j["lr"] = r.lr;
    j["sup"] = r.sup;
    j["ct"] = r.ct;
    j["hc"] = r.hc;
    j["lc"] = r.lc;
    j["w_sup"] = r.w_sup;
    j["w_ct"] = r.w_ct;
    j["w_hc"] = r.w_hc;
    j["w_lc"] = r.w_lc;
    j["total"] = r.total;
    j["banks_full"] = r.banks_full;
    j["bank_fill"] = r.bank_fill;
    if (r.agreement) j["agreement"] = *r.agreement;
    if (r.pseudo_quality) j["pseudo_quality"] = *r.pseudo_quality;
    if (r.miou) j["miou"] = *r.miou;
    return j.dump();
}

Trainer::Trainer(const TrainConfig& cfg, TrainData data)
    : cfg_(cfg), net_(cfg.backbone), data_(std::move(data)) {
    validate(cfg_);
    if (data_.train.empty()) throw DataError("Trainer: training set is empty");
    for (const Sample& s : data_.train) {
        if (s.h < cfg_.crop || s.w < cfg_.crop) {
            throw ConfigError("TrainConfig.crop: larger than a training image (" +
                              std::to_string(s.h) + "x" + std::to_string(s.w) + ")");
        }
    }

    const SplitResult split = split_labeled(
        data_.train.size(), SplitSpec{cfg_.data.labeled_fraction, cfg_.data.split_seed});
    labeled_idx_ = split.labeled;
    unlabeled_idx_ = split.unlabeled;

    for (int p = 0; p < cfg_.pairs; ++p) {
        BackboneConfig bc = cfg_.backbone;
        bc.init_seed = derive_seed(cfg_.seed, kStreamInitBase + static_cast<std::uint64_t>(p));
        StudentTeacherPair pair;
        pair.student = init_model(bc);
        pair.teacher = pair.student;  // teachers start as copies
        pair.ema_decay = cfg_.ema_decay;
        velocity_.push_back(zeros_like(pair.student));
        banks_.push_back(new_bank(cfg_.backbone.num_classes, cfg_.bank_capacity, cfg_.bank_dim));
        pairs_.push_back(std::move(pair));
    }

    rng_labeled_ = Rng::for_index(cfg_.seed, kStreamLabeled);
    rng_unlabeled_ = Rng::for_index(cfg_.seed, kStreamUnlabeled);
    rng_bank_ = Rng::for_index(cfg_.seed, kStreamBank);
    aug_.crop_h = aug_.crop_w = cfg_.crop;
}

Trainer::Batch Trainer::draw_batch(const std::vector<int>& pool, int count, Rng& rng) const {
    const int ch = aug_.crop_h, cw = aug_.crop_w;
    Batch b;
    b.images = Tensor{count, 3, ch, cw};
    b.labels = LabelMap(count, ch, cw);
    const std::size_t ipix = static_cast<std::size_t>(3) * ch * cw;
    const std::size_t lpix = static_cast<std::size_t>(ch) * cw;
    for (int i = 0; i < count; ++i) {
        const int idx = pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
        const Sample s = augment(data_.train[static_cast<std::size_t>(idx)], aug_, rng);
        std::copy(s.image.data(), s.image.data() + ipix, b.images.data() + ipix * i);
        std::copy(s.label.begin(), s.label.end(), b.labels.v.begin() + static_cast<std::ptrdiff_t>(lpix * i));
    }
    return b;
}

bool Trainer::uses_ema() const {
    switch (cfg_.topology) {
        case Topology::kMutual:
        case Topology::kSelfTraining:
            return false;
        default:
            return true;
    }
}

bool Trainer::unlabeled_phase_active() const {
    switch (cfg_.topology) {
        case Topology::kSupervisedOnly:
            return false;
        case Topology::kSelfTraining:
            return iter_ >= phase1_iters();
        default:
            return true;
    }
}

void Trainer::maybe_self_training_transition() {
    if (cfg_.topology != Topology::kSelfTraining || iter_ != phase1_iters()) return;
    // Freeze the phase-1 model as the pseudo-labeler; retrain from scratch.
    pairs_[0].teacher = pairs_[0].student;
    BackboneConfig bc = cfg_.backbone;
    bc.init_seed = derive_seed(cfg_.seed, kStreamReinitBase);
    pairs_[0].student = init_model(bc);
    velocity_[0] = zeros_like(pairs_[0].student);
}

MetricsRecord Trainer::step() {
    maybe_self_training_transition();

    const int n = cfg_.pairs;
    const int num_classes = cfg_.backbone.num_classes;
    const int stride = cfg_.backbone.stride;
    const Topology topo = cfg_.topology;
    const LossWeights& lw = cfg_.weights;

    MetricsRecord rec;
    rec.iter = iter_;
    rec.lr = poly_lr(cfg_.base_lr, iter_, cfg_.max_iters, cfg_.lr_power);
    rec.sup_per_pair.assign(static_cast<std::size_t>(n), 0.0);
    rec.ct_per_pair.assign(static_cast<std::size_t>(n), 0.0);
    rec.hc_per_pair.assign(static_cast<std::size_t>(n), 0.0);
    rec.lc_per_pair.assign(static_cast<std::size_t>(n), 0.0);
    rec.bank_fill.assign(static_cast<std::size_t>(n),
                         std::vector<double>(static_cast<std::size_t>(num_classes), 0.0));

    const bool unlabeled_active = unlabeled_phase_active();
    const bool want_banks = topo == Topology::kCrossTeacher && (lw.hc > 0 || lw.lc > 0);
    const bool have_unlabeled = !unlabeled_idx_.empty() && cfg_.batch_unlabeled > 0;
    const bool do_unlabeled = unlabeled_active && have_unlabeled && (lw.ct > 0 || want_banks);

    // (1) Students forward on labeled data; supervised CE at feature stride.
    const Batch lb = draw_batch(labeled_idx_, cfg_.batch_labeled, rng_labeled_);
    const LabelMap lb_ds = downsample_labels(lb.labels, stride);
    std::vector<ForwardCache> cache_l(static_cast<std::size_t>(n));
    std::vector<ForwardOutput> fo_l(static_cast<std::size_t>(n));
    std::vector<Tensor> dlogits_l(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        fo_l[p] = net_.forward(pairs_[p].student, lb.images, cache_l[p]);
        double v;
        if (lw.sup > 0) {
            dlogits_l[p] = Tensor(fo_l[p].logits.dims());
            v = softmax_ce_loss_grad(fo_l[p].probs, lb_ds, lw.sup, dlogits_l[p]);
        } else {
            v = pixel_cross_entropy(fo_l[p].probs, lb_ds);
        }
        rec.sup_per_pair[p] = v;
        rec.sup += v;
    }

    // (2) Pseudo-label sources on unlabeled data, gradient-free.
    // (3) Students forward on unlabeled data; consistency CE.
    Batch ub;
    LabelMap ub_gt_ds;
    std::vector<ForwardOutput> fo_u(static_cast<std::size_t>(n));
    std::vector<ForwardCache> cache_u(static_cast<std::size_t>(n));
    std::vector<Tensor> dlogits_u(static_cast<std::size_t>(n));
    std::vector<ForwardOutput> teacher_u(static_cast<std::size_t>(n));
    std::vector<LabelMap> pseudo(static_cast<std::size_t>(n));
    std::vector<LabelMap> assign_u(static_cast<std::size_t>(n));
    if (do_unlabeled) {
        ub = draw_batch(unlabeled_idx_, cfg_.batch_unlabeled, rng_unlabeled_);
        ub_gt_ds = downsample_labels(ub.labels, stride);

        const bool teacher_sources = topo != Topology::kMutual;
        if (teacher_sources) {
            for (int p = 0; p < n; ++p) {
                teacher_u[p] = net_.forward(pairs_[p].teacher, ub.images);
                pseudo[p] = make_pseudo_labels(teacher_u[p]);
            }
        }
        for (int p = 0; p < n; ++p) fo_u[p] = net_.forward(pairs_[p].student, ub.images, cache_u[p]);
        if (!teacher_sources) {
            for (int p = 0; p < n; ++p) pseudo[p] = make_pseudo_labels(fo_u[p]);
        }

        for (int p = 0; p < n; ++p) {
            if (lw.ct > 0) dlogits_u[p] = Tensor(fo_u[p].logits.dims());
            // (source, coefficient) per topology; coefficients sum to 1.
            std::vector<std::pair<int, double>> sources;
            switch (topo) {
                case Topology::kCrossTeacher:
                case Topology::kMutual:
                    for (int q = 0; q < n; ++q) {
                        if (q != p) sources.emplace_back(q, 1.0 / (n - 1));
                    }
                    break;
                case Topology::kDualTeacher:
                    for (int q = 0; q < n; ++q) sources.emplace_back(q, 1.0 / n);
                    break;
                default:  // mean_teacher, ensemble, self_training: own source
                    sources.emplace_back(p, 1.0);
                    break;
            }
            for (const auto& [q, c] : sources) {
                double v;
                if (lw.ct > 0) {
                    v = softmax_ce_loss_grad(fo_u[p].probs, pseudo[q], lw.ct * c, dlogits_u[p]);
                } else {
                    v = pixel_cross_entropy(fo_u[p].probs, pseudo[q]);
                }
                rec.ct_per_pair[p] += c * v;
            }
            rec.ct += rec.ct_per_pair[p];
        }

        if (want_banks) {
            // Class assignments for contrastive queries on unlabeled pixels:
            // argmax of the mean over the cross teachers.
            for (int p = 0; p < n; ++p) {
                std::vector<const Tensor*> others;
                for (int q = 0; q < n; ++q) {
                    if (q != p) others.push_back(&teacher_u[q].probs);
                }
                assign_u[p] = argmax_mean(others);
            }
        }

        if (n >= 2) rec.agreement = label_agreement(pseudo[0], pseudo[1]);
        rec.pseudo_quality = pseudo_label_quality(pseudo[0], ub_gt_ds);
    }

    // (4) Teachers forward on labeled data; per-image candidate selection.
    if (want_banks) {
        const int k = compute_k(static_cast<long long>(labeled_idx_.size()), cfg_.bank_capacity);
        for (int p = 0; p < n; ++p) {
            const ForwardOutput lt = net_.forward(pairs_[p].teacher, lb.images);
            for (int b = 0; b < cfg_.batch_labeled; ++b) {
                const auto cands = select_candidates(slice_output(lt, b), slice_labels(lb_ds, b),
                                                     k, cfg_.selection, rng_bank_);
                for (int cls = 0; cls < num_classes; ++cls) {
                    std::vector<std::vector<double>> vecs;
                    for (const auto& cf : cands[static_cast<std::size_t>(cls)]) vecs.push_back(cf.vec);
                    if (!vecs.empty()) push(banks_[p], cls, vecs);
                }
            }
        }
    }
    const bool banks_full =
        want_banks && std::all_of(banks_.begin(), banks_.end(),
                                  [](const MemoryBank& b) { return is_full(b); });
    rec.banks_full = banks_full;
    for (int p = 0; p < n; ++p) {
        for (int cls = 0; cls < num_classes; ++cls) {
            rec.bank_fill[p][cls] = static_cast<double>(banks_[p].queues[cls].size()) /
                                    static_cast<double>(cfg_.bank_capacity);
        }
    }

    // (5) Contrastive losses over the concatenated labeled+unlabeled batch,
    // gated on full banks (Alg. 1 branch).
    std::vector<Tensor> dfeat_l(static_cast<std::size_t>(n)), dfeat_u(static_cast<std::size_t>(n));
    if (banks_full) {
        const int bl = cfg_.batch_labeled;
        const int bu = do_unlabeled ? cfg_.batch_unlabeled : 0;
        std::vector<Tensor> feats_cat(static_cast<std::size_t>(n)), conf_cat(static_cast<std::size_t>(n));
        std::vector<LabelMap> assign_cat(static_cast<std::size_t>(n));
        std::vector<BinaryMask> m_hc(static_cast<std::size_t>(n));
        for (int p = 0; p < n; ++p) {
            feats_cat[p] = concat_rows(fo_l[p].features, bu ? fo_u[p].features : Tensor{});
            conf_cat[p] = concat_rows(fo_l[p].confidence, bu ? fo_u[p].confidence : Tensor{});
            assign_cat[p] = bu ? concat_labels(lb_ds, assign_u[p]) : lb_ds;
            m_hc[p] = hc_mask(conf_cat[p], cfg_.contrast.phi);
        }
        for (int p = 0; p < n; ++p) {
            Tensor dfeat_cat(feats_cat[p].dims());
            bool touched = false;
            if (lw.hc > 0) {
                const auto res = hc_loss(feats_cat[p], assign_cat[p], m_hc[p], banks_[p],
                                         cfg_.contrast.temperature, lw.hc, &dfeat_cat);
                rec.hc_per_pair[p] = res.loss;
                touched = true;
            }
            if (lw.lc > 0) {
                for (int q = 0; q < n; ++q) {
                    if (q == p) continue;
                    const BinaryMask m_lc = cfg_.lc_directional
                                                ? lc_mask(m_hc[p], conf_cat[p], conf_cat[q])
                                                : complement(m_hc[p]);
                    const auto res =
                        lc_loss(feats_cat[p], feats_cat[q], assign_cat[p], m_lc, banks_[p],
                                banks_[q], cfg_.contrast.temperature, lw.lc / (n - 1), &dfeat_cat);
                    rec.lc_per_pair[p] += res.loss / (n - 1);
                    touched = true;
                }
            }
            if (touched) {
                dfeat_l[p] = take_rows(dfeat_cat, 0, bl);
                if (bu > 0) dfeat_u[p] = take_rows(dfeat_cat, bl, bu);
            }
            rec.hc += rec.hc_per_pair[p];
            rec.lc += rec.lc_per_pair[p];
        }
    }

    // (6) Total and divergence guard, before any parameter is touched.
    rec.total = total_loss(LossComponents{rec.sup, rec.ct, rec.hc, rec.lc}, lw, banks_full);
    rec.w_sup = lw.sup * rec.sup;
    rec.w_ct = lw.ct * rec.ct;
    rec.w_hc = banks_full ? lw.hc * rec.hc : 0.0;
    rec.w_lc = banks_full ? lw.lc * rec.lc : 0.0;
    if (!std::isfinite(rec.total)) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "non-finite loss at iteration %lld (sup=%g ct=%g hc=%g lc=%g)", iter_,
                      rec.sup, rec.ct, rec.hc, rec.lc);
        throw DivergenceError(msg);
    }

    // (7) One joint SGD-with-momentum step on every student.
    const Tensor empty;
    for (int p = 0; p < n; ++p) {
        ModelParams grads = zeros_like(pairs_[p].student);
        const Tensor& dl = lw.sup > 0 ? dlogits_l[p] : empty;
        const Tensor& dfl = dfeat_l[p];
        if (!dl.empty() || !dfl.empty()) {
            net_.backward(pairs_[p].student, cache_l[p], dl, dfl, grads);
        }
        if (do_unlabeled) {
            const Tensor& du = lw.ct > 0 ? dlogits_u[p] : empty;
            const Tensor& dfu = dfeat_u[p];
            if (!du.empty() || !dfu.empty()) {
                net_.backward(pairs_[p].student, cache_u[p], du, dfu, grads);
            }
        }
        for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
            Tensor& theta = pairs_[p].student.tensors[t].value;
            const Tensor& g = grads.tensors[t].value;
            Tensor& vel = velocity_[p].tensors[t].value;
            for (std::size_t i = 0; i < theta.numel(); ++i) {
                const double gi =
                    cfg_.weight_decay > 0 ? g[i] + cfg_.weight_decay * theta[i] : g[i];
                vel[i] = cfg_.momentum * vel[i] + gi;
                theta[i] -= rec.lr * vel[i];
            }
        }
    }

    // (8) EMA after the student step (absent for mutual and self-training).
    if (uses_ema()) {
        for (auto& pair : pairs_) ema_update(pair);
    }

    ++iter_;
    return rec;
}

std::vector<const ModelParams*> Trainer::eval_models() const {
    std::vector<const ModelParams*> models;
    if (cfg_.topology == Topology::kEnsemble || cfg_.eval_network == EvalNetwork::kEnsemble) {
        for (const auto& pair : pairs_) models.push_back(&pair.student);
    } else if (cfg_.eval_network == EvalNetwork::kTeacherA) {
        models.push_back(&pairs_[0].teacher);
    } else {
        models.push_back(&pairs_[0].student);
    }
    return models;
}

double Trainer::evaluate() const {
    if (data_.val.empty()) throw StateError("Trainer::evaluate: no validation data");
    const ConfusionMatrix cm = evaluate_model(net_, eval_models(), data_.val);
    return miou(cm).mean;
}

Checkpoint Trainer::make_checkpoint() const {
    Checkpoint ck;
    ck.iteration = iter_;
    ck.config_text = dump_config(cfg_);
    ck.rng_states = {{"labeled", rng_labeled_.serialize()},
                     {"unlabeled", rng_unlabeled_.serialize()},
                     {"bank", rng_bank_.serialize()}};
    for (int p = 0; p < cfg_.pairs; ++p) {
        const std::string prefix = "pair" + std::to_string(p) + ".";
        for (const auto& t : pairs_[p].student.tensors) {
            ck.tensors.emplace_back(prefix + "student." + t.name, t.value);
        }
        for (const auto& t : pairs_[p].teacher.tensors) {
            ck.tensors.emplace_back(prefix + "teacher." + t.name, t.value);
        }
        for (const auto& t : velocity_[p].tensors) {
            ck.tensors.emplace_back(prefix + "momentum." + t.name, t.value);
        }
    }
    ck.banks = banks_;
    return ck;
}

Trainer Trainer::from_checkpoint(const Checkpoint& ck, TrainData data) {
    const TrainConfig cfg = parse_config_text(ck.config_text, TrainConfig{});
    Trainer tr(cfg, std::move(data));
    tr.iter_ = ck.iteration;

    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : ck.tensors) by_name[name] = &tensor;
    auto restore = [&](const std::string& key, Tensor& dst) {
        const auto it = by_name.find(key);
        if (it == by_name.end()) throw DataError("checkpoint missing tensor " + key);
        if (!it->second->same_shape(dst)) {
            throw DataError("checkpoint tensor " + key + " has shape " + it->second->shape_str() +
                            ", expected " + dst.shape_str());
        }
        dst = *it->second;
    };
    for (int p = 0; p < cfg.pairs; ++p) {
        const std::string prefix = "pair" + std::to_string(p) + ".";
        for (auto& t : tr.pairs_[p].student.tensors) restore(prefix + "student." + t.name, t.value);
        for (auto& t : tr.pairs_[p].teacher.tensors) restore(prefix + "teacher." + t.name, t.value);
        for (auto& t : tr.velocity_[p].tensors) restore(prefix + "momentum." + t.name, t.value);
    }

    if (static_cast<int>(ck.banks.size()) != cfg.pairs) {
        throw DataError("checkpoint has " + std::to_string(ck.banks.size()) + " banks for " +
                        std::to_string(cfg.pairs) + " pairs");
    }
    for (const auto& bank : ck.banks) {
        if (bank.num_classes != cfg.backbone.num_classes || bank.capacity != cfg.bank_capacity ||
            bank.dim != cfg.bank_dim) {
            throw DataError("checkpoint bank geometry does not match the config");
        }
    }
    tr.banks_ = ck.banks;

    auto rng_state = [&](const char* name) -> const std::string& {
        for (const auto& [n, s] : ck.rng_states) {
            if (n == name) return s;
        }
        throw DataError("checkpoint missing rng stream \"" + std::string(name) + "\"");
    };
    tr.rng_labeled_.deserialize(rng_state("labeled"));
    tr.rng_unlabeled_.deserialize(rng_state("unlabeled"));
    tr.rng_bank_.deserialize(rng_state("bank"));
    return tr;
}

RunResult Trainer::run(const std::filesystem::path& run_dir) {
    std::filesystem::create_directories(run_dir);
    const std::filesystem::path log_path = run_dir / "metrics.jsonl";
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw DataError("cannot open metrics log: " + log_path.string());

    RunResult result;
    result.metrics_log = log_path;
    try {
        while (iter_ < cfg_.max_iters) {
            MetricsRecord rec = step();
            const long long done = iter_;
            const bool eval_now =
                !data_.val.empty() && ((cfg_.eval_interval > 0 && done % cfg_.eval_interval == 0) ||
                                       done == cfg_.max_iters);
            if (eval_now) {
                rec.miou = evaluate();
                result.final_miou = rec.miou;
            }
            // Evaluation records always land in the log, whatever the
            // log_interval; dropping them would hide the miou curve.
            if (rec.iter % cfg_.log_interval == 0 || rec.miou) {
                log << metrics_to_json(rec) << '\n' << std::flush;
            }
            if (cfg_.topology == Topology::kSelfTraining && done == phase1_iters()) {
                save_checkpoint(run_dir / "phase1.ckpt", make_checkpoint());
            }
            if (cfg_.checkpoint_interval > 0 && done % cfg_.checkpoint_interval == 0) {
                char name[40];
                std::snprintf(name, sizeof name, "checkpoint_%06lld.ckpt", done);
                save_checkpoint(run_dir / name, make_checkpoint());
            }
        }
    } catch (const DivergenceError& e) {
        nlohmann::ordered_json j;
        j["iter"] = iter_;
        j["event"] = "divergence";
        j["detail"] = e.what();
        log << j.dump() << '\n' << std::flush;
        throw;
    }

    result.iterations = iter_;
    result.final_checkpoint = run_dir / "final.ckpt";
    save_checkpoint(result.final_checkpoint, make_checkpoint());
    return result;
}

RunResult run_training(const TrainConfig& cfg, const std::filesystem::path& run_dir) {
    validate(cfg);
    if (cfg.data.dir.empty()) {
        throw ConfigError("TrainConfig.data.dir: required for run_training");
    }
    DatasetOnDisk train = read_dataset(cfg.data.dir);
    if (train.spec.num_classes != cfg.backbone.num_classes) {
        throw ConfigError("TrainConfig.backbone.num_classes: dataset has " +
                          std::to_string(train.spec.num_classes) + " classes, config says " +
                          std::to_string(cfg.backbone.num_classes));
    }
    TrainData data;
    data.train = std::move(train.samples);
    if (!cfg.data.val_dir.empty()) {
        DatasetOnDisk val = read_dataset(cfg.data.val_dir);
        if (val.spec.num_classes != cfg.backbone.num_classes) {
            throw ConfigError("TrainConfig.backbone.num_classes: val dataset has " +
                              std::to_string(val.spec.num_classes) + " classes");
        }
        data.val = std::move(val.samples);
    }
    Trainer trainer(cfg, std::move(data));
    return trainer.run(run_dir);
}

}  // namespace ctt
