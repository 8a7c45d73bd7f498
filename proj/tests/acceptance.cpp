// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.
//
//   acceptance [--runs-dir=DIR] [--criterion=N[,M...]]
//
// Criteria 6-8 train 18 full desk-scale runs; their final scores are cached
// in the runs directory keyed by the resolved config, so re-running the
// gate is cheap. Criterion 10 shells out to the ctt binary named by the
// CTT_BIN environment variable.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctt/common.hpp"
#include "ctt/config.hpp"
#include "ctt/dataset.hpp"
#include "ctt/losses.hpp"
#include "ctt/memory_bank.hpp"
#include "ctt/model.hpp"
#include "ctt/rng.hpp"
#include "ctt/trainer.hpp"
#include "reference_losses.hpp"

namespace fs = std::filesystem;
using namespace ctt;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double rel_err(double got, double ref) {
    const double denom = std::max(std::abs(ref), 1e-12);
    return std::abs(got - ref) / denom;
}

// --- criterion 1: vectorized contrastive kernels vs scalar reference ---

Verdict criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_hc = 0.0, worst_lc = 0.0;
    Rng dims(1001);
    for (int i = 0; i < 200; ++i) {
        const int C = static_cast<int>(dims.next_int(2, 4));
        const int N = static_cast<int>(dims.next_int(1, 8));
        const int d = static_cast<int>(dims.next_int(2, 8));
        const int h = static_cast<int>(dims.next_int(1, 4));
        const int w = static_cast<int>(dims.next_int(1, 4));
        auto in = make_instance(C, N, d, 2000 + static_cast<std::uint64_t>(i), h, w);

        const double hc = hc_loss(in.features_a, in.assignments, in.mask, in.bank_a, 0.5, 1.0,
                                  nullptr)
                              .loss;
        const double hc_ref = hc_reference(in.features_a, in.assignments, in.mask, in.bank_a, 0.5);
        worst_hc = std::max(worst_hc, rel_err(hc, hc_ref));

        const double lc = lc_loss(in.features_a, in.features_b, in.assignments, in.mask, in.bank_a,
                                  in.bank_b, 0.5, 1.0, nullptr)
                              .loss;
        const double lc_ref = lc_reference(in.features_a, in.features_b, in.assignments, in.mask,
                                           in.bank_a, in.bank_b, 0.5);
        worst_lc = std::max(worst_lc, rel_err(lc, lc_ref));
    }
    const double dt = seconds_since(t0);
    const bool ok = worst_hc <= 1e-6 && worst_lc <= 1e-6 && dt < 10.0;
    return {ok, fmt("200 instances, max rel err hc %.2e lc %.2e, %.1f s", worst_hc, worst_lc, dt)};
}

// --- criterion 2: analytic vs central-difference gradients through a toy model ---

struct GradCheck {
    int total = 0;
    int within = 0;
};

void accumulate(GradCheck& gc, const ModelParams& analytic,
                const std::function<double(const ModelParams&)>& loss_of, ModelParams params) {
    const double h = 1e-4;
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        Tensor& value = params.tensors[t].value;
        const Tensor& grad = analytic.tensors[t].value;
        for (std::size_t i = 0; i < value.numel(); ++i) {
            const double orig = value[i];
            value[i] = orig + h;
            const double lp = loss_of(params);
            value[i] = orig - h;
            const double lm = loss_of(params);
            value[i] = orig;
            const double fd = (lp - lm) / (2 * h);
            const double rel =
                std::abs(grad[i] - fd) / std::max(1e-6, std::abs(grad[i]) + std::abs(fd));
            gc.within += (rel < 1e-3);
            ++gc.total;
        }
    }
}

Verdict criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    BackboneConfig bc;
    bc.feature_dim = 8;
    bc.stride = 2;
    bc.widths = {3, 4, 5};
    bc.num_classes = 3;
    bc.init_seed = 99;
    const Network net(bc);
    const ModelParams params = init_model(bc);
    std::size_t n_params = 0;
    for (const auto& t : params.tensors) n_params += t.value.numel();
    if (n_params > 1000) return {false, fmt("toy model has %zu > 1000 parameters", n_params)};

    Rng rng(7);
    Tensor images{1, 3, 8, 8};
    for (std::size_t i = 0; i < images.numel(); ++i) images[i] = rng.next_double(0.0, 1.0);
    LabelMap labels(1, 4, 4);
    for (auto& v : labels.v) v = static_cast<int>(rng.next_int(0, 2));

    // Frozen peer supplying pseudo-labels and LC positives.
    BackboneConfig bc_peer = bc;
    bc_peer.init_seed = 55;
    const ModelParams peer = init_model(bc_peer);
    const ForwardOutput peer_out = net.forward(peer, images);
    const LabelMap pseudo = make_pseudo_labels(peer_out);

    MemoryBank bank_a = new_bank(3, 4, 8), bank_b = new_bank(3, 4, 8);
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 4; ++i) {
            push(bank_a, c, {random_unit(8, rng)});
            push(bank_b, c, {random_unit(8, rng)});
        }
    }
    BinaryMask mask(1, 4, 4);
    for (auto& b : mask.v) b = rng.next_bool(0.7) ? 1 : 0;

    auto param_grads = [&](const LabelMap& target) {
        ForwardCache cache;
        const ForwardOutput out = net.forward(params, images, cache);
        Tensor dlogits{out.logits.dims()};
        softmax_ce_loss_grad(out.probs, target, 1.0, dlogits);
        ModelParams grads = zeros_like(params);
        net.backward(params, cache, dlogits, Tensor{}, grads);
        return grads;
    };
    auto feature_grads = [&](const Tensor& dfeat) {
        ForwardCache cache;
        net.forward(params, images, cache);
        ModelParams grads = zeros_like(params);
        net.backward(params, cache, Tensor{}, dfeat, grads);
        return grads;
    };

    std::vector<std::pair<const char*, GradCheck>> checks;

    {
        GradCheck gc;
        accumulate(gc, param_grads(labels),
                   [&](const ModelParams& p) {
                       return pixel_cross_entropy(net.forward(p, images).probs, labels);
                   },
                   params);
        checks.emplace_back("sup", gc);
    }
    {
        GradCheck gc;
        accumulate(gc, param_grads(pseudo),
                   [&](const ModelParams& p) {
                       return pixel_cross_entropy(net.forward(p, images).probs, pseudo);
                   },
                   params);
        checks.emplace_back("ct", gc);
    }
    {
        ForwardCache cache;
        const ForwardOutput out = net.forward(params, images, cache);
        Tensor dfeat{out.features.dims()};
        hc_loss(out.features, labels, mask, bank_a, 0.5, 1.0, &dfeat);
        GradCheck gc;
        accumulate(gc, feature_grads(dfeat),
                   [&](const ModelParams& p) {
                       return hc_loss(net.forward(p, images).features, labels, mask, bank_a, 0.5,
                                      1.0, nullptr)
                           .loss;
                   },
                   params);
        checks.emplace_back("hc", gc);
    }
    {
        ForwardCache cache;
        const ForwardOutput out = net.forward(params, images, cache);
        Tensor dfeat{out.features.dims()};
        lc_loss(out.features, peer_out.features, labels, mask, bank_a, bank_b, 0.5, 1.0, &dfeat);
        GradCheck gc;
        accumulate(gc, feature_grads(dfeat),
                   [&](const ModelParams& p) {
                       return lc_loss(net.forward(p, images).features, peer_out.features, labels,
                                      mask, bank_a, bank_b, 0.5, 1.0, nullptr)
                           .loss;
                   },
                   params);
        checks.emplace_back("lc", gc);
    }

    const double dt = seconds_since(t0);
    bool ok = dt < 120.0;
    std::string frac;
    for (const auto& [name, gc] : checks) {
        const double f = gc.total ? static_cast<double>(gc.within) / gc.total : 0.0;
        ok = ok && f >= 0.95;
        frac += fmt("%s %.1f%% ", name, 100.0 * f);
    }
    return {ok, fmt("%zu params, within-1e-3 fractions: %s(%.1f s)", n_params, frac.c_str(), dt)};
}

// --- criterion 3: exact-form checks ---

Verdict criterion3() {
    // Uniform prediction: CE = ln|C| for every label map.
    for (int C = 2; C <= 7; ++C) {
        Tensor probs{2, C, 3, 3};
        probs.fill(1.0 / C);
        LabelMap labels(2, 3, 3);
        Rng rng(static_cast<std::uint64_t>(C));
        for (auto& v : labels.v) v = static_cast<int>(rng.next_int(0, C - 1));
        labels.v[0] = kIgnoreLabel;
        const double ce = pixel_cross_entropy(probs, labels);
        if (std::abs(ce - std::log(C)) > 1e-6) {
            return {false, fmt("uniform CE with %d classes: %.9f vs ln C %.9f", C, ce,
                               std::log(C))};
        }
    }

    // EMA identity cases, bitwise.
    BackboneConfig bc;
    bc.feature_dim = 8;
    bc.stride = 2;
    bc.widths = {3, 4, 5};
    bc.num_classes = 3;
    bc.init_seed = 1;
    StudentTeacherPair pair{init_model(bc), init_model([&] {
        BackboneConfig b2 = bc;
        b2.init_seed = 2;
        return b2;
    }()), 1.0};
    const ModelParams teacher_before = pair.teacher;
    ema_update(pair);
    for (std::size_t t = 0; t < pair.teacher.tensors.size(); ++t) {
        for (std::size_t i = 0; i < pair.teacher.tensors[t].value.numel(); ++i) {
            if (pair.teacher.tensors[t].value[i] != teacher_before.tensors[t].value[i]) {
                return {false, "ema decay 1 modified the teacher"};
            }
        }
    }
    pair.ema_decay = 0.0;
    ema_update(pair);
    for (std::size_t t = 0; t < pair.teacher.tensors.size(); ++t) {
        for (std::size_t i = 0; i < pair.teacher.tensors[t].value.numel(); ++i) {
            if (pair.teacher.tensors[t].value[i] != pair.student.tensors[t].value[i]) {
                return {false, "ema decay 0 is not an exact copy of the student"};
            }
        }
    }

    // Mask truth tables, exhaustive over a 4x4 confidence grid including the
    // threshold itself (both inequalities are strict).
    const double phi = 0.75;
    const double grid[4] = {0.0, 0.5, 0.75, 1.0};
    Tensor conf_a{1, 4, 4}, conf_b{1, 4, 4};
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            conf_a.at3(0, y, x) = grid[y];
            conf_b.at3(0, y, x) = grid[x];
        }
    }
    const BinaryMask m_hc = hc_mask(conf_a, phi);
    const BinaryMask m_lc = lc_mask(m_hc, conf_a, conf_b);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            const int want_hc = grid[y] > phi ? 1 : 0;
            const int want_lc = (!want_hc && grid[y] < grid[x]) ? 1 : 0;
            if (m_hc.at(0, y, x) != want_hc || m_lc.at(0, y, x) != want_lc) {
                return {false, fmt("mask mismatch at conf_a=%g conf_b=%g: hc %d/%d lc %d/%d",
                                   grid[y], grid[x], m_hc.at(0, y, x), want_hc, m_lc.at(0, y, x),
                                   want_lc)};
            }
        }
    }
    return {true, "uniform CE, EMA identities and 4x4 mask truth tables all exact"};
}

// --- criterion 4: FIFO bank vs reference queue ---

Verdict criterion4() {
    const int C = 4, N = 16, d = 4;
    MemoryBank bank = new_bank(C, N, d);
    std::vector<std::deque<std::vector<double>>> ref(C);
    Rng rng(404);
    for (int op = 0; op < 10000; ++op) {
        const int cls = static_cast<int>(rng.next_int(0, C - 1));
        const int count = static_cast<int>(rng.next_int(0, 3));
        std::vector<std::vector<double>> batch;
        for (int i = 0; i < count; ++i) batch.push_back(random_unit(d, rng));
        push(bank, cls, batch);
        for (const auto& v : batch) {
            ref[static_cast<std::size_t>(cls)].push_back(v);
            if (ref[static_cast<std::size_t>(cls)].size() > static_cast<std::size_t>(N)) {
                ref[static_cast<std::size_t>(cls)].pop_front();
            }
        }
        for (int c = 0; c < C; ++c) {
            if (bank.queues[static_cast<std::size_t>(c)] != ref[static_cast<std::size_t>(c)]) {
                return {false, fmt("queue %d diverged from the reference at op %d", c, op)};
            }
        }
    }

    // Push-only trace: is_full may only switch false -> true.
    MemoryBank mono = new_bank(C, 4, d);
    bool was_full = false;
    for (int op = 0; op < 200; ++op) {
        push(mono, static_cast<int>(rng.next_int(0, C - 1)), {random_unit(d, rng)});
        const bool full = is_full(mono);
        if (was_full && !full) return {false, fmt("is_full flipped back at op %d", op)};
        was_full = full;
    }
    if (!was_full) return {false, "bank never filled in 200 pushes"};
    return {true, "10000 randomized pushes match the reference queue; is_full monotone"};
}

// --- criterion 5: HC/LC mask exclusivity on real forward passes ---

Verdict criterion5() {
    BackboneConfig bc;
    bc.feature_dim = 8;
    bc.stride = 2;
    bc.widths = {3, 4, 5};
    bc.num_classes = 4;
    bc.init_seed = 11;
    const Network net(bc);
    Rng rng(505);
    for (int pass = 0; pass < 50; ++pass) {
        BackboneConfig ba = bc, bb = bc;
        ba.init_seed = rng.next_u64();
        bb.init_seed = rng.next_u64();
        const ModelParams a = init_model(ba), b = init_model(bb);
        Tensor images{2, 3, 12, 12};
        for (std::size_t i = 0; i < images.numel(); ++i) images[i] = rng.next_double(0.0, 1.0);
        const ForwardOutput oa = net.forward(a, images);
        const ForwardOutput ob = net.forward(b, images);
        const BinaryMask m_hc = hc_mask(oa.confidence, 0.75);
        const BinaryMask m_lc = lc_mask(m_hc, oa.confidence, ob.confidence);
        for (std::size_t i = 0; i < m_hc.v.size(); ++i) {
            if (m_hc.v[i] && m_lc.v[i]) {
                return {false, fmt("masks overlap at pixel %zu of pass %d", i, pass)};
            }
        }
    }
    return {true, "m_A * m_(A,B) = 0 at every pixel over 50 forward passes"};
}

// --- criteria 6-8: desk-scale ordering runs ---

struct RunInfo {
    std::string name;
    TrainConfig cfg;
};

fs::path g_runs_dir = "acceptance-cache";

void ensure_dataset(const fs::path& dir, std::uint64_t seed, int count) {
    if (fs::exists(dir / "manifest")) return;
    SceneSpec spec;  // generator defaults: 96x96, 4 classes, jitter 0.25
    spec.seed = seed;
    write_dataset(dir, spec, count);
}

TrainConfig base_config() {
    TrainConfig cfg;  // desk defaults throughout
    cfg.data.dir = (g_runs_dir / "data-train").string();
    cfg.data.val_dir = (g_runs_dir / "data-val").string();
    return cfg;
}

// Trains (or loads) a run and returns its final validation mIoU. The cache
// key is the resolved config dump, so stale caches self-invalidate.
double final_miou(const RunInfo& run) {
    ensure_dataset(g_runs_dir / "data-train", 7, 800);
    ensure_dataset(g_runs_dir / "data-val", 8, 160);
    const fs::path run_dir = g_runs_dir / run.name;
    const fs::path cache = run_dir / "result.txt";
    const std::string key = dump_config(run.cfg);
    if (fs::exists(cache)) {
        std::ifstream in(cache);
        std::string stored((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
        const auto nl = stored.find('\n');
        if (nl != std::string::npos && stored.substr(nl + 1) == key) {
            return std::stod(stored.substr(0, nl));
        }
    }
    std::printf("  [training %s...]\n", run.name.c_str());
    std::fflush(stdout);
    const RunResult res = run_training(run.cfg, run_dir);
    if (!res.final_miou) throw StateError("run produced no final miou: " + run.name);
    std::ofstream out(cache, std::ios::trunc);
    out << fmt("%.17g", *res.final_miou) << "\n" << key;
    return *res.final_miou;
}

std::vector<double> seed_scores(const std::string& prefix,
                                const std::function<void(TrainConfig&)>& tweak) {
    std::vector<double> scores;
    for (std::uint64_t seed : {1, 2, 3}) {
        RunInfo run;
        run.name = prefix + "-s" + std::to_string(seed);
        run.cfg = base_config();
        run.cfg.seed = seed;
        tweak(run.cfg);
        scores.push_back(final_miou(run));
    }
    return scores;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += fmt("%.4f ", x);
    return s;
}

Verdict criterion6() {
    const auto sup = seed_scores("sup", [](TrainConfig& c) {
        c.topology = Topology::kSupervisedOnly;
    });
    const auto ctt = seed_scores("ctt", [](TrainConfig&) {});
    const double gap = mean(ctt) - mean(sup);
    return {gap >= 0.03,
            fmt("mean ctt %.4f (%s) vs mean sup %.4f (%s): gap %+.2f points", mean(ctt),
                list(ctt).c_str(), mean(sup), list(sup).c_str(), 100 * gap)};
}

Verdict criterion7() {
    const auto sup = seed_scores("sup", [](TrainConfig& c) {
        c.topology = Topology::kSupervisedOnly;
    });
    const auto supct = seed_scores("supct", [](TrainConfig& c) {
        c.weights.hc = 0.0;
        c.weights.lc = 0.0;
    });
    const auto suphclc = seed_scores("suphclc", [](TrainConfig& c) { c.weights.ct = 0.0; });
    int ct_wins = 0, hclc_wins = 0;
    for (int i = 0; i < 3; ++i) {
        ct_wins += (sup[static_cast<std::size_t>(i)] < supct[static_cast<std::size_t>(i)]);
        hclc_wins += (sup[static_cast<std::size_t>(i)] < suphclc[static_cast<std::size_t>(i)]);
    }
    return {ct_wins >= 2 && hclc_wins >= 2,
            fmt("sup < sup+ct in %d/3 seeds (%svs %s), sup < sup+hc+lc in %d/3 (%s)", ct_wins,
                list(sup).c_str(), list(supct).c_str(), hclc_wins, list(suphclc).c_str())};
}

Verdict criterion8() {
    const double tie = 0.005;  // 0.5 mIoU points
    const auto ctt = seed_scores("ctt", [](TrainConfig&) {});
    const auto meant = seed_scores("meant", [](TrainConfig& c) {
        c.topology = Topology::kMeanTeacher;
    });
    const auto mutual = seed_scores("mutual", [](TrainConfig& c) {
        c.topology = Topology::kMutual;
    });
    const bool ok = mean(ctt) >= mean(meant) - tie && mean(ctt) >= mean(mutual) - tie;
    return {ok, fmt("mean cross %.4f vs mean_teacher %.4f vs mutual %.4f (tie tol 0.5)",
                    mean(ctt), mean(meant), mean(mutual))};
}

// --- criterion 9: contrastive terms gated until both banks are full ---

Verdict criterion9() {
    int logs = 0, records = 0;
    std::vector<fs::path> files;
    if (fs::exists(g_runs_dir)) {
        for (const auto& entry : fs::recursive_directory_iterator(g_runs_dir)) {
            if (entry.path().filename() == "metrics.jsonl") files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        bool full_seen = false;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            if (j.contains("event")) continue;
            ++records;
            if (j.at("banks_full").get<bool>()) full_seen = true;
            if (!full_seen) {
                if (j.at("hc").get<double>() != 0.0 || j.at("lc").get<double>() != 0.0) {
                    return {false, fmt("%s iter %lld: hc/lc nonzero before banks full",
                                       path.string().c_str(), j.at("iter").get<long long>())};
                }
            }
        }
        ++logs;
    }
    if (logs == 0) return {false, "no metrics logs under the runs directory (run criterion 6 first)"};
    return {true, fmt("hc/lc exactly 0 pre-fill across %d logs (%d records)", logs, records)};
}

// --- criterion 10: byte-identical metrics logs via the CLI ---

Verdict criterion10() {
    const char* bin = std::getenv("CTT_BIN");
    if (!bin) return {false, "CTT_BIN is not set"};
    ensure_dataset(g_runs_dir / "data-train", 7, 800);
    const std::string flags = " --data.dir=" + (g_runs_dir / "data-train").string() +
                              " --max_iters=25 --seed=12 --force";
    for (const char* leg : {"det-a", "det-b"}) {
        const std::string cmd = std::string(bin) + " train --run-dir " +
                                (g_runs_dir / leg).string() + flags + " > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
            return {false, fmt("train exited with %d for %s", WEXITSTATUS(status), leg)};
        }
    }
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string log_a = slurp(g_runs_dir / "det-a" / "metrics.jsonl");
    const std::string log_b = slurp(g_runs_dir / "det-b" / "metrics.jsonl");
    if (log_a.empty() || log_a != log_b) {
        return {false, "metrics logs differ between identical runs"};
    }
    const bool ckpt_equal =
        slurp(g_runs_dir / "det-a" / "final.ckpt") == slurp(g_runs_dir / "det-b" / "final.ckpt");
    if (!ckpt_equal) return {false, "metrics logs match but final checkpoints differ"};
    return {true, fmt("25-iteration runs byte-identical (%zu-byte log and final checkpoint)",
                      log_a.size())};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--runs-dir=", 0) == 0) {
            g_runs_dir = arg.substr(11);
        } else if (arg.rfind("--criterion=", 0) == 0) {
            std::istringstream ss(arg.substr(12));
            std::string item;
            while (std::getline(ss, item, ',')) wanted.insert(std::stoi(item));
        } else {
            std::fprintf(stderr, "usage: acceptance [--runs-dir=DIR] [--criterion=N[,M...]]\n");
            return 2;
        }
    }
    fs::create_directories(g_runs_dir);

    const std::pair<int, Verdict (*)()> criteria[] = {
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
        {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10},
    };
    int failures = 0;
    for (const auto& [num, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(num)) continue;
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d: %s - %s\n", num, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    }
    if (failures) std::printf("%d criterion(s) failing\n", failures);
    return failures ? 1 : 0;
}
