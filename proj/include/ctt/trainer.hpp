#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctt/checkpoint.hpp"
#include "ctt/config.hpp"
#include "ctt/dataset.hpp"
#include "ctt/losses.hpp"
#include "ctt/memory_bank.hpp"
#include "ctt/model.hpp"
#include "ctt/rng.hpp"

namespace ctt {

/// base_lr * (1 - iter/max_iters)^power. Throws std::out_of_range when
/// iter falls outside [0, max_iters] or max_iters < 1.
double poly_lr(double base_lr, long long iter, long long max_iters, double power);

/// One logged training step. Loss terms are unweighted sums over pairs;
/// w_* are the weighted contributions that add up to `total`.
struct MetricsRecord {
    long long iter = 0;
    double lr = 0.0;
    double sup = 0.0, ct = 0.0, hc = 0.0, lc = 0.0;
    double w_sup = 0.0, w_ct = 0.0, w_hc = 0.0, w_lc = 0.0;
    double total = 0.0;
    bool banks_full = false;
    std::vector<std::vector<double>> bank_fill;        // per pair, per class
    std::vector<double> sup_per_pair, ct_per_pair, hc_per_pair, lc_per_pair;
    std::optional<double> agreement;       // pair-0 vs pair-1 pseudo-labels
    std::optional<double> pseudo_quality;  // pseudo vs hidden gt, unlabeled batch
    std::optional<double> miou;            // attached when an eval ran
};

/// One JSONL line (no trailing newline); per-pair vectors stay in memory.
std::string metrics_to_json(const MetricsRecord& r);

struct TrainData {
    std::vector<Sample> train;
    std::vector<Sample> val;  // empty disables evaluation
};

struct RunResult {
    long long iterations = 0;
    std::optional<double> final_miou;
    std::filesystem::path final_checkpoint;
    std::filesystem::path metrics_log;
};

/// Algorithm 1 plus the baseline topologies. Deterministic and
/// single-threaded; copying a Trainer forks the full training state.
class Trainer {
public:
    Trainer(const TrainConfig& cfg, TrainData data);

    const TrainConfig& config() const { return cfg_; }
    long long iteration() const { return iter_; }
    const Network& network() const { return net_; }
    std::vector<StudentTeacherPair>& model_pairs() { return pairs_; }
    const std::vector<StudentTeacherPair>& model_pairs() const { return pairs_; }
    const std::vector<MemoryBank>& banks() const { return banks_; }
    const std::vector<int>& labeled_indices() const { return labeled_idx_; }
    const std::vector<int>& unlabeled_indices() const { return unlabeled_idx_; }

    /// One training iteration in the order of Algorithm 1. Throws
    /// DivergenceError on a non-finite loss, before touching parameters.
    MetricsRecord step();

    /// mIoU of the eval network on the val split (StateError if empty).
    double evaluate() const;

    Checkpoint make_checkpoint() const;
    static Trainer from_checkpoint(const Checkpoint& ck, TrainData data);

    /// Full loop: metrics log, periodic checkpoints, final checkpoint (the
    /// only one when max_iters = 0). On divergence the log gains a
    /// diagnostic record and the error is rethrown.
    RunResult run(const std::filesystem::path& run_dir);

private:
    struct Batch {
        Tensor images;
        LabelMap labels;  // full crop resolution; hidden gt for unlabeled
    };

    Batch draw_batch(const std::vector<int>& pool, int count, Rng& rng) const;
    void maybe_self_training_transition();
    long long phase1_iters() const { return cfg_.max_iters / 2; }
    bool uses_ema() const;
    bool unlabeled_phase_active() const;
    std::vector<const ModelParams*> eval_models() const;

    TrainConfig cfg_;
    Network net_;
    TrainData data_;
    std::vector<int> labeled_idx_, unlabeled_idx_;
    std::vector<StudentTeacherPair> pairs_;
    std::vector<ModelParams> velocity_;  // SGD momentum buffers, per pair
    std::vector<MemoryBank> banks_;
    Rng rng_labeled_, rng_unlabeled_, rng_bank_;
    AugmentConfig aug_;
    long long iter_ = 0;
};

/// Loads datasets per cfg.data, trains into run_dir. Config and I/O errors
/// surface before the first step.
RunResult run_training(const TrainConfig& cfg, const std::filesystem::path& run_dir);

}  // namespace ctt
