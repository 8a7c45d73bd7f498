#pragma once

#include <deque>
#include <vector>

#include "ctt/model.hpp"
#include "ctt/rng.hpp"
#include "ctt/tensor.hpp"

namespace ctt {

/// Per-class FIFO queues of unit-norm feature vectors. Total storage is
/// bounded by num_classes * capacity * dim.
struct MemoryBank {
    int num_classes = 0;
    int capacity = 0;  // N
    int dim = 0;       // D
    std::vector<std::deque<std::vector<double>>> queues;
};

MemoryBank new_bank(int num_classes, int capacity, int dim);

struct CandidateFeature {
    std::vector<double> vec;  // unit-norm, dim D
    int cls = 0;
    double confidence = 0.0;
};

enum class SelectionMode { kRandom, kTopK };

/// Candidates are pixels of labeled data where the teacher's prediction
/// agrees with ground truth. Per class, at most k survive: a uniform random
/// draw (default) or the k most confident. Vectors are L2-normalized;
/// zero-norm features are skipped.
std::vector<std::vector<CandidateFeature>> select_candidates(const ForwardOutput& teacher_out,
                                                             const LabelMap& gt_labels_ds, int k,
                                                             SelectionMode mode, Rng& rng);

/// max(1, floor(num_labeled / capacity)).
int compute_k(long long num_labeled, int capacity);

/// Appends features to class `cls` in order, evicting oldest entries beyond
/// capacity.
void push(MemoryBank& bank, int cls, const std::vector<std::vector<double>>& features);

/// True iff every class queue holds exactly `capacity` entries.
bool is_full(const MemoryBank& bank);

/// All entries from every queue except class `cls`, as rows of an (M, D)
/// tensor; class-ascending, queue order within a class.
Tensor negatives(const MemoryBank& bank, int cls);

/// Class-c queue as rows of a (|Q_c|, D) tensor.
Tensor positives(const MemoryBank& bank, int cls);

}  // namespace ctt
