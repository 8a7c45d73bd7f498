#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ctt {

/// Deterministic random stream. The engine is std::mt19937_64 (its output
/// sequence is fixed by the standard); all draws are derived from raw 64-bit
/// engine output with portable arithmetic, so identical seeds give identical
/// draws on every platform. No std::*_distribution is used anywhere.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for (seed, index) pairs, e.g. per-sample generation.
    static Rng for_index(std::uint64_t seed, std::uint64_t index) {
        return Rng(mix(seed, index));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t rem = std::uint64_t(-n) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t x = engine_();
            if (x >= rem) return x % n;
        }
    }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    bool next_bool(double p = 0.5) { return next_double() < p; }

    /// Standard normal via the Marsaglia polar method (no trig, cached spare).
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// k distinct values drawn from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    /// Engine + spare-normal state as text, for checkpoint round-trips.
    std::string serialize() const {
        std::ostringstream os;
        os << engine_ << " " << (has_spare_ ? 1 : 0) << " ";
        os.precision(17);
        os << spare_;
        return os.str();
    }

    void deserialize(const std::string& text) {
        std::istringstream is(text);
        int spare_flag = 0;
        is >> engine_ >> spare_flag >> spare_;
        has_spare_ = (spare_flag != 0);
    }

private:
    // splitmix64 over (seed, index) to decorrelate per-index streams.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return x;
    }

    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    shuffle(pool);
    pool.resize(k);
    return pool;
}

}  // namespace ctt
