#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace mcr {

/// SplitMix64 finalizer; used to derive independent stream seeds from
/// (master_seed, ids...) so parallel trials never share an engine state.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = mix64(master);
    for (std::uint64_t id : ids) h = mix64(h ^ mix64(id));
    return h;
}

/// Seeded random stream. All transforms (uniform, normal, subsets) are
/// implemented on top of the raw 64-bit engine output, so two runs with the
/// same seed produce identical draws independent of the standard library's
/// distribution internals.
class StreamRng {
  public:
    explicit StreamRng(std::uint64_t seed) : eng_(seed) {}

    static StreamRng from(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
        return StreamRng(derive_stream(master, ids));
    }
    static StreamRng from(std::uint64_t master, std::uint64_t a) { return from(master, {a}); }
    static StreamRng from(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
        return from(master, {a, b});
    }
    static StreamRng from(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
        return from(master, {a, b, c});
    }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; one spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Symmetric Bernoulli sign, +1 or -1.
    double sign() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("StreamRng::below: bound must be positive");
        return next_u64() % bound;
    }

    /// Uniformly random k-subset of {0, ..., n-1}, in selection order.
    std::vector<Eigen::Index> subset(Eigen::Index n, Eigen::Index k) {
        if (k < 0 || k > n) throw std::invalid_argument("StreamRng::subset: need 0 <= k <= n");
        std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
        std::vector<Eigen::Index> out(static_cast<std::size_t>(k));
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto j = i + static_cast<Eigen::Index>(below(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
        }
        return out;
    }

    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mcr
