#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fdepi {

// Portable random stream. Only the engine comes from <random> (its output
// sequence is fixed by the standard); the distributions are written out here
// so results do not depend on the standard library implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

    // Independent sub-stream keyed by (seed, index); used for per-restart and
    // per-replicate streams so results do not depend on scheduling.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        return Rng(mix(seed) ^ mix(index + 0x9e3779b97f4a7c15ULL));
    }

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1].
    double uniform_open_low() { return 1.0 - uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open_low();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // Symmetric Dirichlet(1): normalized unit exponentials.
    std::vector<double> dirichlet_flat(std::size_t k) {
        std::vector<double> w(k);
        double total = 0.0;
        for (auto& x : w) {
            x = -std::log(uniform_open_low());
            total += x;
        }
        for (auto& x : w) x /= total;
        return w;
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fdepi
