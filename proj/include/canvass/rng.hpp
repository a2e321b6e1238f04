#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace canvass {

/// All randomness in this project flows through std::mt19937_64 seeded per
/// operation invocation. Results are reproducible for a fixed seed within one
/// build; bit equality across standard library implementations is not
/// promised (distribution adapters below avoid std:: distribution objects so
/// behavior only depends on the engine itself).
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next() { return engine_(); }

    /// Uniform in [0,1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, bound). Rejection-sampled, bound > 0.
    uint64_t below(uint64_t bound) {
        const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound);
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Box-Muller normal deviate.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace canvass
