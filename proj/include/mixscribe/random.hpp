#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mixscribe {

// Seeded uniform generator. The mapping from raw engine output to doubles is
// done by hand so streams are identical across standard libraries; results
// must not depend on which toolchain built the binary.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

    // uniform in [0, 1)
    double uniform01()
    {
        return static_cast<double>(engine_()) * (1.0 / 4294967296.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // standard normal, Box-Muller
    double gaussian()
    {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint32_t next_u32() { return engine_(); }

private:
    std::mt19937 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mixscribe
