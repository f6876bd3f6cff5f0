#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "robreg/errors.hpp"

namespace robreg {

// Counter-based random stream (Philox 4x64, 10 rounds).
//
// The generator is keyed by (master_seed, stream_id) and walks a 256-bit
// counter, so streams are cheap to create from any thread and two streams
// with the same key produce the same sequence no matter where or when they
// are created. Distinct stream ids give statistically independent streams;
// simulation code derives one stream per replicate / chain / purpose and
// never shares a stream between concurrent tasks.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_{master_seed, stream_id} {}

    std::uint64_t master_seed() const noexcept { return key_[0]; }
    std::uint64_t stream_id() const noexcept { return key_[1]; }

    std::uint64_t next_u64() {
        if (buf_pos_ == 4) {
            refill();
        }
        return buf_[buf_pos_++];
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe to pass to log().
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    void refill() {
        // Philox 4x64-10 round constants (Salmon et al., Random123).
        constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
        constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
        constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
        constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

        std::uint64_t c0 = ctr_[0], c1 = ctr_[1], c2 = ctr_[2], c3 = ctr_[3];
        std::uint64_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const auto p0 = static_cast<unsigned __int128>(kMul0) * c0;
            const auto p1 = static_cast<unsigned __int128>(kMul1) * c2;
            const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
            const auto lo0 = static_cast<std::uint64_t>(p0);
            const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
            const auto lo1 = static_cast<std::uint64_t>(p1);
            c0 = hi1 ^ c1 ^ k0;
            c1 = lo1;
            c2 = hi0 ^ c3 ^ k1;
            c3 = lo0;
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        buf_[0] = c0;
        buf_[1] = c1;
        buf_[2] = c2;
        buf_[3] = c3;
        buf_pos_ = 0;
        if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) {
            ++ctr_[3];
        }
    }

    std::uint64_t key_[2];
    std::uint64_t ctr_[4] = {0, 0, 0, 0};
    std::uint64_t buf_[4] = {0, 0, 0, 0};
    int buf_pos_ = 4;
};

// N(mean, sd^2) via Box-Muller; sd == 0 returns mean exactly.
inline double sample_normal(RngStream& rng, double mean, double sd) {
    if (!std::isfinite(mean) || !std::isfinite(sd) || sd < 0.0) {
        throw InvalidParameterError("sample_normal requires finite mean and sd >= 0");
    }
    if (sd == 0.0) {
        return mean;
    }
    const double u1 = rng.uniform_pos();
    const double u2 = rng.uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    return mean + sd * z;
}

inline double sample_standard_normal(RngStream& rng) { return sample_normal(rng, 0.0, 1.0); }

// Gamma(shape, scale = 1) via Marsaglia-Tsang squeeze.
//
// For shape < 1 the draw is boosted through the identity
// G(shape) = G(shape + 1) * U^(1/shape) with U uniform on (0, 1], which keeps
// the squeeze applicable down to the Gamma(0.1, 0.1) hyperprior regime.
inline double sample_gamma(RngStream& rng, double shape) {
    if (!std::isfinite(shape) || shape <= 0.0) {
        throw InvalidParameterError("sample_gamma requires shape > 0");
    }
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(rng.uniform_pos(), 1.0 / shape);
        shape += 1.0;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = sample_standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_pos();
        if (u < 1.0 - 0.0331 * (x * x) * (x * x) ||
            std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            const double g = d * v * boost;
            // Keep the support strictly positive even if the boost underflows.
            return g > 0.0 ? g : std::numeric_limits<double>::min();
        }
    }
}

// One draw from Dirichlet(counts) as normalized unit-scale gamma variates.
inline std::vector<double> sample_dirichlet_counts(RngStream& rng,
                                                   const std::vector<long long>& counts) {
    if (counts.empty()) {
        throw InvalidParameterError("sample_dirichlet_counts requires at least one count");
    }
    std::vector<double> w(counts.size());
    double total = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] <= 0) {
            throw InvalidParameterError("sample_dirichlet_counts requires all counts >= 1");
        }
        w[k] = sample_gamma(rng, static_cast<double>(counts[k]));
        total += w[k];
    }
    for (double& v : w) {
        v /= total;
    }
    return w;
}

// loc + scale * T with T standard Student-t on df degrees of freedom.
inline double sample_student_t(RngStream& rng, double df, double loc, double scale) {
    if (!std::isfinite(df) || df <= 0.0 || !std::isfinite(scale) || scale <= 0.0 ||
        !std::isfinite(loc)) {
        throw InvalidParameterError("sample_student_t requires df > 0 and scale > 0");
    }
    const double z = sample_standard_normal(rng);
    const double chi2 = 2.0 * sample_gamma(rng, 0.5 * df);
    return loc + scale * z * std::sqrt(df / chi2);
}

} // namespace robreg
