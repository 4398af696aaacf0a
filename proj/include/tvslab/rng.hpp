#pragma once

// Counter-based random numbers for reproducible parallel Monte Carlo.
//
// The generator is Philox4x32 with 10 rounds: a keyed bijection of a 128-bit
// counter producing 4x32 random bits per invocation.  Streams are keyed as
// (master_seed -> key, task_index -> counter words 2..3, draw -> words 0..1),
// so any parallel schedule of tasks sees the same numbers as a serial run.
// Known-answer vectors for the core bijection are pinned in the test suite.
//
// Two normal variates are provided: a Box-Muller path (two 53-bit uniforms
// per pair, used where sample counts are moderate) and a 128-layer ziggurat
// (about one 32-bit word per variate, used in the Brownian exit kernel where
// billions of increments are needed).  Both are exact samplers of N(0,1) up
// to floating-point rounding; consumers of a stream are sequential, so either
// choice is reproducible.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tvslab {

struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Counter encrypt(Counter c, Key k) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t(kMul0) * c[0];
            const std::uint64_t p1 = std::uint64_t(kMul1) * c[2];
            const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
            const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
            c = Counter{hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return c;
    }
};

class CounterRng {
  public:
    CounterRng(std::uint64_t master_seed, std::uint64_t task_index)
        : key_{std::uint32_t(master_seed), std::uint32_t(master_seed >> 32)},
          task_lo_(std::uint32_t(task_index)), task_hi_(std::uint32_t(task_index >> 32)) {}

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    // Uniform in the open interval (0,1) with full double mantissa.
    double uniform() {
        const std::uint64_t hi = next_u32(), lo = next_u32();
        const std::uint64_t x = (hi << 32) | lo;
        return (double(x >> 11) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller; consumes one Philox block per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double m = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = m * std::sin(t);
        have_spare_ = true;
        return m * std::cos(t);
    }

    // Ziggurat; amortizes to about one 32-bit word per variate.
    double normal_fast() {
        const Zig& z = zig();
        for (;;) {
            const std::int32_t j = std::int32_t(next_u32());
            const std::uint32_t i = std::uint32_t(j) & 127u;
            const std::uint32_t aj = j >= 0 ? std::uint32_t(j) : std::uint32_t(-(std::int64_t)j);
            if (aj < z.kn[i]) return j * z.wn[i];
            if (i == 0) {  // tail beyond x = r
                double x, y;
                do {
                    x = -std::log(uniform()) / z.r;
                    y = -std::log(uniform());
                } while (y + y < x * x);
                return j > 0 ? z.r + x : -(z.r + x);
            }
            const double x = j * z.wn[i];
            if (z.fn[i] + uniform() * (z.fn[i - 1] - z.fn[i]) < std::exp(-0.5 * x * x))
                return x;
        }
    }

    std::uint64_t draws_consumed() const { return draw_; }

  private:
    void refill() {
        const Philox4x32::Counter c{std::uint32_t(draw_), std::uint32_t(draw_ >> 32),
                                    task_lo_, task_hi_};
        buf_ = Philox4x32::encrypt(c, key_);
        ++draw_;
        pos_ = 0;
    }

    struct Zig {
        double r = 3.442619855899;
        std::uint32_t kn[128];
        double wn[128], fn[128];
        Zig() {
            const double m1 = 2147483648.0;  // 2^31
            double dn = r, tn = r;
            const double vn = 9.91256303526217e-3;
            double q = vn / std::exp(-0.5 * dn * dn);
            kn[0] = std::uint32_t((dn / q) * m1);
            kn[1] = 0;
            wn[0] = q / m1;
            wn[127] = dn / m1;
            fn[0] = 1.0;
            fn[127] = std::exp(-0.5 * dn * dn);
            for (int i = 126; i >= 1; --i) {
                dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
                kn[i + 1] = std::uint32_t((dn / tn) * m1);
                tn = dn;
                fn[i] = std::exp(-0.5 * dn * dn);
                wn[i] = dn / m1;
            }
        }
    };
    static const Zig& zig() {
        static const Zig z;
        return z;
    }

    Philox4x32::Key key_;
    std::uint32_t task_lo_, task_hi_;
    std::uint64_t draw_ = 0;
    Philox4x32::Counter buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace tvslab
