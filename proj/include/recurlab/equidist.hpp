#pragma once

// Equidistribution diagnostics for Angle-valued sequences: exponential-sum
// (Weyl) magnitudes, exact star discrepancy, and averaged-magnitude limits.
//
// All exponential sums are accumulated as exact integers: e(x) is evaluated
// to a pair of int64 components at scale 2^62, and component sums live in
// __int128. Summation is therefore associative, so results are bit-identical
// at any thread count; chunking exists only to bound per-task latency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "recurlab/angle.hpp"
#include "recurlab/parallel.hpp"
#include "recurlab/setlab.hpp"

namespace recurlab {

// ---------------------------------------------------------------------------
// Unit-circle evaluation. e(x) = exp(2 pi i x) is computed from the top 64
// bits of the angle mantissa by splitting them into four 16-bit indices and
// multiplying entries of four precomputed tables:
//
//   e(x) ~ T0[b63..48] * T1[b47..32] * T2[b31..16] * T3[b15..0]
//
// where Tk[j] = round(2^62 * e(j / 2^(16(k+1)))). Each table entry is off by
// at most ~2^-61 (long double init), each of the three rescaling products
// truncates at most 2 low units per component, and discarding mantissa bits
// below the top 64 shifts the phase by < 2^-64. The total absolute error is
// below 2^-56; the documented envelope kEvalError = 2^-50 leaves headroom
// for magnitude rounding downstream.

namespace unitcircle {

inline constexpr int kScaleBits = 62;
inline constexpr double kScale = 4611686018427387904.0; // 2^62
inline constexpr double kEvalError = 8.881784197001252e-16; // 2^-50

struct Z64 {
    std::int64_t re = 0;
    std::int64_t im = 0;
};

inline Z64 cmul(Z64 a, Z64 b) {
    __int128 re = (__int128)a.re * b.re - (__int128)a.im * b.im;
    __int128 im = (__int128)a.re * b.im + (__int128)a.im * b.re;
    return Z64{(std::int64_t)(re >> kScaleBits), (std::int64_t)(im >> kScaleBits)};
}

namespace detail {

struct Tables {
    std::vector<Z64> level[4];
    Tables() {
        const long double tau = 6.28318530717958647692528676655900577L;
        for (int k = 0; k < 4; ++k) {
            level[k].resize(std::size_t(1) << 16);
            long double step = std::ldexp(tau, -16 * (k + 1));
            for (std::uint32_t j = 0; j < (std::uint32_t(1) << 16); ++j) {
                long double a = step * j;
                level[k][j] = Z64{(std::int64_t)std::llround(std::cos(a) * 0x1p62L),
                                  (std::int64_t)std::llround(std::sin(a) * 0x1p62L)};
            }
        }
    }
};

inline const Tables& tables() {
    static const Tables t;
    return t;
}

} // namespace detail

// Evaluate e(x) where x is given as the top 64 bits of a turn.
inline Z64 eval_top64(std::uint64_t x) {
    const auto& t = detail::tables();
    Z64 z = t.level[0][x >> 48];
    z = cmul(z, t.level[1][(x >> 32) & 0xffff]);
    z = cmul(z, t.level[2][(x >> 16) & 0xffff]);
    z = cmul(z, t.level[3][x & 0xffff]);
    return z;
}

inline std::uint64_t top64(const Angle& a) {
    if (a.frac_bits >= 64) return (a.mantissa >> (a.frac_bits - 64)).convert_to<std::uint64_t>();
    return a.mantissa.convert_to<std::uint64_t>() << (64 - a.frac_bits);
}

inline Z64 eval(const Angle& a) { return eval_top64(top64(a)); }

} // namespace unitcircle

// ---------------------------------------------------------------------------
// Weyl sums.

struct Harmonic {
    long long freq = 0;
    double magnitude = 0.0; // |(1/N) sum e(freq * x_n)|, clamped to [0,1]
    double err = 0.0;       // evaluation-error envelope for the magnitude
};

struct WeylReport {
    long long N = 0;
    std::vector<Harmonic> harmonics;
};

// A sequence that can be re-instantiated at any start index, so chunks can
// seed their own streams.
struct SequenceSpec {
    bool is_gq = false;
    IntegerPolynomial poly;
    Angle alpha;
    GeneralizedQuadratic gq;

    AngleStream at(const BigInt& start) const {
        return is_gq ? gq_stream(gq, start) : poly_stream(poly, alpha, start);
    }
    long frac_bits() const { return at(1).frac_bits(); }
};

inline SequenceSpec poly_sequence(IntegerPolynomial p, Angle a) {
    SequenceSpec s;
    s.poly = std::move(p);
    s.alpha = std::move(a);
    return s;
}

inline SequenceSpec gq_sequence(GeneralizedQuadratic q) {
    SequenceSpec s;
    s.is_gq = true;
    s.gq = std::move(q);
    return s;
}

namespace detail {

// err_ulps / 2^bits as a double, rounded up one quantum; saturates at 1
// (a full-turn error bound carries no information anyway).
inline double ulps_to_real(const BigInt& err_ulps, long bits) {
    if (err_ulps >= pow2(bits)) return 1.0;
    BigInt scaled = bits > 64 ? BigInt(err_ulps >> (bits - 64)) : BigInt(err_ulps << (64 - bits));
    return scaled.convert_to<double>() * 0x1p-64 + 0x1p-64;
}

struct ExactSum {
    __int128 re = 0;
    __int128 im = 0;
};

// |re + i im| / (N * 2^62), rounded down at the integer sqrt. The result of
// the division is clamped: per-point table error can push the raw quotient a
// hair above 1 while the true magnitude never exceeds it.
inline double exact_magnitude(const ExactSum& s, long long N) {
    BigInt re = bigint_from_i128(s.re), im = bigint_from_i128(s.im);
    BigInt norm = isqrt_floor(re * re + im * im);
    double mag = norm.convert_to<double>() / (static_cast<double>(N) * unitcircle::kScale);
    return std::min(mag, 1.0);
}

} // namespace detail

// Magnitudes of (1/N) sum_{n=start}^{start+N-1} e(freq * x_n) for each
// requested frequency. Angle errors enter the reported err field only; the
// magnitudes themselves are exact functions of the represented mantissas.
inline WeylReport weyl_sum(const SequenceSpec& seq, long long N,
                           const std::vector<long long>& freqs,
                           const ParallelContext& ctx = {}, const BigInt& start = 1) {
    if (N < 1) throw std::invalid_argument("weyl_sum: N must be >= 1");
    if (freqs.empty()) throw std::invalid_argument("weyl_sum: no frequencies given");
    for (long long f : freqs)
        if (f == 0) throw std::invalid_argument("weyl_sum: frequency 0 is excluded");

    const std::size_t K = freqs.size();
    const long step = effective_chunk(ctx);
    const long nchunks = (long)((N + step - 1) / step);

    struct Partial {
        std::vector<detail::ExactSum> sums;
        BigInt max_err;
    };
    std::vector<Partial> parts((std::size_t)nchunks);

    parallel_chunks(1, (long)N + 1, ctx, [&](long lo, long hi) {
        Partial p;
        p.sums.resize(K);
        AngleStream s = seq.at(start + (lo - 1));
        for (long n = lo; n < hi; ++n) {
            Angle x = s.value();
            for (std::size_t k = 0; k < K; ++k) {
                Angle y = angle_mul_int(x, freqs[k]);
                if (y.err_ulps > p.max_err) p.max_err = y.err_ulps;
                unitcircle::Z64 z = unitcircle::eval(y);
                p.sums[k].re += z.re;
                p.sums[k].im += z.im;
            }
            s.advance();
        }
        parts[(std::size_t)((lo - 1) / step)] = std::move(p);
    });

    std::vector<detail::ExactSum> total(K);
    BigInt max_err = 0;
    for (const Partial& p : parts) {
        for (std::size_t k = 0; k < K; ++k) {
            total[k].re += p.sums[k].re;
            total[k].im += p.sums[k].im;
        }
        if (p.max_err > max_err) max_err = p.max_err;
    }

    double err = unitcircle::kEvalError +
                 6.2831853071795865 * detail::ulps_to_real(max_err, seq.frac_bits());

    WeylReport out;
    out.N = N;
    out.harmonics.reserve(K);
    for (std::size_t k = 0; k < K; ++k)
        out.harmonics.push_back(Harmonic{freqs[k], detail::exact_magnitude(total[k], N), err});
    return out;
}

// ---------------------------------------------------------------------------
// Star discrepancy, exact. D*_N = max_i max(i/N - x_(i), x_(i) - (i-1)/N)
// over the sorted points; dstar_num / dstar_den reproduce it as an exact
// rational with denominator N * 2^frac_bits.

struct DiscrepancyReport {
    long long N = 0;
    double dstar = 0.0;
    BigInt dstar_num;
    BigInt dstar_den;
    TorusWindow window;   // [0, x_(i)] attaining the maximum
    long long at_rank = 0; // the i above, 1-based
};

inline DiscrepancyReport star_discrepancy(const SequenceSpec& seq, long long N,
                                          const ParallelContext& ctx = {},
                                          const BigInt& start = 1) {
    if (N < 1) throw std::invalid_argument("star_discrepancy: N must be >= 1");
    if (N > 100000000) throw std::invalid_argument("star_discrepancy: N exceeds the 1e8 memory bound");

    std::vector<BigInt> pts((std::size_t)N);
    parallel_chunks(1, (long)N + 1, ctx, [&](long lo, long hi) {
        AngleStream s = seq.at(start + (lo - 1));
        for (long n = lo; n < hi; ++n) {
            pts[(std::size_t)(n - 1)] = s.value().mantissa;
            s.advance();
        }
    });
    std::sort(pts.begin(), pts.end());

    long bits = seq.frac_bits();
    BigInt one = pow2(bits);
    BigInt best = -1, best_len = 0;
    long long best_i = 1;
    for (long long i = 1; i <= N; ++i) {
        const BigInt& m = pts[(std::size_t)(i - 1)];
        BigInt up = i * one - N * m;        // i/N - x_(i), scaled by N*2^bits
        BigInt down = N * m - (i - 1) * one; // x_(i) - (i-1)/N, same scale
        BigInt cand = up > down ? up : down;
        if (cand > best) {
            best = cand;
            best_len = m;
            best_i = i;
        }
    }

    DiscrepancyReport r;
    r.N = N;
    r.dstar_num = best;
    r.dstar_den = N * one;
    r.dstar = best.convert_to<double>() / r.dstar_den.convert_to<double>();
    r.window = TorusWindow::from_bounds(Angle{0, bits, 0}, Angle{best_len, bits, 0});
    r.at_rank = best_i;
    return r;
}

// ---------------------------------------------------------------------------
// Averaged-magnitude (D-lim surrogate): (1/N) sum |a_n| with checkpoints at
// powers of ten, so a decreasing trend is visible in one pass. Caller
// guarantees |a_n| <= 1; a violation is rejected rather than clamped.

struct DlimReport {
    long long N = 0;
    double value = 0.0;
    std::vector<std::pair<long long, double>> ladder;
};

inline DlimReport dlim_estimate(const std::function<double(long long)>& a, long long N) {
    if (N < 1) throw std::invalid_argument("dlim_estimate: N must be >= 1");
    DlimReport r;
    r.N = N;
    double acc = 0.0;
    long long next_mark = 10;
    for (long long n = 1; n <= N; ++n) {
        double v = std::fabs(a(n));
        if (v > 1.0 + 1e-9) {
            std::ostringstream os;
            os << "dlim_estimate: |a_n| exceeds 1 at n=" << n;
            throw std::invalid_argument(os.str());
        }
        acc += v;
        if (n == next_mark) {
            r.ladder.emplace_back(n, acc / (double)n);
            next_mark *= 10;
        }
    }
    r.value = acc / (double)N;
    if (r.ladder.empty() || r.ladder.back().first != N) r.ladder.emplace_back(N, r.value);
    return r;
}

// True when successive ladder values never grow by more than the slack
// factor, e.g. slack 0.2 tolerates a 20% bounce.
inline bool ladder_non_increasing(const std::vector<std::pair<long long, double>>& ladder,
                                  double slack) {
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i].second > ladder[i - 1].second * (1.0 + slack)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// |(1/N) sum e([n alpha] n beta + p(n))| for a quadratic p(n) = qa n^2 +
// qb n + qc. The underlying statement needs 1, alpha, beta rationally
// independent; that is undecidable from finite data, so the report only
// flags inputs that are provably rational (exact dyadics, err 0). Flagged
// runs still compute: they are documented as out-of-theorem diagnostics.

struct LemmaLpReport {
    long long N = 0;
    Harmonic harmonic;
    bool out_of_theorem = false;
};

inline LemmaLpReport lemma_Lp_check(const Angle& alpha, const Angle& beta, const Angle& qa,
                                    const Angle& qb, const Angle& qc, long long N,
                                    const ParallelContext& ctx = {}) {
    GeneralizedQuadratic g = make_generalized_quadratic({{alpha, beta}}, qa, qb, qc);
    WeylReport w = weyl_sum(gq_sequence(g), N, {1}, ctx);
    LemmaLpReport r;
    r.N = N;
    r.harmonic = w.harmonics[0];
    r.out_of_theorem = alpha.err_ulps == 0 || beta.err_ulps == 0;
    return r;
}

// ---------------------------------------------------------------------------
// Weyl magnitudes of (r^2 gamma + r delta) over the first N members r of a
// set, at frequencies 1..3. Each value is evaluated directly from the
// member, so the result depends only on the set and the two angles.

struct Main2Report {
    WeylReport weyl;
    long long members_used = 0;
    bool out_of_theorem = false; // gamma and delta both provably rational
};

inline Main2Report main2_condition_i_check(const IntegerSet& R, const Angle& gamma,
                                           const Angle& delta, long long N,
                                           const ParallelContext& ctx = {}) {
    if (N < 1) throw std::invalid_argument("main2_condition_i_check: N must be >= 1");
    std::vector<long> mem = R.members();
    if (mem.empty()) throw std::invalid_argument("main2_condition_i_check: set is empty");
    if ((long long)mem.size() > N) mem.resize((std::size_t)N);
    const long M = (long)mem.size();

    constexpr std::size_t K = 3;
    const long long kFreqs[K] = {1, 2, 3};
    const long step = effective_chunk(ctx);
    const long nchunks = (M + step - 1) / step;

    struct Partial {
        detail::ExactSum sums[K];
        BigInt max_err;
    };
    std::vector<Partial> parts((std::size_t)nchunks);

    parallel_chunks(0, M, ctx, [&](long lo, long hi) {
        Partial p;
        for (long idx = lo; idx < hi; ++idx) {
            BigInt r = mem[(std::size_t)idx];
            Angle x = angle_add(angle_mul_int(gamma, r * r), angle_mul_int(delta, r));
            for (std::size_t k = 0; k < K; ++k) {
                Angle y = angle_mul_int(x, kFreqs[k]);
                if (y.err_ulps > p.max_err) p.max_err = y.err_ulps;
                unitcircle::Z64 z = unitcircle::eval(y);
                p.sums[k].re += z.re;
                p.sums[k].im += z.im;
            }
        }
        parts[(std::size_t)(lo / step)] = std::move(p);
    });

    detail::ExactSum total[K];
    BigInt max_err = 0;
    for (const Partial& p : parts) {
        for (std::size_t k = 0; k < K; ++k) {
            total[k].re += p.sums[k].re;
            total[k].im += p.sums[k].im;
        }
        if (p.max_err > max_err) max_err = p.max_err;
    }

    long bits = std::max(gamma.frac_bits, delta.frac_bits);
    double err = unitcircle::kEvalError + 6.2831853071795865 * detail::ulps_to_real(max_err, bits);

    Main2Report out;
    out.members_used = M;
    out.out_of_theorem = gamma.err_ulps == 0 && delta.err_ulps == 0;
    out.weyl.N = M;
    for (std::size_t k = 0; k < K; ++k)
        out.weyl.harmonics.push_back(Harmonic{kFreqs[k], detail::exact_magnitude(total[k], M), err});
    return out;
}

} // namespace recurlab
