#pragma once

// Combinatorial recurrence machinery: progression-witness search over
// membership bitsets, exact multi-arc rotation measures and their
// obstruction scans, telescoping extraction of fractional parts from
// witnesses, and empirical uniformity profiles over set families.

#include <algorithm>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "recurlab/angle.hpp"
#include "recurlab/parallel.hpp"
#include "recurlab/setlab.hpp"

namespace recurlab {

namespace detail {

// num / 2^bits as a double for 0 <= num <= 2^bits.
inline double fixed_ratio(const BigInt& num, long bits) {
    if (num >= pow2(bits)) return 1.0;
    BigInt m = bits > 64 ? BigInt(num >> (bits - 64)) : BigInt(num << (64 - bits));
    return static_cast<double>(m.convert_to<std::uint64_t>()) * 0x1p-64;
}

// Distance from the represented value to 0 on the circle, in ulps.
inline BigInt circle_dist_ulps(const Angle& a) {
    BigInt one = pow2(a.frac_bits);
    return a.mantissa * 2 > one ? BigInt(one - a.mantissa) : a.mantissa;
}

inline void require_exact_tolerance(const Angle& eps, const char* who) {
    if (eps.err_ulps != 0)
        throw std::invalid_argument(std::string(who) + ": tolerance must be exact (err_ulps == 0)");
    if (eps.mantissa == 0)
        throw std::invalid_argument(std::string(who) + ": tolerance must be positive");
}

// True when the full error interval of x lies within distance eps/den of 0.
inline bool certified_near_zero(const Angle& x, const Angle& eps, long den) {
    BigInt worst = circle_dist_ulps(x) + x.err_ulps;
    return worst * pow2(eps.frac_bits) * den <= eps.mantissa * pow2(x.frac_bits);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Witness search. A witness for (lambda, r, ell) is m with
// m, m+r, ..., m+ell*r all in lambda; equivalently a surviving bit of
// lambda & (lambda >> r) & ... & (lambda >> ell*r).

enum class WitnessMode { First, CountAll };

struct WitnessQuery {
    IntegerSet lambda{1};
    IntegerSet differences{1}; // candidate r values; bitsets start at 1, so 0 is excluded by construction
    int ell = 1;
    WitnessMode mode = WitnessMode::First;
};

struct Witness {
    long m = 0;
    long r = 0;
    std::vector<long> terms; // m, m+r, ..., m+ell*r
};

inline Witness make_witness(long m, long r, int ell) {
    Witness w;
    w.m = m;
    w.r = r;
    w.terms.reserve((std::size_t)ell + 1);
    for (int j = 0; j <= ell; ++j) w.terms.push_back(m + j * r);
    return w;
}

struct WitnessSearchResult {
    std::optional<Witness> witness;            // First: least (r, m) in lexicographic order
    std::vector<std::pair<long, long>> counts; // CountAll: (r, c(r)), ascending r
    long long total_count = 0;
};

inline WitnessSearchResult witness_search(const WitnessQuery& q, const ParallelContext& ctx = {}) {
    if (q.ell < 1) throw std::invalid_argument("witness_search: ell must be >= 1");
    if (q.differences.horizon() > q.lambda.horizon())
        throw std::invalid_argument("witness_search: differences horizon exceeds lambda horizon");

    std::vector<long> rs = q.differences.members();
    WitnessSearchResult out;

    auto chain = [&](long r) {
        IntegerSet acc = q.lambda;
        for (int j = 1; j <= q.ell; ++j) acc.and_shifted_down(q.lambda, (long)j * r);
        return acc;
    };

    if (q.mode == WitnessMode::First) {
        for (long r : rs) {
            long m = chain(r).first_member();
            if (m != 0) {
                out.witness = make_witness(m, r, q.ell);
                return out;
            }
        }
        return out;
    }

    out.counts.assign(rs.size(), {});
    parallel_chunks(0, (long)rs.size(), ctx, [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) out.counts[(std::size_t)i] = {rs[(std::size_t)i], chain(rs[(std::size_t)i]).count()};
    });
    for (const auto& [r, c] : out.counts) out.total_count += c;
    return out;
}

// ---------------------------------------------------------------------------
// Rotation arc systems. The measure of arc ∩ (arc - r beta) ∩ ... ∩
// (arc - ell r beta) is computed exactly: the intersection of closed arcs
// with fixed-point endpoints is a finite union of arcs whose measure is a
// sum of endpoint gaps. Endpoint error from beta is handled by reporting
// certified lower and upper bounds from shrunken and grown arcs.

struct ArcSystem {
    Angle beta;
    TorusWindow arc;
};

struct MultiMeasure {
    BigInt ulps;     // intersection measure at the represented shifts
    BigInt lo_ulps;  // certified lower bound under rotation error
    BigInt hi_ulps;  // certified upper bound
    long frac_bits = 1;

    double value() const { return detail::fixed_ratio(ulps, frac_bits); }
    double lo() const { return detail::fixed_ratio(lo_ulps, frac_bits); }
    double hi() const { return detail::fixed_ratio(hi_ulps, frac_bits); }
};

namespace detail {

// Measure of the common intersection of closed arcs [s, s+l] on a circle of
// circumference `one`. Arcs with l >= one cover everything. Breakpoints cut
// the circle into gaps over which coverage is constant; gaps covered by all
// arcs are summed. Callers pass pre-doubled coordinates so that gap
// midpoints are integers.
inline BigInt arcs_intersection_measure(const std::vector<std::pair<BigInt, BigInt>>& arcs,
                                        const BigInt& one) {
    std::vector<BigInt> cuts;
    for (const auto& [s, l] : arcs) {
        if (l >= one) continue;
        cuts.push_back(s);
        BigInt e = s + l;
        if (e >= one) e -= one;
        cuts.push_back(std::move(e));
    }
    if (cuts.empty()) return one;
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    BigInt covered = 0;
    for (std::size_t k = 0; k < cuts.size(); ++k) {
        BigInt a = cuts[k];
        BigInt b = k + 1 < cuts.size() ? cuts[k + 1] : BigInt(cuts[0] + one);
        BigInt gap = b - a;
        if (gap == 0) continue;
        BigInt mid = a + gap / 2;
        bool in_all = true;
        for (const auto& [s, l] : arcs) {
            if (l >= one) continue;
            BigInt d = (mid - s) % one;
            if (d < 0) d += one;
            if (d > l) {
                in_all = false;
                break;
            }
        }
        if (in_all) covered += gap;
    }
    return covered;
}

} // namespace detail

inline MultiMeasure rotation_multi_measure(const ArcSystem& sys, long long r, int ell) {
    if (r == 0) throw std::invalid_argument("rotation_multi_measure: r must be nonzero");
    if (ell < 1) throw std::invalid_argument("rotation_multi_measure: ell must be >= 1");
    if (sys.arc.length() == 0 || sys.arc.is_full())
        throw std::invalid_argument("rotation_multi_measure: arc measure must lie strictly inside (0,1)");

    long bits = std::max(sys.arc.frac_bits(), sys.beta.frac_bits);
    BigInt one = pow2(bits);
    BigInt start = sys.arc.start() << (bits - sys.arc.frac_bits());
    BigInt len = sys.arc.length() << (bits - sys.arc.frac_bits());
    Angle beta = with_frac_bits(sys.beta, bits);
    BigInt step = beta.mantissa * r % one;
    if (step < 0) step += one;
    BigInt step_err = beta.err_ulps * (r < 0 ? -r : r);

    // Everything is doubled so gap midpoints stay integral; measures halve back.
    BigInt one2 = one << 1;
    std::vector<std::pair<BigInt, BigInt>> exact, shrunk, grown;
    for (int j = 0; j <= ell; ++j) {
        BigInt s = (start - j * step) % one;
        if (s < 0) s += one;
        BigInt d = j * step_err;
        exact.emplace_back(s << 1, len << 1);
        BigInt sl = (len - 2 * d) << 1;
        if (sl < 0) sl = 0;
        shrunk.emplace_back(((s + d) % one) << 1, std::move(sl));
        BigInt gs = (s - d) % one;
        if (gs < 0) gs += one;
        grown.emplace_back(gs << 1, (len + 2 * d) << 1);
    }

    MultiMeasure m;
    m.frac_bits = bits;
    m.ulps = detail::arcs_intersection_measure(exact, one2) / 2;
    m.lo_ulps = detail::arcs_intersection_measure(shrunk, one2) / 2;
    m.hi_ulps = detail::arcs_intersection_measure(grown, one2) / 2;
    return m;
}

// ---------------------------------------------------------------------------
// Obstruction scan: does any difference r in D make all ell+1 rotated copies
// of the arc overlap? all_certified_zero is the strong negative form: every
// scanned measure is zero even after growing the arcs by the rotation error.

struct ObstructionReport {
    bool any_positive = false;
    bool all_certified_zero = true;
    long long best_r = 0;
    MultiMeasure best;
    long scanned = 0;
};

inline ObstructionReport obstruction_scan(const ArcSystem& sys, const std::vector<long long>& rs,
                                          int ell, const ParallelContext& ctx = {}) {
    if (rs.empty()) throw std::invalid_argument("obstruction_scan: no differences to scan");

    struct Part {
        bool seen = false;
        bool allzero = true;
        long long best_r = 0;
        MultiMeasure best;
    };
    const long step = effective_chunk(ctx);
    std::vector<Part> parts((std::size_t)((rs.size() + step - 1) / step));

    parallel_chunks(0, (long)rs.size(), ctx, [&](long lo, long hi) {
        Part p;
        for (long i = lo; i < hi; ++i) {
            long long r = rs[(std::size_t)i];
            MultiMeasure m = rotation_multi_measure(sys, r, ell);
            if (m.hi_ulps != 0) p.allzero = false;
            if (!p.seen || m.ulps > p.best.ulps) {
                p.seen = true;
                p.best = m;
                p.best_r = r;
            }
        }
        parts[(std::size_t)(lo / step)] = std::move(p);
    });

    ObstructionReport out;
    out.scanned = (long)rs.size();
    bool seen = false;
    for (const Part& p : parts) {
        if (!p.seen) continue;
        if (!p.allzero) out.all_certified_zero = false;
        if (!seen || p.best.ulps > out.best.ulps) {
            seen = true;
            out.best = p.best;
            out.best_r = p.best_r;
        }
    }
    out.any_positive = seen && out.best.ulps > 0;
    return out;
}

inline ObstructionReport obstruction_scan(const ArcSystem& sys, const IntegerSet& D, int ell,
                                          const ParallelContext& ctx = {}) {
    std::vector<long long> rs;
    for (long r : D.members()) rs.push_back(r);
    return obstruction_scan(sys, rs, ell, ctx);
}

// ---------------------------------------------------------------------------
// Telescoping extraction for p(n) = n^2 + n (or just n). A length-2
// progression witness m, m+r, m+2r drawn from
//
//   Lambda = {n : {n alpha} in [0, eps/4] and {n^2 (alpha/2)} in [0, eps/4]}
//
// yields B - A = r alpha (mod 1) from the linear part and
// C + E - 2D = 2 r^2 (alpha/2) = r^2 alpha (mod 1) from the quadratic part,
// each within eps/2 of 0, so {(r^2+r) alpha} lands in [0,eps] ∪ [1-eps,1).

inline SetRecipe powers_extraction_recipe(const Angle& alpha, const Angle& eps) {
    detail::require_exact_tolerance(eps, "powers_extraction_recipe");
    Angle quarter = angle_scale_down(eps, 2);
    TorusWindow w = TorusWindow::from_bounds(zero_angle(quarter.frac_bits), quarter);
    return make_independent_vectors({{1}, {2}}, {alpha, angle_scale_down(alpha, 1)}, {w, w});
}

struct PowersExtraction {
    bool quadratic = false;
    Angle r_alpha;        // B - A
    Angle r2_alpha;       // C + E - 2D, brought back to alpha's scale (quadratic case)
    Angle combined;       // {p(r) alpha}
    double r_dist = 0.0;  // circle distance of each part from 0
    double r2_dist = 0.0;
    bool certified = false; // both parts within eps/2 under their error bounds
};

inline PowersExtraction powers_extraction(const Angle& alpha, const Angle& eps, const Witness& w,
                                          const IntegerPolynomial& p) {
    detail::require_exact_tolerance(eps, "powers_extraction");
    if (w.terms.size() != 3 || w.r <= 0)
        throw std::invalid_argument("powers_extraction: witness must be a length-2 progression");

    PowersExtraction out;
    if (p == IntegerPolynomial::monomial(1, 1)) {
        out.quadratic = false;
    } else if (p == IntegerPolynomial(std::vector<BigInt>{0, 1, 1})) {
        out.quadratic = true;
    } else {
        throw std::invalid_argument("powers_extraction: supported shapes are n and n^2 + n");
    }

    BigInt m = w.m, r = w.r;
    Angle A = angle_mul_int(alpha, m);
    Angle B = angle_mul_int(alpha, m + r);
    out.r_alpha = angle_sub(B, A);
    // fixed-point integrality: the telescoped difference IS r alpha
    if (out.r_alpha.mantissa != angle_mul_int(alpha, r).mantissa)
        throw std::logic_error("powers_extraction: linear telescoping identity violated");
    out.r_dist = detail::fixed_ratio(detail::circle_dist_ulps(out.r_alpha), out.r_alpha.frac_bits);
    out.combined = out.r_alpha;
    out.certified = detail::certified_near_zero(out.r_alpha, eps, 2);

    if (out.quadratic) {
        Angle half = angle_scale_down(alpha, 1);
        Angle C = angle_mul_int(half, m * m);
        Angle D = angle_mul_int(half, (m + r) * (m + r));
        Angle E = angle_mul_int(half, (m + 2 * r) * (m + 2 * r));
        Angle combo = angle_sub(angle_add(C, E), angle_mul_int(D, 2));
        if (combo.mantissa != angle_mul_int(half, 2 * r * r).mantissa)
            throw std::logic_error("powers_extraction: quadratic telescoping identity violated");
        // the doubled mantissa at alpha/2 scale is exactly r^2 alpha one bit up
        out.r2_alpha = with_frac_bits(combo, alpha.frac_bits);
        out.r2_dist = detail::fixed_ratio(detail::circle_dist_ulps(out.r2_alpha), out.r2_alpha.frac_bits);
        out.combined = angle_add(out.r_alpha, out.r2_alpha);
        out.certified = out.certified && detail::certified_near_zero(out.r2_alpha, eps, 2);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Floor-quadratic extraction. With beta' = beta/4 and
//
//   Lambda = {n : {[n alpha] n beta'} in [0, eps/4] and {n beta'} in [0, eps/4]}
//
// a progression m, m+r, m+2r telescopes through the floor identity
// [a+b] = [a] + [b] + carry to
//
//   A + C - 2B = 2 [r alpha] r beta'
//              + (e2 + e3)(m + 2r) beta' - 2 e1 (m + r) beta'   (mod 1)
//
// where e1 = carry({m a},{r a}), e2 = carry({m a},{2r a}),
// e3 = carry({r a},{r a}). The certificate checks the recovered
// {[r alpha] r beta} = {4 [r alpha] r beta'} against [0,eps] ∪ [1-eps,1).

inline SetRecipe lemma1_recipe(const Angle& alpha, const Angle& beta, const Angle& eps) {
    detail::require_exact_tolerance(eps, "lemma1_recipe");
    Angle bp = angle_scale_down(beta, 2);
    Angle quarter = angle_scale_down(eps, 2);
    TorusWindow w = TorusWindow::from_bounds(zero_angle(quarter.frac_bits), quarter);
    Angle z = zero_angle(bp.frac_bits);
    GeneralizedQuadratic floor_part = make_generalized_quadratic({{alpha, bp}}, z, z, z);
    GeneralizedQuadratic linear_part = make_generalized_quadratic({}, z, bp, z);
    return make_gq_recipe({floor_part, linear_part}, {w, w});
}

struct Lemma1Extraction {
    Angle value;      // {[r alpha] r beta}
    BigInt r_floor;   // [r alpha]
    int e1 = 0, e2 = 0, e3 = 0;
    Angle combo;      // A + C - 2B as evaluated
    double dist = 0.0;
    bool certified = false;
};

inline Lemma1Extraction lemma1_extraction(const Angle& alpha, const Angle& beta, const Angle& eps,
                                          const Witness& w) {
    detail::require_exact_tolerance(eps, "lemma1_extraction");
    if (w.terms.size() != 3 || w.r <= 0)
        throw std::invalid_argument("lemma1_extraction: witness must be a length-2 progression");

    BigInt m = w.m, r = w.r;
    Angle bp = angle_scale_down(beta, 2);
    Angle z = zero_angle(bp.frac_bits);
    GeneralizedQuadratic g = make_generalized_quadratic({{alpha, bp}}, z, z, z);

    GqValue A = gq_eval_with_floors(g, m);
    GqValue B = gq_eval_with_floors(g, m + r);
    GqValue C = gq_eval_with_floors(g, m + 2 * r);
    GqValue R = gq_eval_with_floors(g, r);

    Lemma1Extraction out;
    out.combo = angle_sub(angle_add(A.value, C.value), angle_mul_int(B.value, 2));
    out.r_floor = R.floors.at(0);

    out.e1 = floor_sum_decompose(angle_mul_int(alpha, m), angle_mul_int(alpha, r)).carry;
    out.e2 = floor_sum_decompose(angle_mul_int(alpha, m), angle_mul_int(alpha, 2 * r)).carry;
    out.e3 = floor_sum_decompose(angle_mul_int(alpha, r), angle_mul_int(alpha, r)).carry;

    BigInt coeff = 2 * out.r_floor * r + BigInt(out.e2 + out.e3) * (m + 2 * r) -
                   2 * BigInt(out.e1) * (m + r);
    Angle bits_aligned = with_frac_bits(bp, out.combo.frac_bits);
    if (out.combo.mantissa != angle_mul_int(bits_aligned, coeff).mantissa)
        throw std::logic_error("lemma1_extraction: telescoping identity violated");

    out.value = angle_mul_int(angle_mul_int(bp, out.r_floor * r), 4);
    out.dist = detail::fixed_ratio(detail::circle_dist_ulps(out.value), out.value.frac_bits);
    out.certified = detail::certified_near_zero(out.value, eps, 1);
    return out;
}

// ---------------------------------------------------------------------------
// Least r in R with {(r^{a_1} + ... + r^{a_s}) alpha} within eps of 0. The
// decision uses the represented mantissa; the returned angle carries the
// error bound for callers that need a certified statement.

struct Powers2Hit {
    long r = 0;
    Angle value;
    double dist = 0.0;
};

inline std::optional<Powers2Hit> powers2_check(const IntegerSet& R, const std::vector<long>& a_vec,
                                               const Angle& alpha, const Angle& eps) {
    detail::require_exact_tolerance(eps, "powers2_check");
    if (R.count() == 0) throw std::invalid_argument("powers2_check: R is empty");
    IntegerPolynomial p = IntegerPolynomial::from_exponents(a_vec);
    BigInt one = pow2(alpha.frac_bits);
    for (long r : R.members()) {
        Angle v = frac_poly_eval(p, alpha, r);
        BigInt d = detail::circle_dist_ulps(v);
        if (d * pow2(eps.frac_bits) <= eps.mantissa * one)
            return Powers2Hit{r, v, detail::fixed_ratio(d, v.frac_bits)};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Empirical uniformity profile: for each set Lambda in the family, the best
// normalized count over n <= N0 of |Lambda ∩ (Lambda - u_1(n)) ∩ ...|, and
// the family minimum. This is an observed lower envelope over the supplied
// family, not a universal constant.

struct UniformityRow {
    long best_n = 0;
    long best_count = 0;
    double max_ratio = 0.0; // best_count / horizon
};

struct UniformityProfile {
    std::vector<UniformityRow> rows;
    double family_min = 0.0;
};

inline UniformityProfile uniformity_profile(const std::vector<IntegerSet>& family,
                                            const std::vector<IntegerPolynomial>& u, long N0,
                                            double min_density,
                                            const ParallelContext& ctx = {}) {
    if (family.empty()) throw std::invalid_argument("uniformity_profile: empty family");
    if (u.empty()) throw std::invalid_argument("uniformity_profile: no offset polynomials");
    if (N0 < 1) throw std::invalid_argument("uniformity_profile: N0 must be >= 1");
    long N = family[0].horizon();
    for (const IntegerSet& s : family) {
        if (s.horizon() != N)
            throw std::invalid_argument("uniformity_profile: family horizons differ");
        if (density(s).value < min_density) {
            std::ostringstream os;
            os << "uniformity_profile: set density " << density(s).value
               << " below declared minimum " << min_density;
            throw std::invalid_argument(os.str());
        }
    }

    UniformityProfile out;
    out.rows.assign(family.size(), {});
    parallel_chunks(0, (long)family.size(), ctx, [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const IntegerSet& s = family[(std::size_t)i];
            UniformityRow row;
            for (long n = 1; n <= N0; ++n) {
                IntegerSet acc = s;
                bool feasible = true;
                for (const IntegerPolynomial& poly : u) {
                    BigInt off = poly.eval(n);
                    if (off < 0)
                        throw std::invalid_argument("uniformity_profile: negative offset u_i(n)");
                    if (off > N) {
                        feasible = false;
                        break;
                    }
                    acc.and_shifted_down(s, off.convert_to<long>());
                }
                long c = feasible ? acc.count() : 0;
                if (row.best_n == 0 || c > row.best_count) {
                    row.best_n = n;
                    row.best_count = c;
                }
            }
            row.max_ratio = (double)row.best_count / (double)N;
            out.rows[(std::size_t)i] = row;
        }
    });

    out.family_min = out.rows[0].max_ratio;
    for (const UniformityRow& r : out.rows) out.family_min = std::min(out.family_min, r.max_ratio);
    return out;
}

} // namespace recurlab
