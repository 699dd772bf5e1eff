#pragma once

// Unipotent affine maps T x = A x + b on the d-torus. Unipotency
// ((A - I)^ell = 0 over the integers) is validated at construction, which
// makes T^n x a polynomial in n with exact binomial coefficients; orbits are
// evaluated in closed form at arbitrary big indices. Averages of box
// indicators along polynomial orbit times report interval values: points
// whose membership the error bounds cannot decide widen [lo, hi] instead of
// being silently rounded either way.

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

struct TorusPoint {
    std::vector<Angle> coords;
};

// Product of per-coordinate windows; measure multiplies.
struct TorusBox {
    std::vector<TorusWindow> windows;

    double measure() const {
        double m = 1.0;
        for (const auto& w : windows) m *= w.measure();
        return m;
    }

    Membership classify(const TorusPoint& x) const {
        if (x.coords.size() != windows.size())
            throw std::invalid_argument("TorusBox::classify: dimension mismatch");
        bool uncertain = false;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            Membership m = windows[i].classify(x.coords[i]);
            if (m == Membership::Out) return Membership::Out;
            if (m == Membership::Uncertain) uncertain = true;
        }
        return uncertain ? Membership::Uncertain : Membership::In;
    }
};

using IntegerMatrix = std::vector<std::vector<BigInt>>;

namespace detail {

inline IntegerMatrix identity_matrix(long d) {
    IntegerMatrix m(d, std::vector<BigInt>(d, BigInt(0)));
    for (long i = 0; i < d; ++i) m[(std::size_t)i][(std::size_t)i] = 1;
    return m;
}

inline IntegerMatrix matrix_multiply(const IntegerMatrix& a, const IntegerMatrix& b) {
    std::size_t d = a.size();
    IntegerMatrix out(d, std::vector<BigInt>(d, BigInt(0)));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            if (a[i][k] == 0) continue;
            for (std::size_t j = 0; j < d; ++j) out[i][j] += a[i][k] * b[k][j];
        }
    return out;
}

inline bool matrix_is_zero(const IntegerMatrix& m) {
    for (const auto& row : m)
        for (const auto& v : row)
            if (v != 0) return false;
    return true;
}

inline std::vector<Angle> matrix_apply(const IntegerMatrix& m, const std::vector<Angle>& x) {
    std::vector<Angle> out;
    out.reserve(m.size());
    for (const auto& row : m) {
        Angle acc = zero_angle(x[0].frac_bits);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] == 0) continue;
            acc = angle_add(acc, angle_mul_int(x[j], row[j]));
        }
        out.push_back(std::move(acc));
    }
    return out;
}

} // namespace detail

class UnipotentAffineMap {
public:
    static constexpr long kMaxDim = 16;
    static constexpr long kMaxEll = 8;

    UnipotentAffineMap(IntegerMatrix A, std::vector<Angle> b, long ell)
        : A_(std::move(A)), b_(std::move(b)), ell_(ell) {
        long d = (long)A_.size();
        if (d < 1 || d > kMaxDim)
            throw std::invalid_argument("UnipotentAffineMap: dimension out of [1, 16]");
        for (const auto& row : A_)
            if ((long)row.size() != d)
                throw std::invalid_argument("UnipotentAffineMap: matrix is not square");
        if ((long)b_.size() != d)
            throw std::invalid_argument("UnipotentAffineMap: offset dimension mismatch");
        if (ell_ < 1 || ell_ > kMaxEll)
            throw std::invalid_argument("UnipotentAffineMap: ell out of [1, 8]");

        IntegerMatrix n = A_;
        for (long i = 0; i < d; ++i) n[(std::size_t)i][(std::size_t)i] -= 1;
        powers_.push_back(detail::identity_matrix(d));
        for (long k = 1; k <= ell_; ++k) powers_.push_back(detail::matrix_multiply(powers_.back(), n));

        if (!detail::matrix_is_zero(powers_.back())) {
            std::ostringstream os;
            os << "UnipotentAffineMap: (A - I)^" << ell_ << " != 0; residual [";
            for (long i = 0; i < d; ++i)
                for (long j = 0; j < d; ++j)
                    os << powers_.back()[(std::size_t)i][(std::size_t)j]
                       << (i == d - 1 && j == d - 1 ? "]" : " ");
            throw std::invalid_argument(os.str());
        }
        powers_.pop_back(); // (A - I)^ell is zero; keep powers 0 .. ell-1
        if (ell_ > 1 && detail::matrix_is_zero(powers_.back())) {
            std::ostringstream os;
            os << "declared ell=" << ell_ << " overstated: (A - I)^" << (ell_ - 1)
               << " already vanishes";
            warnings_.push_back(os.str());
        }
    }

    long dim() const { return (long)A_.size(); }
    long ell() const { return ell_; }
    const IntegerMatrix& matrix() const { return A_; }
    const std::vector<Angle>& offset() const { return b_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    // (A - I)^k for k in [0, ell)
    const IntegerMatrix& nilpotent_power(long k) const { return powers_.at((std::size_t)k); }

private:
    IntegerMatrix A_;
    std::vector<Angle> b_;
    long ell_;
    std::vector<IntegerMatrix> powers_;
    std::vector<std::string> warnings_;
};

inline TorusPoint affine_step(const UnipotentAffineMap& T, const TorusPoint& x) {
    if ((long)x.coords.size() != T.dim())
        throw std::invalid_argument("affine_step: dimension mismatch");
    std::vector<Angle> y = detail::matrix_apply(T.matrix(), x.coords);
    for (long i = 0; i < T.dim(); ++i)
        y[(std::size_t)i] = angle_add(y[(std::size_t)i], T.offset()[(std::size_t)i]);
    return TorusPoint{std::move(y)};
}

// T^n x = sum_{k<ell} C(n,k) (A-I)^k x + sum_{k<ell} C(n,k+1) (A-I)^k b.
// Exact for any n >= 0; cost is polynomial in ell, d, log n.
inline TorusPoint orbit_closed_form(const UnipotentAffineMap& T, const TorusPoint& x,
                                    const BigInt& n) {
    if ((long)x.coords.size() != T.dim())
        throw std::invalid_argument("orbit_closed_form: dimension mismatch");
    if (n < 0) throw std::invalid_argument("orbit_closed_form: n must be >= 0");

    std::vector<Angle> acc(x.coords.size(), zero_angle(x.coords[0].frac_bits));
    for (long k = 0; k < T.ell(); ++k) {
        BigInt cx = binomial(n, (unsigned)k);
        BigInt cb = binomial(n, (unsigned)k + 1);
        if (cx == 0 && cb == 0) break;
        std::vector<Angle> nx = detail::matrix_apply(T.nilpotent_power(k), x.coords);
        std::vector<Angle> nb = detail::matrix_apply(T.nilpotent_power(k), T.offset());
        for (std::size_t i = 0; i < acc.size(); ++i) {
            if (cx != 0) acc[i] = angle_add(acc[i], angle_mul_int(nx[i], cx));
            if (cb != 0) acc[i] = angle_add(acc[i], angle_mul_int(nb[i], cb));
        }
    }
    return TorusPoint{std::move(acc)};
}

// ---------------------------------------------------------------------------
// Orbit averages along polynomial times n^k. Counts are exact; membership
// that the error interval cannot decide widens [lo, hi]. More than 0.1%
// undecided points aborts: that is a precision problem, not data.

struct OrbitAverage {
    long long N = 0;
    long long in_count = 0;
    long long uncertain_count = 0;
    double lo = 0.0;
    double hi = 0.0;
};

namespace detail {

inline void require_uncertainty_budget(long long uncertain, long long N, const char* who) {
    if (uncertain * 1000 > N) {
        std::ostringstream os;
        os << who << ": " << uncertain << " of " << N
           << " orbit points have boundary-uncertain membership (over the 0.1% budget); "
              "increase coordinate frac_bits";
        throw precision_error(os.str());
    }
}

} // namespace detail

inline OrbitAverage polynomial_orbit_average(const UnipotentAffineMap& T, const TorusPoint& x,
                                             const TorusBox& box, long k, long long N,
                                             const ParallelContext& ctx = {}) {
    if (k < 1) throw std::invalid_argument("polynomial_orbit_average: k must be >= 1");
    if (N < 1) throw std::invalid_argument("polynomial_orbit_average: N must be >= 1");
    if ((long)box.windows.size() != T.dim())
        throw std::invalid_argument("polynomial_orbit_average: box dimension mismatch");

    struct Part {
        long long in = 0, unc = 0;
    };
    const long step = effective_chunk(ctx);
    std::vector<Part> parts((std::size_t)((N + step - 1) / step));
    parallel_chunks(1, (long)N + 1, ctx, [&](long lo, long hi) {
        Part p;
        for (long n = lo; n < hi; ++n) {
            TorusPoint y = orbit_closed_form(T, x, ipow(BigInt(n), (unsigned long)k));
            Membership m = box.classify(y);
            if (m == Membership::In) ++p.in;
            else if (m == Membership::Uncertain) ++p.unc;
        }
        parts[(std::size_t)((lo - 1) / step)] = p;
    });

    OrbitAverage out;
    out.N = N;
    for (const Part& p : parts) {
        out.in_count += p.in;
        out.uncertain_count += p.unc;
    }
    detail::require_uncertainty_budget(out.uncertain_count, N, "polynomial_orbit_average");
    out.lo = (double)out.in_count / (double)N;
    out.hi = (double)(out.in_count + out.uncertain_count) / (double)N;
    return out;
}

// ---------------------------------------------------------------------------
// Weighted factorization probe: compares the joint average of window weights
// against the product of their measures with the plain orbit average,
//
//   lhs = (1/N) sum_n prod_j 1_{W_j}({p_j(n) a_j}) * prod_{i<=ell} 1_box(T^{i n^k} x)
//   rhs = prod_j measure(W_j) * (1/N) sum_n prod_{i<=ell} 1_box(T^{i n^k} x)
//
// and reports both as intervals. gap_hi is the value ladders are built on.

struct WeightCondition {
    IntegerPolynomial poly;
    Angle alpha;
    TorusWindow window;
};

struct FactorizationReport {
    long long N = 0;
    long long joint_in = 0, joint_uncertain = 0;
    long long box_in = 0, box_uncertain = 0;
    double weight_measure = 1.0;
    double lhs_lo = 0.0, lhs_hi = 0.0;
    double rhs_lo = 0.0, rhs_hi = 0.0;
    double gap_lo = 0.0, gap_hi = 0.0;
};

inline FactorizationReport factorization_check(const UnipotentAffineMap& T, const TorusPoint& x,
                                               const TorusBox& box, long k,
                                               const std::vector<WeightCondition>& weights,
                                               int ell, long long N,
                                               const ParallelContext& ctx = {}) {
    if (k < 1) throw std::invalid_argument("factorization_check: k must be >= 1");
    if (ell < 1) throw std::invalid_argument("factorization_check: ell must be >= 1");
    if (N < 1) throw std::invalid_argument("factorization_check: N must be >= 1");
    if ((long)box.windows.size() != T.dim())
        throw std::invalid_argument("factorization_check: box dimension mismatch");

    struct Part {
        long long jin = 0, junc = 0, bin = 0, bunc = 0;
    };
    const long step = effective_chunk(ctx);
    std::vector<Part> parts((std::size_t)((N + step - 1) / step));
    parallel_chunks(1, (long)N + 1, ctx, [&](long lo, long hi) {
        Part p;
        for (long n = lo; n < hi; ++n) {
            BigInt m = ipow(BigInt(n), (unsigned long)k);
            bool box_out = false, box_unc = false;
            for (int i = 1; i <= ell && !box_out; ++i) {
                Membership mm = box.classify(orbit_closed_form(T, x, i * m));
                if (mm == Membership::Out) box_out = true;
                else if (mm == Membership::Uncertain) box_unc = true;
            }
            if (!box_out) (box_unc ? p.bunc : p.bin) += 1;

            bool w_out = false, w_unc = false;
            for (const WeightCondition& w : weights) {
                if (w_out) break;
                Membership mm = w.window.classify(frac_poly_eval(w.poly, w.alpha, n));
                if (mm == Membership::Out) w_out = true;
                else if (mm == Membership::Uncertain) w_unc = true;
            }
            if (!box_out && !w_out) (box_unc || w_unc ? p.junc : p.jin) += 1;
        }
        parts[(std::size_t)((lo - 1) / step)] = p;
    });

    FactorizationReport out;
    out.N = N;
    for (const Part& p : parts) {
        out.joint_in += p.jin;
        out.joint_uncertain += p.junc;
        out.box_in += p.bin;
        out.box_uncertain += p.bunc;
    }
    detail::require_uncertainty_budget(out.joint_uncertain + out.box_uncertain, N,
                                       "factorization_check");
    for (const WeightCondition& w : weights) out.weight_measure *= w.window.measure();
    out.lhs_lo = (double)out.joint_in / (double)N;
    out.lhs_hi = (double)(out.joint_in + out.joint_uncertain) / (double)N;
    out.rhs_lo = out.weight_measure * (double)out.box_in / (double)N;
    out.rhs_hi = out.weight_measure * (double)(out.box_in + out.box_uncertain) / (double)N;
    if (out.lhs_lo > out.rhs_hi) out.gap_lo = out.lhs_lo - out.rhs_hi;
    else if (out.rhs_lo > out.lhs_hi) out.gap_lo = out.rhs_lo - out.lhs_hi;
    out.gap_hi = std::max(std::abs(out.lhs_hi - out.rhs_lo), std::abs(out.lhs_lo - out.rhs_hi));
    return out;
}

// ---------------------------------------------------------------------------
// Map files: "recurlab-affine v1 d=<d> ell=<ell>", then d matrix rows of d
// integers, then d offset Angles in serialized form.

inline void write_affine_map(std::ostream& os, const UnipotentAffineMap& T) {
    os << "recurlab-affine v1 d=" << T.dim() << " ell=" << T.ell() << "\n";
    for (const auto& row : T.matrix()) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
        os << "\n";
    }
    for (const Angle& a : T.offset()) os << angle_to_string(a) << "\n";
}

inline UnipotentAffineMap read_affine_map(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::invalid_argument("read_affine_map: empty input");
    long d = 0, ell = 0;
    {
        std::istringstream hs(header);
        std::string magic, version, df, ef;
        hs >> magic >> version >> df >> ef;
        if (magic != "recurlab-affine" || version != "v1" || df.rfind("d=", 0) != 0 ||
            ef.rfind("ell=", 0) != 0)
            throw std::invalid_argument("read_affine_map: bad header: " + header);
        try {
            d = std::stol(df.substr(2));
            ell = std::stol(ef.substr(4));
        } catch (const std::exception&) {
            throw std::invalid_argument("read_affine_map: bad d or ell in header");
        }
    }
    if (d < 1 || d > UnipotentAffineMap::kMaxDim)
        throw std::invalid_argument("read_affine_map: d out of range");
    IntegerMatrix A((std::size_t)d);
    std::string line;
    for (long i = 0; i < d; ++i) {
        if (!std::getline(is, line))
            throw std::invalid_argument("read_affine_map: missing matrix row");
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            try {
                A[(std::size_t)i].emplace_back(tok);
            } catch (const std::exception&) {
                throw std::invalid_argument("read_affine_map: bad matrix entry: " + tok);
            }
        }
        if ((long)A[(std::size_t)i].size() != d)
            throw std::invalid_argument("read_affine_map: matrix row length mismatch");
    }
    std::vector<Angle> b;
    for (long i = 0; i < d; ++i) {
        if (!std::getline(is, line))
            throw std::invalid_argument("read_affine_map: missing offset angle");
        b.push_back(angle_from_string(line));
    }
    return UnipotentAffineMap(std::move(A), std::move(b), ell);
}

} // namespace recurlab
