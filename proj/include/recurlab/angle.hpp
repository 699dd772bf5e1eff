#pragma once

// Error-bounded fixed-point arithmetic on the torus R/Z.
//
// An Angle stores a point of [0,1) as mantissa / 2^frac_bits together with a
// hard error radius err_ulps (in units of 2^-frac_bits). Every operation
// keeps the mantissa arithmetic exact modulo 2^frac_bits and propagates the
// error bound soundly; decisions that the error interval cannot support
// (floors, carries) raise precision_error instead of guessing.

#include "recurlab/bigint.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace recurlab {

class precision_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Angle {
    BigInt mantissa;      // in [0, 2^frac_bits)
    long frac_bits = 0;   // >= 1
    BigInt err_ulps;      // >= 0, radius in units of 2^-frac_bits
};

inline Angle angle_from_dyadic(BigInt mantissa, long frac_bits) {
    if (frac_bits < 1) throw std::invalid_argument("angle_from_dyadic: frac_bits must be >= 1");
    if (mantissa < 0) throw std::invalid_argument("angle_from_dyadic: mantissa must be nonnegative");
    BigInt m = mantissa & (pow2(frac_bits) - 1);
    return Angle{std::move(m), frac_bits, 0};
}

// Truncated fractional part of sqrt(d) for non-square d >= 2; err_ulps == 1.
inline Angle angle_from_quadratic_irrational(const BigInt& d, long frac_bits) {
    if (frac_bits < 1) throw std::invalid_argument("angle_from_quadratic_irrational: frac_bits must be >= 1");
    if (d < 2) throw std::invalid_argument("angle_from_quadratic_irrational: d must be >= 2");
    if (is_perfect_square(d)) throw std::invalid_argument("angle_from_quadratic_irrational: d is a perfect square");
    BigInt s = isqrt_floor(d << (2 * frac_bits));
    return Angle{s & (pow2(frac_bits) - 1), frac_bits, 1};
}

inline Angle zero_angle(long frac_bits) { return Angle{0, frac_bits, 0}; }

// Exact division by 2^k: same mantissa, k more fractional bits.
inline Angle angle_scale_down(const Angle& a, long k) {
    if (k < 0) throw std::invalid_argument("angle_scale_down: negative k");
    return Angle{a.mantissa, a.frac_bits + k, a.err_ulps};
}

// Rescale to a different precision. Upscaling is exact; downscaling truncates
// and widens the error by one ulp.
inline Angle with_frac_bits(const Angle& a, long frac_bits) {
    if (frac_bits < 1) throw std::invalid_argument("with_frac_bits: frac_bits must be >= 1");
    if (frac_bits == a.frac_bits) return a;
    if (frac_bits > a.frac_bits) {
        long s = frac_bits - a.frac_bits;
        return Angle{a.mantissa << s, frac_bits, a.err_ulps << s};
    }
    long s = a.frac_bits - frac_bits;
    BigInt e = (a.err_ulps + pow2(s) - 1) >> s;
    return Angle{a.mantissa >> s, frac_bits, e + 1};
}

namespace detail {
inline long common_bits(const Angle& a, const Angle& b) {
    return a.frac_bits > b.frac_bits ? a.frac_bits : b.frac_bits;
}
} // namespace detail

inline Angle angle_add(const Angle& a, const Angle& b) {
    long bits = detail::common_bits(a, b);
    Angle x = with_frac_bits(a, bits), y = with_frac_bits(b, bits);
    BigInt m = x.mantissa + y.mantissa;
    BigInt one = pow2(bits);
    if (m >= one) m -= one;
    return Angle{std::move(m), bits, x.err_ulps + y.err_ulps};
}

inline Angle angle_neg(const Angle& a) {
    if (a.mantissa == 0) return a;
    return Angle{pow2(a.frac_bits) - a.mantissa, a.frac_bits, a.err_ulps};
}

inline Angle angle_sub(const Angle& a, const Angle& b) { return angle_add(a, angle_neg(b)); }

// k * a mod 1 for integer k; exact on the mantissa, error scales by |k|.
inline Angle angle_mul_int(const Angle& a, const BigInt& k) {
    BigInt one = pow2(a.frac_bits);
    BigInt m = (a.mantissa * k) % one;
    if (m < 0) m += one;
    return Angle{std::move(m), a.frac_bits, a.err_ulps * boost::multiprecision::abs(k)};
}

inline double angle_to_double(const Angle& a) {
    // Top 64 bits are enough for any diagnostic use.
    long sh = a.frac_bits - 64;
    BigInt m = sh > 0 ? BigInt(a.mantissa >> sh) : BigInt(a.mantissa << -sh);
    return static_cast<double>(m.convert_to<std::uint64_t>()) * 0x1p-64;
}

// Serialized form: lowercase zero-padded hex mantissa ":" frac_bits ":" err_ulps.
inline std::string angle_to_string(const Angle& a) {
    std::ostringstream os;
    os << std::hex << std::nouppercase << a.mantissa;
    std::string hex = os.str();
    std::size_t width = static_cast<std::size_t>((a.frac_bits + 3) / 4);
    if (hex.size() < width) hex.insert(0, width - hex.size(), '0');
    std::ostringstream out;
    out << hex << ':' << std::dec << a.frac_bits << ':' << a.err_ulps;
    return out.str();
}

inline Angle angle_from_string(const std::string& s) {
    auto p1 = s.find(':');
    auto p2 = s.find(':', p1 == std::string::npos ? p1 : p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos)
        throw std::invalid_argument("angle_from_string: expected <hex>:<frac_bits>:<err_ulps>");
    std::string hex = s.substr(0, p1);
    if (hex.empty() || hex.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw std::invalid_argument("angle_from_string: bad mantissa hex");
    BigInt m("0x" + hex);
    long bits = 0;
    BigInt err;
    try {
        bits = std::stol(s.substr(p1 + 1, p2 - p1 - 1));
        err = BigInt(s.substr(p2 + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("angle_from_string: bad frac_bits or err_ulps");
    }
    if (bits < 1) throw std::invalid_argument("angle_from_string: frac_bits must be >= 1");
    if (err < 0) throw std::invalid_argument("angle_from_string: err_ulps must be >= 0");
    if (m >= pow2(bits)) throw std::invalid_argument("angle_from_string: mantissa out of range");
    Angle a{std::move(m), bits, std::move(err)};
    return a;
}

// ---------------------------------------------------------------------------
// Integer polynomials with BigInt coefficients, degree capped at 64.

class IntegerPolynomial {
public:
    static constexpr unsigned kMaxDegree = 64;

    IntegerPolynomial() = default;

    // coeffs[i] multiplies n^i.
    explicit IntegerPolynomial(std::vector<BigInt> coeffs) : coeffs_(std::move(coeffs)) {
        while (!coeffs_.empty() && coeffs_.back() == 0) coeffs_.pop_back();
        if (coeffs_.size() > kMaxDegree + 1)
            throw std::invalid_argument("IntegerPolynomial: degree exceeds 64");
    }

    static IntegerPolynomial zero() { return IntegerPolynomial(); }

    static IntegerPolynomial monomial(const BigInt& coeff, unsigned degree) {
        std::vector<BigInt> c(degree + 1, BigInt(0));
        c[degree] = coeff;
        return IntegerPolynomial(std::move(c));
    }

    // Sum of n^e over the exponent list.
    static IntegerPolynomial from_exponents(const std::vector<long>& exponents) {
        std::vector<BigInt> c;
        for (long e : exponents) {
            if (e < 0) throw std::invalid_argument("IntegerPolynomial: negative exponent");
            if (c.size() < static_cast<std::size_t>(e) + 1) c.resize(e + 1, BigInt(0));
            c[e] += 1;
        }
        return IntegerPolynomial(std::move(c));
    }

    // Zero polynomial has degree 0 by this contract.
    unsigned degree() const { return coeffs_.empty() ? 0 : static_cast<unsigned>(coeffs_.size() - 1); }
    bool is_zero() const { return coeffs_.empty(); }
    const std::vector<BigInt>& coefficients() const { return coeffs_; }

    BigInt eval(const BigInt& n) const {
        BigInt r = 0;
        for (std::size_t i = coeffs_.size(); i-- > 0;) r = r * n + coeffs_[i];
        return r;
    }

    // sum |c_i| n^i; monotone upper bound for |p| on [0, n].
    BigInt abs_coeff_eval(const BigInt& n) const {
        BigInt r = 0;
        for (std::size_t i = coeffs_.size(); i-- > 0;) r = r * n + boost::multiprecision::abs(coeffs_[i]);
        return r;
    }

    IntegerPolynomial operator+(const IntegerPolynomial& o) const {
        std::vector<BigInt> c(std::max(coeffs_.size(), o.coeffs_.size()), BigInt(0));
        for (std::size_t i = 0; i < coeffs_.size(); ++i) c[i] += coeffs_[i];
        for (std::size_t i = 0; i < o.coeffs_.size(); ++i) c[i] += o.coeffs_[i];
        return IntegerPolynomial(std::move(c));
    }

    bool operator==(const IntegerPolynomial& o) const { return coeffs_ == o.coeffs_; }

private:
    std::vector<BigInt> coeffs_;
};

// {p(n) * alpha}: exact mantissa, err <= |p(n)| * alpha.err_ulps.
inline Angle frac_poly_eval(const IntegerPolynomial& p, const Angle& alpha, const BigInt& n) {
    BigInt v = p.eval(n);
    return angle_mul_int(alpha, v);
}

// ---------------------------------------------------------------------------
// {x} + {y} = carry + {x+y} with carry in {0,1}; carry == 1 iff {x}+{y} >= 1.
// The convention is pinned to ">= 1" so that exact inputs reproduce the true
// floor: {1/2} + {1/2} carries.

struct FloorSum {
    Angle frac;
    int carry = 0;
};

namespace detail {

// True-value ranges of an Angle as up to two integer intervals in [0, 2^B).
inline std::vector<std::pair<BigInt, BigInt>> representative_ranges(const Angle& a) {
    BigInt one = pow2(a.frac_bits);
    if (2 * a.err_ulps >= one) return {{BigInt(0), one - 1}};
    BigInt lo = a.mantissa - a.err_ulps, hi = a.mantissa + a.err_ulps;
    if (lo < 0) return {{BigInt(0), hi}, {lo + one, one - 1}};
    if (hi >= one) return {{lo, one - 1}, {BigInt(0), hi - one}};
    return {{lo, hi}};
}

} // namespace detail

inline FloorSum floor_sum_decompose(const Angle& a, const Angle& b) {
    long bits = detail::common_bits(a, b);
    Angle x = with_frac_bits(a, bits), y = with_frac_bits(b, bits);
    BigInt one = pow2(bits);

    bool can0 = false, can1 = false;
    if (x.err_ulps == 0 && y.err_ulps == 0) {
        (x.mantissa + y.mantissa >= one ? can1 : can0) = true;
    } else {
        for (const auto& [xl, xh] : detail::representative_ranges(x))
            for (const auto& [yl, yh] : detail::representative_ranges(y)) {
                if (xl + yl < one) can0 = true;
                if (xh + yh >= one) can1 = true;
            }
    }
    if (can0 && can1)
        throw precision_error("floor_sum_decompose: carry ambiguous within error bounds");

    BigInt m = x.mantissa + y.mantissa;
    int carry = 0;
    if (m >= one) {
        m -= one;
        carry = 1;
    }
    // Stored mantissas decide the canonical carry; ambiguity was excluded above.
    (void)can1;
    return FloorSum{Angle{std::move(m), bits, x.err_ulps + y.err_ulps}, carry};
}

// ---------------------------------------------------------------------------
// Generalized quadratic q(t) = sum_i [alpha_i t] beta_i t + gamma t^2 + delta t + c.
// Floors are extracted exactly; an error interval that straddles an integer
// raises precision_error("floor ambiguous ...").

struct GeneralizedQuadratic {
    std::vector<std::pair<Angle, Angle>> floor_terms; // (alpha_i, beta_i)
    Angle gamma;
    Angle delta;
    Angle c;
};

inline GeneralizedQuadratic make_generalized_quadratic(std::vector<std::pair<Angle, Angle>> floor_terms,
                                                       Angle gamma, Angle delta, Angle c) {
    return GeneralizedQuadratic{std::move(floor_terms), std::move(gamma), std::move(delta), std::move(c)};
}

namespace detail {

// floor(t * alpha_true) for the canonical representative; throws when the
// error interval of t*alpha straddles an integer.
inline BigInt exact_floor_of_multiple(const Angle& alpha, const BigInt& t) {
    BigInt one = pow2(alpha.frac_bits);
    BigInt prod = alpha.mantissa * t;
    BigInt frac = prod & (one - 1);
    if (alpha.err_ulps != 0) {
        // Ambiguous iff [prod-spread, prod+spread] straddles a multiple of 2^B.
        BigInt spread = alpha.err_ulps * t;
        if (spread >= one || frac < spread || frac >= one - spread) {
            std::ostringstream os;
            os << "floor ambiguous: [alpha*t] undecidable within error bounds at t=" << t;
            throw precision_error(os.str());
        }
    }
    return prod >> alpha.frac_bits;
}

} // namespace detail

struct GqValue {
    Angle value;
    std::vector<BigInt> floors; // [alpha_i t] in term order
};

inline GqValue gq_eval_with_floors(const GeneralizedQuadratic& q, const BigInt& t) {
    if (t < 0) throw std::invalid_argument("gq_eval: t must be nonnegative");
    long bits = q.c.frac_bits;
    for (const auto& [a, b] : q.floor_terms) bits = std::max({bits, a.frac_bits, b.frac_bits});
    bits = std::max({bits, q.gamma.frac_bits, q.delta.frac_bits});

    GqValue out;
    Angle acc = zero_angle(bits);
    for (const auto& [alpha, beta] : q.floor_terms) {
        BigInt fl = detail::exact_floor_of_multiple(alpha, t);
        out.floors.push_back(fl);
        acc = angle_add(acc, angle_mul_int(beta, fl * t));
    }
    acc = angle_add(acc, angle_mul_int(q.gamma, t * t));
    acc = angle_add(acc, angle_mul_int(q.delta, t));
    acc = angle_add(acc, q.c);
    out.value = std::move(acc);
    return out;
}

inline Angle gq_eval(const GeneralizedQuadratic& q, const BigInt& t) {
    return gq_eval_with_floors(q, t).value;
}

// ---------------------------------------------------------------------------
// Incremental evaluation of {p(n) alpha} or of a generalized quadratic along
// n = start, start+1, ... A polynomial of degree d advances with d modular
// additions via its finite-difference table; the table is exact mod 2^B, so
// every emission matches direct evaluation bit for bit.

class AngleStream {
public:
    static AngleStream polynomial(const IntegerPolynomial& p, const Angle& alpha, BigInt start) {
        AngleStream s;
        s.bits_ = alpha.frac_bits;
        s.one_ = pow2(s.bits_);
        s.index_ = std::move(start);
        s.poly_ = p;
        s.err_scale_ = alpha.err_ulps;
        unsigned d = p.is_zero() ? 0 : p.degree();
        std::vector<BigInt> vals(d + 1);
        for (unsigned i = 0; i <= d; ++i)
            vals[i] = frac_poly_eval(p, Angle{alpha.mantissa, alpha.frac_bits, 0}, s.index_ + i).mantissa;
        for (unsigned level = 0; level < d; ++level)
            for (unsigned i = d; i > level; --i) {
                vals[i] -= vals[i - 1];
                if (vals[i] < 0) vals[i] += s.one_;
            }
        s.table_ = std::move(vals);
        s.refresh_err_bound();
        return s;
    }

    static AngleStream quadratic(const GeneralizedQuadratic& q, BigInt start) {
        AngleStream s;
        long bits = q.c.frac_bits;
        for (const auto& [a, b] : q.floor_terms) bits = std::max({bits, a.frac_bits, b.frac_bits});
        bits = std::max({bits, q.gamma.frac_bits, q.delta.frac_bits});
        s.bits_ = bits;
        s.one_ = pow2(bits);
        s.index_ = std::move(start);
        s.gq_ = q;
        for (auto& [alpha, beta] : s.gq_->floor_terms) {
            alpha = with_frac_bits(alpha, bits);
            beta = with_frac_bits(beta, bits);
        }
        s.gq_->gamma = with_frac_bits(s.gq_->gamma, bits);
        s.gq_->delta = with_frac_bits(s.gq_->delta, bits);
        s.gq_->c = with_frac_bits(s.gq_->c, bits);
        for (const auto& [alpha, beta] : s.gq_->floor_terms) {
            (void)beta;
            BigInt prod = alpha.mantissa * s.index_;
            s.floor_ipart_.push_back(prod >> bits);
            s.floor_fpart_.push_back(prod & (s.one_ - 1));
        }
        return s;
    }

    const BigInt& index() const { return index_; }
    long frac_bits() const { return bits_; }

    // Value at the current index. For polynomial sources this is the cached
    // difference-table head; for quadratics it is assembled from the tracked
    // floors (identical to gq_eval at this index).
    Angle value() const {
        if (gq_) return assemble_gq();
        return Angle{table_[0], bits_, current_err_};
    }

    void advance() {
        index_ += 1;
        if (gq_) {
            for (std::size_t i = 0; i < floor_fpart_.size(); ++i) {
                floor_fpart_[i] += gq_->floor_terms[i].first.mantissa;
                if (floor_fpart_[i] >= one_) {
                    floor_fpart_[i] -= one_;
                    floor_ipart_[i] += 1;
                }
            }
            return;
        }
        for (std::size_t j = 0; j + 1 < table_.size(); ++j) {
            table_[j] += table_[j + 1];
            if (table_[j] >= one_) table_[j] -= one_;
        }
        if (err_scale_ != 0 && index_ > err_horizon_) refresh_err_bound();
    }

private:
    AngleStream() = default;

    void refresh_err_bound() {
        if (err_scale_ == 0) {
            current_err_ = 0;
            err_horizon_ = BigInt(1) << 62;
            return;
        }
        // Bound |p| on [0, horizon] by its absolute-coefficient evaluation;
        // refreshed when the index outgrows the horizon.
        err_horizon_ = index_ < 16 ? BigInt(16) : BigInt(index_ * 2);
        current_err_ = poly_.abs_coeff_eval(err_horizon_) * err_scale_;
    }

    Angle assemble_gq() const {
        const auto& q = *gq_;
        Angle acc = zero_angle(bits_);
        for (std::size_t i = 0; i < q.floor_terms.size(); ++i) {
            const Angle& alpha = q.floor_terms[i].first;
            const Angle& beta = q.floor_terms[i].second;
            if (alpha.err_ulps != 0) {
                BigInt spread = alpha.err_ulps * index_;
                if (spread >= one_ || floor_fpart_[i] < spread || floor_fpart_[i] >= one_ - spread) {
                    std::ostringstream os;
                    os << "floor ambiguous: [alpha*t] undecidable within error bounds at t=" << index_;
                    throw precision_error(os.str());
                }
            }
            acc = angle_add(acc, angle_mul_int(beta, floor_ipart_[i] * index_));
        }
        acc = angle_add(acc, angle_mul_int(q.gamma, index_ * index_));
        acc = angle_add(acc, angle_mul_int(q.delta, index_));
        acc = angle_add(acc, q.c);
        return acc;
    }

    long bits_ = 0;
    BigInt one_;
    BigInt index_;

    // polynomial source
    IntegerPolynomial poly_;
    std::vector<BigInt> table_; // table_[j] = j-th finite difference at index_
    BigInt err_scale_;          // alpha.err_ulps
    BigInt current_err_;
    BigInt err_horizon_ = -1;

    // generalized-quadratic source
    std::optional<GeneralizedQuadratic> gq_;
    std::vector<BigInt> floor_ipart_; // [alpha_i * index]
    std::vector<BigInt> floor_fpart_; // frac(alpha_i * index) in ulps
};

inline AngleStream poly_stream(const IntegerPolynomial& p, const Angle& alpha, const BigInt& start) {
    return AngleStream::polynomial(p, alpha, start);
}

inline AngleStream gq_stream(const GeneralizedQuadratic& q, const BigInt& start) {
    return AngleStream::quadratic(q, start);
}

} // namespace recurlab
