#pragma once

// Window sets of integers: bitsets over [1,N] built from torus-window
// membership recipes. Recipes serialize to JSON so every set carries its own
// provenance; building is deterministic and chunk-parallel, and any
// membership the error interval cannot decide aborts with precision_error
// naming the offending index.

#include "recurlab/angle.hpp"
#include "recurlab/parallel.hpp"

#include <json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace recurlab {

enum class Membership { In, Out, Uncertain };

// Closed arc [start, start+length] on the torus, endpoints dyadic and exact.
// length == 2^frac_bits denotes the full torus.
class TorusWindow {
public:
    TorusWindow() : start_(0), length_(0), bits_(1) {}

    static TorusWindow from_bounds(const Angle& lo, const Angle& hi) {
        if (lo.err_ulps != 0 || hi.err_ulps != 0)
            throw std::invalid_argument("TorusWindow: endpoints must be exact (err_ulps == 0)");
        long bits = std::max(lo.frac_bits, hi.frac_bits);
        BigInt s = with_frac_bits(lo, bits).mantissa;
        BigInt h = with_frac_bits(hi, bits).mantissa;
        BigInt len = h - s;
        if (len < 0) len += pow2(bits);
        TorusWindow w;
        w.start_ = std::move(s);
        w.length_ = std::move(len);
        w.bits_ = bits;
        return w;
    }

    static TorusWindow full(long frac_bits) {
        TorusWindow w;
        w.start_ = 0;
        w.length_ = pow2(frac_bits);
        w.bits_ = frac_bits;
        return w;
    }

    const BigInt& start() const { return start_; }
    const BigInt& length() const { return length_; }
    long frac_bits() const { return bits_; }
    bool is_full() const { return length_ == pow2(bits_); }

    // Measure is exactly length / 2^frac_bits; the double form is for reports.
    double measure() const {
        if (is_full()) return 1.0;
        long sh = bits_ - 64;
        BigInt m = sh > 0 ? BigInt(length_ >> sh) : BigInt(length_ << -sh);
        return static_cast<double>(m.convert_to<std::uint64_t>()) * 0x1p-64;
    }
    std::pair<BigInt, long> measure_exact() const { return {length_, bits_}; }

    // Tri-state membership of the error interval [a - err, a + err].
    Membership classify(const Angle& a) const {
        long tb = std::max(bits_, a.frac_bits);
        BigInt one = pow2(tb);
        BigInt start = start_ << (tb - bits_);
        BigInt len = length_ << (tb - bits_);
        if (len >= one) return Membership::In;
        BigInt e = a.err_ulps << (tb - a.frac_bits);
        if (2 * e >= one) return Membership::Uncertain;
        BigInt d1 = (a.mantissa << (tb - a.frac_bits)) - e - start;
        d1 %= one;
        if (d1 < 0) d1 += one;
        if (d1 + 2 * e <= len) return Membership::In;
        if (d1 > len && d1 + 2 * e < one) return Membership::Out;
        return Membership::Uncertain;
    }

    bool operator==(const TorusWindow& o) const {
        long tb = std::max(bits_, o.bits_);
        return (start_ << (tb - bits_)) == (o.start_ << (tb - o.bits_)) &&
               (length_ << (tb - bits_)) == (o.length_ << (tb - o.bits_));
    }

private:
    BigInt start_;
    BigInt length_; // in [0, 2^bits]
    long bits_;
};

// [1/4, 3/4] at the given precision.
inline TorusWindow middle_half_window(long frac_bits) {
    return TorusWindow::from_bounds(angle_from_dyadic(pow2(frac_bits - 2), frac_bits),
                                    angle_from_dyadic(3 * pow2(frac_bits - 2), frac_bits));
}

// ---------------------------------------------------------------------------

class IntegerSet {
public:
    static constexpr long kMaxHorizon = 100000000;

    explicit IntegerSet(long horizon, std::string provenance = "adhoc")
        : n_(horizon), provenance_(std::move(provenance)) {
        if (horizon < 1 || horizon > kMaxHorizon)
            throw std::invalid_argument("IntegerSet: horizon out of [1, 1e8]");
        words_.assign(static_cast<std::size_t>((horizon + 63) / 64), 0);
    }

    long horizon() const { return n_; }
    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string p) { provenance_ = std::move(p); }

    bool test(long n) const {
        if (n < 1 || n > n_) return false;
        return (words_[(n - 1) >> 6] >> ((n - 1) & 63)) & 1;
    }

    void insert(long n) {
        if (n < 1 || n > n_) throw std::invalid_argument("IntegerSet::insert: out of horizon");
        words_[(n - 1) >> 6] |= std::uint64_t(1) << ((n - 1) & 63);
    }

    long count() const {
        long c = 0;
        for (std::uint64_t w : words_) c += __builtin_popcountll(w);
        return c;
    }

    // Smallest member, or 0 if empty.
    long first_member() const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i]) return static_cast<long>(i * 64 + __builtin_ctzll(words_[i]) + 1);
        return 0;
    }

    std::vector<long> members() const {
        std::vector<long> out;
        out.reserve(static_cast<std::size_t>(count()));
        for (std::size_t i = 0; i < words_.size(); ++i) {
            std::uint64_t w = words_[i];
            while (w) {
                out.push_back(static_cast<long>(i * 64 + __builtin_ctzll(w) + 1));
                w &= w - 1;
            }
        }
        return out;
    }

    template <class Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t i = 0; i < words_.size(); ++i) {
            std::uint64_t w = words_[i];
            while (w) {
                fn(static_cast<long>(i * 64 + __builtin_ctzll(w) + 1));
                w &= w - 1;
            }
        }
    }

    // this &= {n : n + r in src}, i.e. src shifted down by r >= 0.
    void and_shifted_down(const IntegerSet& src, long r) {
        if (src.n_ != n_) throw std::invalid_argument("and_shifted_down: horizon mismatch");
        if (r < 0) throw std::invalid_argument("and_shifted_down: negative shift");
        std::size_t q = static_cast<std::size_t>(r >> 6);
        unsigned s = static_cast<unsigned>(r & 63);
        std::size_t W = words_.size();
        for (std::size_t i = 0; i < W; ++i) {
            std::uint64_t v = 0;
            if (i + q < W) {
                v = src.words_[i + q] >> s;
                if (s && i + q + 1 < W) v |= src.words_[i + q + 1] << (64 - s);
            }
            words_[i] &= v;
        }
    }

    static IntegerSet intersect(const IntegerSet& a, const IntegerSet& b) {
        if (a.n_ != b.n_) throw std::invalid_argument("intersect: horizon mismatch");
        IntegerSet out(a.n_, "adhoc");
        for (std::size_t i = 0; i < out.words_.size(); ++i) out.words_[i] = a.words_[i] & b.words_[i];
        return out;
    }

    static IntegerSet unite(const IntegerSet& a, const IntegerSet& b) {
        if (a.n_ != b.n_) throw std::invalid_argument("unite: horizon mismatch");
        IntegerSet out(a.n_, "adhoc");
        for (std::size_t i = 0; i < out.words_.size(); ++i) out.words_[i] = a.words_[i] | b.words_[i];
        return out;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }
    std::vector<std::uint64_t>& mutable_words() { return words_; }

    bool operator==(const IntegerSet& o) const { return n_ == o.n_ && words_ == o.words_; }

private:
    long n_;
    std::vector<std::uint64_t> words_;
    std::string provenance_;
};

// ---------------------------------------------------------------------------
// Recipes.

enum class RecipeKind {
    PowerWindow,              // {n : {n^k beta} in W_k for each exponent k}
    LongPowerWindow,          // {n : {(n^{l k} + n^k) beta} in W_k}; l == 1 uses 2 n^k
    IndependentVectors,       // {n : {p_i(n) alpha_i} in W_i}, p_i = sum of n^b over vector i
    GeneralizedQuadraticWindow, // {n : {q_i(n)} in W_i}
    Explicit,
};

struct BuildCondition {
    bool is_gq = false;
    IntegerPolynomial poly;
    Angle alpha;
    GeneralizedQuadratic gq;
    TorusWindow window;
    unsigned degree = 0;
    long frac_bits = 0;
};

struct SetRecipe {
    RecipeKind kind = RecipeKind::Explicit;
    std::vector<long> exponents;             // PowerWindow / LongPowerWindow
    long ell = 0;                            // LongPowerWindow
    std::vector<std::vector<long>> vectors;  // IndependentVectors
    std::vector<Angle> angles;
    std::vector<TorusWindow> windows;
    std::vector<GeneralizedQuadratic> quadratics;
    std::vector<long> members;               // Explicit
    std::vector<std::string> assertions;     // rational-independence statements in force

    std::vector<BuildCondition> build_conditions() const;
    nlohmann::json to_json() const;
    static SetRecipe from_json(const nlohmann::json& j);
};

namespace detail {

inline long gq_frac_bits(const GeneralizedQuadratic& q) {
    long bits = q.c.frac_bits;
    for (const auto& [a, b] : q.floor_terms) bits = std::max({bits, a.frac_bits, b.frac_bits});
    return std::max({bits, q.gamma.frac_bits, q.delta.frac_bits});
}

inline void require_positive_exponents(const std::vector<long>& es, const char* who) {
    if (es.empty()) throw std::invalid_argument(std::string(who) + ": empty exponent list");
    for (long e : es)
        if (e < 1) throw std::invalid_argument(std::string(who) + ": exponents must be >= 1");
}

} // namespace detail

inline std::vector<BuildCondition> SetRecipe::build_conditions() const {
    std::vector<BuildCondition> out;
    switch (kind) {
    case RecipeKind::PowerWindow:
        for (std::size_t i = 0; i < exponents.size(); ++i) {
            BuildCondition c;
            c.poly = IntegerPolynomial::monomial(1, static_cast<unsigned>(exponents[i]));
            c.alpha = angles.at(0);
            c.window = windows.at(i);
            c.degree = static_cast<unsigned>(exponents[i]);
            c.frac_bits = c.alpha.frac_bits;
            out.push_back(std::move(c));
        }
        break;
    case RecipeKind::LongPowerWindow:
        for (std::size_t i = 0; i < exponents.size(); ++i) {
            BuildCondition c;
            long k = exponents[i];
            c.poly = ell == 1 ? IntegerPolynomial::monomial(2, static_cast<unsigned>(k))
                              : IntegerPolynomial::from_exponents({ell * k, k});
            c.alpha = angles.at(0);
            c.window = windows.at(i);
            c.degree = c.poly.degree();
            c.frac_bits = c.alpha.frac_bits;
            out.push_back(std::move(c));
        }
        break;
    case RecipeKind::IndependentVectors:
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            BuildCondition c;
            c.poly = IntegerPolynomial::from_exponents(vectors[i]);
            c.alpha = angles.at(i);
            c.window = windows.at(i);
            c.degree = c.poly.degree();
            c.frac_bits = c.alpha.frac_bits;
            out.push_back(std::move(c));
        }
        break;
    case RecipeKind::GeneralizedQuadraticWindow:
        for (std::size_t i = 0; i < quadratics.size(); ++i) {
            BuildCondition c;
            c.is_gq = true;
            c.gq = quadratics[i];
            c.window = windows.at(i);
            c.degree = 2;
            c.frac_bits = detail::gq_frac_bits(c.gq);
            out.push_back(std::move(c));
        }
        break;
    case RecipeKind::Explicit:
        break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Recipe factories.

inline SetRecipe make_power_window(std::vector<long> exponents, Angle beta,
                                   std::vector<TorusWindow> windows) {
    detail::require_positive_exponents(exponents, "make_power_window");
    if (windows.size() != exponents.size())
        throw std::invalid_argument("make_power_window: one window per exponent");
    SetRecipe r;
    r.kind = RecipeKind::PowerWindow;
    r.exponents = std::move(exponents);
    r.angles = {std::move(beta)};
    r.windows = std::move(windows);
    r.assertions = {"beta irrational; 1, beta rationally independent (caller-asserted)"};
    return r;
}

inline SetRecipe recipe_thm_A(const std::vector<long>& bad_exponents, const Angle& beta) {
    detail::require_positive_exponents(bad_exponents, "recipe_thm_A");
    std::vector<long> sorted = bad_exponents;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("recipe_thm_A: duplicate exponent");
    std::vector<TorusWindow> ws(bad_exponents.size(), middle_half_window(beta.frac_bits));
    return make_power_window(bad_exponents, beta, std::move(ws));
}

inline SetRecipe recipe_thm_B(long ell, const std::vector<long>& bad_exponents, const Angle& beta) {
    if (ell < 1) throw std::invalid_argument("recipe_thm_B: ell must be >= 1");
    detail::require_positive_exponents(bad_exponents, "recipe_thm_B");
    std::vector<long> sorted = bad_exponents;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("recipe_thm_B: duplicate exponent");
    SetRecipe r;
    r.kind = RecipeKind::LongPowerWindow;
    r.ell = ell;
    r.exponents = bad_exponents;
    r.angles = {beta};
    r.windows.assign(bad_exponents.size(), middle_half_window(beta.frac_bits));
    r.assertions = {"beta irrational; 1, beta rationally independent (caller-asserted)"};
    return r;
}

inline SetRecipe recipe_thm_C(const std::vector<std::vector<long>>& bad_vectors,
                              const std::vector<Angle>& alphas) {
    if (bad_vectors.empty()) throw std::invalid_argument("recipe_thm_C: empty vector list");
    if (bad_vectors.size() != alphas.size())
        throw std::invalid_argument("recipe_thm_C: need one angle per vector");
    for (const auto& v : bad_vectors) {
        detail::require_positive_exponents(v, "recipe_thm_C");
        for (std::size_t j = 1; j < v.size(); ++j)
            if (v[j] <= v[j - 1])
                throw std::invalid_argument("recipe_thm_C: vectors must be strictly increasing");
    }
    SetRecipe r;
    r.kind = RecipeKind::IndependentVectors;
    r.vectors = bad_vectors;
    r.angles = alphas;
    for (const auto& a : alphas) r.windows.push_back(middle_half_window(a.frac_bits));
    r.assertions = {"1, alpha_1, ..., alpha_s rationally independent (caller-asserted)"};
    return r;
}

inline SetRecipe make_independent_vectors(std::vector<std::vector<long>> vectors,
                                          std::vector<Angle> alphas,
                                          std::vector<TorusWindow> windows) {
    if (vectors.empty() || vectors.size() != alphas.size() || vectors.size() != windows.size())
        throw std::invalid_argument("make_independent_vectors: size mismatch");
    for (const auto& v : vectors) {
        detail::require_positive_exponents(v, "make_independent_vectors");
        for (std::size_t j = 1; j < v.size(); ++j)
            if (v[j] <= v[j - 1])
                throw std::invalid_argument("make_independent_vectors: vectors must be strictly increasing");
    }
    SetRecipe r;
    r.kind = RecipeKind::IndependentVectors;
    r.vectors = std::move(vectors);
    r.angles = std::move(alphas);
    r.windows = std::move(windows);
    r.assertions = {"1, alpha_1, ..., alpha_s rationally independent (caller-asserted)"};
    return r;
}

inline SetRecipe make_gq_recipe(std::vector<GeneralizedQuadratic> quadratics,
                                std::vector<TorusWindow> windows) {
    if (quadratics.empty() || quadratics.size() != windows.size())
        throw std::invalid_argument("make_gq_recipe: size mismatch");
    SetRecipe r;
    r.kind = RecipeKind::GeneralizedQuadraticWindow;
    r.quadratics = std::move(quadratics);
    r.windows = std::move(windows);
    r.assertions = {"generalized-quadratic coefficients as constructed (caller-asserted independence)"};
    return r;
}

// {n : {[n alpha] n beta} in [1/4, 3/4]}.
inline SetRecipe recipe_counterexample(const Angle& alpha, const Angle& beta) {
    GeneralizedQuadratic q = make_generalized_quadratic(
        {{alpha, beta}}, zero_angle(beta.frac_bits), zero_angle(beta.frac_bits),
        zero_angle(beta.frac_bits));
    SetRecipe r = make_gq_recipe({q}, {middle_half_window(detail::gq_frac_bits(q))});
    r.assertions = {"1, alpha, beta, alpha*beta rationally independent (caller-asserted)"};
    return r;
}

inline SetRecipe make_explicit(std::vector<long> members) {
    SetRecipe r;
    r.kind = RecipeKind::Explicit;
    r.members = std::move(members);
    return r;
}

// ---------------------------------------------------------------------------
// JSON serialization.

namespace detail {

inline nlohmann::json window_to_json(const TorusWindow& w) {
    return nlohmann::json{{"start", to_hex(w.start())},
                          {"length", to_hex(w.length())},
                          {"frac_bits", w.frac_bits()}};
}

inline TorusWindow window_from_json(const nlohmann::json& j) {
    long bits = j.at("frac_bits").get<long>();
    BigInt start = bigint_from_hex(j.at("start").get<std::string>());
    BigInt length = bigint_from_hex(j.at("length").get<std::string>());
    if (bits < 1 || start >= pow2(bits) || length > pow2(bits))
        throw std::invalid_argument("window_from_json: out of range");
    if (length == pow2(bits)) return TorusWindow::full(bits);
    Angle lo = angle_from_dyadic(start, bits);
    BigInt hi = start + length;
    if (hi >= pow2(bits)) hi -= pow2(bits);
    return TorusWindow::from_bounds(lo, angle_from_dyadic(hi, bits));
}

inline nlohmann::json gq_to_json(const GeneralizedQuadratic& q) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [a, b] : q.floor_terms)
        terms.push_back({angle_to_string(a), angle_to_string(b)});
    return nlohmann::json{{"floor_terms", terms},
                          {"gamma", angle_to_string(q.gamma)},
                          {"delta", angle_to_string(q.delta)},
                          {"c", angle_to_string(q.c)}};
}

inline GeneralizedQuadratic gq_from_json(const nlohmann::json& j) {
    GeneralizedQuadratic q;
    for (const auto& t : j.at("floor_terms"))
        q.floor_terms.emplace_back(angle_from_string(t.at(0).get<std::string>()),
                                   angle_from_string(t.at(1).get<std::string>()));
    q.gamma = angle_from_string(j.at("gamma").get<std::string>());
    q.delta = angle_from_string(j.at("delta").get<std::string>());
    q.c = angle_from_string(j.at("c").get<std::string>());
    return q;
}

inline const char* kind_name(RecipeKind k) {
    switch (k) {
    case RecipeKind::PowerWindow: return "power_window";
    case RecipeKind::LongPowerWindow: return "long_power_window";
    case RecipeKind::IndependentVectors: return "independent_vectors";
    case RecipeKind::GeneralizedQuadraticWindow: return "generalized_quadratic";
    case RecipeKind::Explicit: return "explicit";
    }
    return "explicit";
}

} // namespace detail

inline nlohmann::json SetRecipe::to_json() const {
    nlohmann::json j;
    j["kind"] = detail::kind_name(kind);
    if (!assertions.empty()) j["assertions"] = assertions;
    switch (kind) {
    case RecipeKind::PowerWindow:
    case RecipeKind::LongPowerWindow: {
        j["exponents"] = exponents;
        if (kind == RecipeKind::LongPowerWindow) j["ell"] = ell;
        j["beta"] = angle_to_string(angles.at(0));
        nlohmann::json ws = nlohmann::json::array();
        for (const auto& w : windows) ws.push_back(detail::window_to_json(w));
        j["windows"] = ws;
        break;
    }
    case RecipeKind::IndependentVectors: {
        j["vectors"] = vectors;
        nlohmann::json as = nlohmann::json::array(), ws = nlohmann::json::array();
        for (const auto& a : angles) as.push_back(angle_to_string(a));
        for (const auto& w : windows) ws.push_back(detail::window_to_json(w));
        j["alphas"] = as;
        j["windows"] = ws;
        break;
    }
    case RecipeKind::GeneralizedQuadraticWindow: {
        nlohmann::json qs = nlohmann::json::array(), ws = nlohmann::json::array();
        for (const auto& q : quadratics) qs.push_back(detail::gq_to_json(q));
        for (const auto& w : windows) ws.push_back(detail::window_to_json(w));
        j["quadratics"] = qs;
        j["windows"] = ws;
        break;
    }
    case RecipeKind::Explicit:
        j["members"] = members;
        break;
    }
    return j;
}

inline SetRecipe SetRecipe::from_json(const nlohmann::json& j) {
    SetRecipe r;
    std::string kind = j.at("kind").get<std::string>();
    if (j.contains("assertions")) r.assertions = j.at("assertions").get<std::vector<std::string>>();
    auto read_windows = [&] {
        for (const auto& w : j.at("windows")) r.windows.push_back(detail::window_from_json(w));
    };
    if (kind == "power_window" || kind == "long_power_window") {
        r.kind = kind == "power_window" ? RecipeKind::PowerWindow : RecipeKind::LongPowerWindow;
        r.exponents = j.at("exponents").get<std::vector<long>>();
        if (r.kind == RecipeKind::LongPowerWindow) r.ell = j.at("ell").get<long>();
        r.angles = {angle_from_string(j.at("beta").get<std::string>())};
        read_windows();
    } else if (kind == "independent_vectors") {
        r.kind = RecipeKind::IndependentVectors;
        r.vectors = j.at("vectors").get<std::vector<std::vector<long>>>();
        for (const auto& a : j.at("alphas")) r.angles.push_back(angle_from_string(a.get<std::string>()));
        read_windows();
    } else if (kind == "generalized_quadratic") {
        r.kind = RecipeKind::GeneralizedQuadraticWindow;
        for (const auto& q : j.at("quadratics")) r.quadratics.push_back(detail::gq_from_json(q));
        read_windows();
    } else if (kind == "explicit") {
        r.kind = RecipeKind::Explicit;
        r.members = j.at("members").get<std::vector<long>>();
    } else {
        throw std::invalid_argument("SetRecipe::from_json: unknown kind '" + kind + "'");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Building.

inline long ceil_log2(long n) {
    if (n < 1) throw std::invalid_argument("ceil_log2: n must be >= 1");
    long b = 0;
    while ((1L << b) < n) ++b;
    return b;
}

// Policy minimum: frac_bits >= degree * ceil(log2 N) + 64.
inline long required_frac_bits(unsigned degree, long N) {
    return static_cast<long>(degree) * ceil_log2(N) + 64;
}

inline IntegerSet build_set(const SetRecipe& recipe, long N, const ParallelContext& ctx = {}) {
    IntegerSet out(N, recipe.to_json().dump());
    if (recipe.kind == RecipeKind::Explicit) {
        for (long m : recipe.members)
            if (m >= 1 && m <= N) out.insert(m);
        return out;
    }
    auto conds = recipe.build_conditions();
    if (conds.empty()) throw std::invalid_argument("build_set: recipe has no conditions");
    for (const auto& c : conds) {
        long need = required_frac_bits(c.degree, N);
        if (c.frac_bits < need) {
            std::ostringstream os;
            os << "build_set: frac_bits " << c.frac_bits << " below policy minimum " << need
               << " for degree " << c.degree << " at N=" << N;
            throw precision_error(os.str());
        }
    }
    auto& words = out.mutable_words();
    parallel_chunks(1, N + 1, ctx, [&](long lo, long hi) {
        std::vector<AngleStream> streams;
        streams.reserve(conds.size());
        for (const auto& c : conds)
            streams.push_back(c.is_gq ? gq_stream(c.gq, lo) : poly_stream(c.poly, c.alpha, lo));
        for (long n = lo; n < hi; ++n) {
            bool in = true;
            for (std::size_t i = 0; i < conds.size(); ++i) {
                Membership m = conds[i].window.classify(streams[i].value());
                if (m == Membership::Uncertain) {
                    std::ostringstream os;
                    os << "build_set: uncertain membership at n=" << n;
                    throw precision_error(os.str());
                }
                if (m == Membership::Out) {
                    in = false;
                    break;
                }
            }
            if (in) words[(n - 1) >> 6] |= std::uint64_t(1) << ((n - 1) & 63);
            for (auto& s : streams) s.advance();
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Statistics.

struct Density {
    long numerator = 0;
    long denominator = 1;
    double value = 0.0;
};

inline Density density(const IntegerSet& s) {
    Density d;
    d.numerator = s.count();
    d.denominator = s.horizon();
    d.value = static_cast<double>(d.numerator) / static_cast<double>(d.denominator);
    return d;
}

// Density along multiples of d: |set ∩ dZ| / floor(N/d).
inline Density density_in_residue(const IntegerSet& s, long d) {
    if (d < 1) throw std::invalid_argument("density_in_residue: d must be >= 1");
    if (d > s.horizon()) throw std::invalid_argument("density_in_residue: no multiples within horizon");
    Density out;
    long c = 0;
    for (long n = d; n <= s.horizon(); n += d) c += s.test(n) ? 1 : 0;
    out.numerator = c;
    out.denominator = s.horizon() / d;
    out.value = static_cast<double>(c) / static_cast<double>(out.denominator);
    return out;
}

// {r^k : r in set, r^k <= cap}.
inline IntegerSet power_image(const IntegerSet& s, unsigned k, long cap) {
    if (k < 1) throw std::invalid_argument("power_image: k must be >= 1");
    IntegerSet out(cap, "adhoc");
    s.for_each([&](long r) {
        BigInt v = ipow(BigInt(r), k);
        if (v <= cap) out.insert(v.convert_to<long>());
    });
    return out;
}

// ---------------------------------------------------------------------------
// Set files: "recurlab-set v1 N=<N> recipe=<json>" + one "<start>:<len>" run
// per line, runs ascending and disjoint.

inline void write_set(std::ostream& os, const IntegerSet& s) {
    os << "recurlab-set v1 N=" << s.horizon() << " recipe=" << s.provenance() << "\n";
    long run_start = 0, run_len = 0;
    for (long n = 1; n <= s.horizon(); ++n) {
        if (s.test(n)) {
            if (run_len == 0) run_start = n;
            ++run_len;
        } else if (run_len) {
            os << run_start << ':' << run_len << "\n";
            run_len = 0;
        }
    }
    if (run_len) os << run_start << ':' << run_len << "\n";
}

inline IntegerSet read_set(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::invalid_argument("read_set: empty input");
    const std::string magic = "recurlab-set v1 N=";
    if (header.rfind(magic, 0) != 0) throw std::invalid_argument("read_set: bad header magic");
    std::size_t pos = magic.size();
    std::size_t sp = header.find(' ', pos);
    if (sp == std::string::npos || header.compare(sp, 8, " recipe=") != 0)
        throw std::invalid_argument("read_set: bad header fields");
    long N = 0;
    try {
        N = std::stol(header.substr(pos, sp - pos));
    } catch (const std::exception&) {
        throw std::invalid_argument("read_set: bad N in header");
    }
    std::string recipe = header.substr(sp + 8);
    IntegerSet out(N, recipe);
    std::string line;
    long prev_end = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::size_t colon = line.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("read_set: bad run line: " + line);
        long start = 0, len = 0;
        try {
            start = std::stol(line.substr(0, colon));
            len = std::stol(line.substr(colon + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("read_set: bad run line: " + line);
        }
        if (start <= prev_end || len < 1 || start + len - 1 > N)
            throw std::invalid_argument("read_set: run out of order or out of range: " + line);
        for (long n = start; n < start + len; ++n) out.insert(n);
        prev_end = start + len - 1;
    }
    return out;
}

} // namespace recurlab
