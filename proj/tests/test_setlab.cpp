#include <recurlab/setlab.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "oracle.hpp"

using namespace recurlab;

namespace {

// Dyadic num/2^k lifted to 128 bits so toy recipes clear the precision policy.
Angle dy(long num, long k) { return angle_from_dyadic(BigInt(num) << (128 - k), 128); }

Angle sqrt_angle(long d, long bits = 256) { return angle_from_quadratic_irrational(d, bits); }

TorusWindow win(long lo_num, long lo_k, long hi_num, long hi_k) {
    return TorusWindow::from_bounds(dy(lo_num, lo_k), dy(hi_num, hi_k));
}

std::uint64_t fnv1a(const std::vector<std::uint64_t>& words) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint64_t w : words)
        for (int i = 0; i < 8; ++i) {
            h ^= (w >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    return h;
}

} // namespace

TEST_CASE("TorusWindow classify with exact and fuzzy angles") {
    TorusWindow w = win(1, 2, 3, 2); // [1/4, 3/4]
    CHECK(w.classify(dy(1, 1)) == Membership::In);
    CHECK(w.classify(dy(1, 2)) == Membership::In);  // closed at lo
    CHECK(w.classify(dy(3, 2)) == Membership::In);  // closed at hi
    CHECK(w.classify(dy(1, 3)) == Membership::Out); // 1/8
    CHECK(w.classify(dy(0, 1)) == Membership::Out);

    Angle on_edge = Angle{pow2(126), 128, 5}; // 1/4 with error
    CHECK(w.classify(on_edge) == Membership::Uncertain);
    Angle inside = Angle{pow2(127), 128, 1000};
    CHECK(w.classify(inside) == Membership::In);
    Angle hopeless = Angle{pow2(127), 128, pow2(127)};
    CHECK(w.classify(hopeless) == Membership::Uncertain);

    // wrapping window [7/8, 1/8]
    TorusWindow ww = win(7, 3, 1, 3);
    CHECK(ww.classify(dy(0, 1)) == Membership::In);
    CHECK(ww.classify(dy(15, 4)) == Membership::In);
    CHECK(ww.classify(dy(1, 1)) == Membership::Out);

    CHECK(TorusWindow::full(8).classify(dy(1, 1)) == Membership::In);
    CHECK(TorusWindow::full(8).measure() == 1.0);
    CHECK(win(1, 2, 3, 2).measure() == 0.5);
    CHECK(win(1, 2, 1, 2).measure() == 0.0); // degenerate point window

    CHECK_THROWS_AS(TorusWindow::from_bounds(Angle{1, 8, 1}, Angle{2, 8, 0}),
                    std::invalid_argument);
}

TEST_CASE("IntegerSet basics and shifted intersection") {
    IntegerSet s(100);
    s.insert(3);
    s.insert(64);
    s.insert(65);
    s.insert(100);
    CHECK(s.count() == 4);
    CHECK(s.test(3));
    CHECK_FALSE(s.test(4));
    CHECK(s.first_member() == 3);
    CHECK(s.members() == std::vector<long>{3, 64, 65, 100});
    CHECK_THROWS_AS(s.insert(101), std::invalid_argument);
    CHECK_THROWS_AS(IntegerSet(0), std::invalid_argument);

    // {n : n and n+1 both present}
    IntegerSet acc = s;
    acc.and_shifted_down(s, 1);
    CHECK(acc.members() == std::vector<long>{64});
    // shift across word boundaries
    IntegerSet t(200);
    for (long n = 1; n <= 200; n += 3) t.insert(n);
    IntegerSet u = t;
    u.and_shifted_down(t, 63);
    for (long n = 1; n + 63 <= 200; ++n)
        REQUIRE(u.test(n) == (t.test(n) && t.test(n + 63)));
}

TEST_CASE("power window recipe builds exact periodic sets") {
    // {n : {n/2} in [1/4,3/4]} = odds
    SetRecipe r = make_power_window({1}, dy(1, 1), {win(1, 2, 3, 2)});
    IntegerSet s = build_set(r, 10);
    CHECK(s.members() == std::vector<long>{1, 3, 5, 7, 9});

    // duplicate exponents allowed in the general factory: intersection of two windows
    SetRecipe r2 = make_power_window({1, 1}, dy(1, 2), {win(0, 1, 1, 1), win(1, 3, 1, 1)});
    IntegerSet s2 = build_set(r2, 12);
    // {n/4} in [0,1/2] and in [1/8,1/2]: n = 4k gives 0 (fails second), n=4k+1 gives 1/4, n=4k+2 gives 1/2
    CHECK(s2.members() == std::vector<long>{1, 2, 5, 6, 9, 10});
}

TEST_CASE("recipe validation") {
    CHECK_THROWS_AS(recipe_thm_A({2, 2}, sqrt_angle(2)), std::invalid_argument);
    CHECK_THROWS_AS(recipe_thm_A({}, sqrt_angle(2)), std::invalid_argument);
    CHECK_THROWS_AS(recipe_thm_A({0}, sqrt_angle(2)), std::invalid_argument);
    CHECK_THROWS_AS(recipe_thm_B(0, {1}, sqrt_angle(2)), std::invalid_argument);
    CHECK_THROWS_AS(recipe_thm_C({{2, 1}}, {sqrt_angle(2)}), std::invalid_argument);
    CHECK_THROWS_AS(recipe_thm_C({{1, 2}}, {}), std::invalid_argument);
    CHECK_THROWS_AS(make_power_window({1}, dy(1, 1), {}), std::invalid_argument);
}

TEST_CASE("precision policy rejects under-provisioned recipes") {
    Angle b64 = angle_from_quadratic_irrational(2, 64);
    SetRecipe r = recipe_thm_A({4}, b64); // needs 4*20+64 = 144 bits at N=1e6
    CHECK_THROWS_AS(build_set(r, 1000000), precision_error);
    CHECK_THROWS_AS(build_set(recipe_thm_A({1}, b64), 10), precision_error); // needs 68 > 64
}

TEST_CASE("precision policy threshold is exact") {
    Angle b68 = angle_from_quadratic_irrational(2, 68);
    CHECK_NOTHROW(build_set(recipe_thm_A({1}, b68), 16));      // 1*4+64 = 68
    Angle b67 = angle_from_quadratic_irrational(2, 67);
    CHECK_THROWS_AS(build_set(recipe_thm_A({1}, b67), 16), precision_error);
    CHECK(required_frac_bits(2, 1000000) == 104);
    CHECK(required_frac_bits(0, 1) == 64);
}

TEST_CASE("explicit recipe and set equality") {
    SetRecipe r = make_explicit({5, 2, 9, 200});
    IntegerSet s = build_set(r, 100); // 200 outside horizon is dropped
    CHECK(s.members() == std::vector<long>{2, 5, 9});
    CHECK(build_set(r, 100) == s);
}

TEST_CASE("thm A recipe at 1e5 matches independent high-precision scan") {
    // Oracle: direct scalar evaluation at 320 bits (no streams, no windows),
    // classifying {n^2 sqrt2} against [1/4,3/4] by integer compares.
    Angle beta = sqrt_angle(2, 256);
    IntegerSet s = build_set(recipe_thm_A({2}, beta), 100000);
    BigInt m320 = oracle::sqrt_frac_mantissa(2, 320);
    BigInt one = BigInt(1) << 320, q = one >> 2;
    long cnt = 0;
    for (long n = 1; n <= 100000; ++n) {
        BigInt v = (BigInt(n) * n * m320) & (one - 1);
        bool in = v >= q && v <= 3 * q;
        REQUIRE(s.test(n) == in);
        cnt += in ? 1 : 0;
    }
    CHECK(density(s).numerator == cnt);
    CHECK(density(s).value == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("thm A with two exponents has product density") {
    IntegerSet s = build_set(recipe_thm_A({2, 3}, sqrt_angle(2)), 100000);
    CHECK(density(s).value == Catch::Approx(0.25).margin(0.01));
}

TEST_CASE("thm A density converges to one half along the ladder") {
    Angle beta = sqrt_angle(2);
    SetRecipe r = recipe_thm_A({2}, beta);
    IntegerSet s = build_set(r, 1000000);
    long cnt = 0, idx = 0;
    long ladder[4] = {1000, 10000, 100000, 1000000};
    double final_gap = 1.0;
    for (long n = 1; n <= 1000000; ++n) {
        cnt += s.test(n) ? 1 : 0;
        if (n == ladder[idx]) {
            final_gap = std::abs(static_cast<double>(cnt) / n - 0.5);
            ++idx;
        }
    }
    CHECK(final_gap <= 0.02);
}

TEST_CASE("thm B recipes: degenerate ell and quadratic case") {
    // ell=1 uses the literal 2 n^k: {2n/4} = {n/2}
    SetRecipe r1 = recipe_thm_B(1, {1}, dy(1, 2));
    IntegerSet s1 = build_set(r1, 10);
    CHECK(s1.members() == std::vector<long>{1, 3, 5, 7, 9});

    SetRecipe r2 = recipe_thm_B(2, {1}, sqrt_angle(2));
    IntegerSet s2 = build_set(r2, 100000);
    CHECK(density(s2).value == Catch::Approx(0.5).margin(0.01));
    // oracle spot-check: membership is {(n^2+n) sqrt2} in [1/4,3/4]
    BigInt m = oracle::sqrt_frac_mantissa(2, 256);
    BigInt one = BigInt(1) << 256, q = one >> 2;
    for (long n = 1; n <= 2000; ++n) {
        BigInt v = ((BigInt(n) * n + n) * m) & (one - 1);
        REQUIRE(s2.test(n) == (v >= q && v <= 3 * q));
    }
}

TEST_CASE("thm C recipe joint density") {
    SetRecipe r = recipe_thm_C({{1, 2}, {1, 3}}, {sqrt_angle(2), sqrt_angle(3)});
    IntegerSet s = build_set(r, 100000);
    CHECK(density(s).value == Catch::Approx(0.25).margin(0.01));
}

TEST_CASE("counterexample recipe: rational degenerate case is periodic") {
    // alpha = 1/2, beta = best 128-bit dyadic below 1/3: the membership
    // pattern of {[n/2] n beta} vs [1/4,3/4] must match exact rational
    // arithmetic with beta = 1/3 (values stay ~1/12 away from boundaries).
    BigInt third = pow2(128) / 3;
    SetRecipe r = recipe_counterexample(dy(1, 1), angle_from_dyadic(third, 128));
    IntegerSet s = build_set(r, 48);
    for (long n = 1; n <= 48; ++n) {
        oracle::Rational q(BigInt(n / 2) * n, 3);
        oracle::Rational f = oracle::frac(q);
        bool in = f >= oracle::Rational(1, 4) && f <= oracle::Rational(3, 4);
        REQUIRE(s.test(n) == in);
    }
    // period 6 pattern {2,4,5} mod 6
    for (long n = 1; n + 6 <= 48; ++n) REQUIRE(s.test(n) == s.test(n + 6));
}

TEST_CASE("counterexample recipe with irrationals has density one half") {
    SetRecipe r = recipe_counterexample(sqrt_angle(2), sqrt_angle(3));
    IntegerSet s = build_set(r, 100000);
    CHECK(density(s).value == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("floor ambiguity inside a recipe names the offending n") {
    // alpha = 1/2 - 1 ulp with err 1 at 68 bits: at n=2 the product interval
    // is [2^68 - 4, 2^68], which straddles the integer boundary.
    Angle fuzzy = Angle{(pow2(68) / 2) - 1, 68, 1};
    GeneralizedQuadratic q = make_generalized_quadratic(
        {{fuzzy, dy(1, 2)}}, zero_angle(128), zero_angle(128), zero_angle(128));
    SetRecipe r = make_gq_recipe({q}, {win(1, 2, 3, 2)});
    try {
        build_set(r, 16);
        FAIL("expected precision_error");
    } catch (const precision_error& e) {
        CHECK(std::string(e.what()).find("t=2") != std::string::npos);
    }
}

TEST_CASE("uncertain window membership aborts with the offending n") {
    // beta = 1/4 exactly but with a fake error of 1 ulp: {n/4} hits the
    // window boundary 1/4 at n=1 and the error interval straddles it.
    Angle fuzzy = Angle{pow2(126), 128, 1};
    SetRecipe r = make_power_window({1}, fuzzy, {win(1, 2, 3, 2)});
    try {
        build_set(r, 8);
        FAIL("expected precision_error");
    } catch (const precision_error& e) {
        CHECK(std::string(e.what()).find("n=1") != std::string::npos);
    }
}

TEST_CASE("window intersection law") {
    Angle beta = sqrt_angle(2);
    TorusWindow w1 = TorusWindow::from_bounds(
        angle_from_dyadic(pow2(253), 256), angle_from_dyadic(5 * pow2(253), 256)); // [1/8,5/8]
    TorusWindow w2 = middle_half_window(256);                                      // [1/4,3/4]
    TorusWindow w12 = TorusWindow::from_bounds(
        angle_from_dyadic(pow2(254), 256), angle_from_dyadic(5 * pow2(253), 256)); // [1/4,5/8]
    IntegerSet a = build_set(make_power_window({1}, beta, {w1}), 20000);
    IntegerSet b = build_set(make_power_window({1}, beta, {w2}), 20000);
    IntegerSet ab = build_set(make_power_window({1}, beta, {w12}), 20000);
    CHECK(IntegerSet::intersect(a, b) == ab);
}

TEST_CASE("recipe determinism and thread independence") {
    SetRecipe r = recipe_counterexample(sqrt_angle(2), sqrt_angle(3));
    IntegerSet s1 = build_set(r, 50000, ParallelContext{1, 4096});
    IntegerSet s2 = build_set(r, 50000, ParallelContext{8, 4096});
    IntegerSet s3 = build_set(r, 50000, ParallelContext{3, 4096});
    CHECK(fnv1a(s1.words()) == fnv1a(s2.words()));
    CHECK(s1 == s2);
    CHECK(s1 == s3);
}

TEST_CASE("parallel build reports the lowest offending n at any thread count") {
    Angle fuzzy = Angle{pow2(126), 128, 1}; // boundary hit at n=1 and n=3 mod 4
    SetRecipe r = make_power_window({1}, fuzzy, {win(1, 2, 3, 2)});
    for (int threads : {1, 4}) {
        try {
            build_set(r, 4096, ParallelContext{threads, 64});
            FAIL("expected precision_error");
        } catch (const precision_error& e) {
            CHECK(std::string(e.what()).find("n=1") != std::string::npos);
        }
    }
}

TEST_CASE("density_in_residue and power_image") {
    IntegerSet s(30);
    for (long n : {2, 3, 4, 6, 9, 12, 25}) s.insert(n);
    Density d3 = density_in_residue(s, 3);
    CHECK(d3.numerator == 4);   // 3, 6, 9, 12
    CHECK(d3.denominator == 10);
    CHECK_THROWS_AS(density_in_residue(s, 0), std::invalid_argument);

    IntegerSet sq = power_image(s, 2, 700);
    CHECK(sq.members() == std::vector<long>{4, 9, 16, 36, 81, 144, 625});
    IntegerSet cube = power_image(s, 3, 30);
    CHECK(cube.members() == std::vector<long>{8, 27});
    CHECK_THROWS_AS(power_image(s, 0, 100), std::invalid_argument);
}

TEST_CASE("set file round trip preserves members and recipe") {
    SetRecipe r = recipe_thm_A({2}, sqrt_angle(2, 128));
    IntegerSet s = build_set(r, 5000);
    std::stringstream ss;
    write_set(ss, s);
    IntegerSet t = read_set(ss);
    CHECK(t == s);
    CHECK(t.provenance() == s.provenance());
    // recipe JSON survives and rebuilds the same set
    SetRecipe r2 = SetRecipe::from_json(nlohmann::json::parse(t.provenance()));
    CHECK(build_set(r2, 5000) == s);
}

TEST_CASE("set file rejects malformed input") {
    auto reject = [](const std::string& text) {
        std::stringstream ss(text);
        CHECK_THROWS_AS(read_set(ss), std::invalid_argument);
    };
    reject("");
    reject("bogus header\n1:2\n");
    reject("recurlab-set v1 N=10 recipe={}\n5:20\n");   // run beyond horizon
    reject("recurlab-set v1 N=10 recipe={}\n3:2\n2:1\n"); // out of order
    reject("recurlab-set v1 N=10 recipe={}\nx:1\n");
}

TEST_CASE("recipe JSON round trips for every kind") {
    std::vector<SetRecipe> recipes;
    recipes.push_back(recipe_thm_A({2, 5}, sqrt_angle(2, 128)));
    recipes.push_back(recipe_thm_B(3, {1, 2}, sqrt_angle(3, 128)));
    recipes.push_back(recipe_thm_C({{1, 2}, {2, 4}}, {sqrt_angle(2, 128), sqrt_angle(5, 128)}));
    recipes.push_back(recipe_counterexample(sqrt_angle(2, 128), sqrt_angle(3, 128)));
    recipes.push_back(make_explicit({1, 5, 7}));
    for (const auto& r : recipes) {
        SetRecipe back = SetRecipe::from_json(r.to_json());
        CHECK(back.to_json() == r.to_json());
    }
    CHECK_THROWS_AS(SetRecipe::from_json(nlohmann::json{{"kind", "nope"}}),
                    std::invalid_argument);
}
