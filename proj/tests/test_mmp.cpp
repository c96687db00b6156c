#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "ricci_mmp/mmp.hpp"

using namespace ricci_mmp;

namespace {

// Independent pairing oracle: projection coefficient for the fan relation,
// then D.D_i = c_{i-1} + c_i * a_i + c_{i+1}. Shares no code with the library.
long long oracle_self_int(const ToricSurfaceFan& f, int i) {
    const auto& p = f.ray(i - 1);
    const auto& u = f.ray(i);
    const auto& n = f.ray(i + 1);
    long long num = (p.x + n.x) * u.x + (p.y + n.y) * u.y;
    long long den = u.x * u.x + u.y * u.y;
    REQUIRE(num % den == 0);
    return -(num / den);
}

Rational oracle_pairing(const ToricSurfaceFan& f, const WeilDivisor& d, int i) {
    int n = f.size();
    return d.coeffs[(i + n - 1) % n] + d.coeffs[i] * Rational(oracle_self_int(f, i)) +
           d.coeffs[(i + 1) % n];
}

MmpPair pair_p2() {
    return make_mmp_pair(ToricSurfaceFan{{{1, 0}, {0, 1}, {-1, -1}}},
                         WeilDivisor{{1, 0, 0}});
}

MmpPair pair_f1(Rational c3) {
    return make_mmp_pair(ToricSurfaceFan{{{1, 0}, {0, 1}, {-1, 1}, {0, -1}}},
                         WeilDivisor{{1, 0, 0, c3}});
}

// Plane blown up in two torus-fixed points lying on a common line; the two
// exceptional rays sit at non-adjacent positions 1 and 4.
ToricSurfaceFan fan_dp2() {
    return ToricSurfaceFan{{{1, 0}, {1, 1}, {0, 1}, {-1, -1}, {0, -1}}};
}

MmpPair pair_dp2_symmetric() {
    // Pairings (2,1,3,3,1): the minimum ratio 1 is hit exactly by the two
    // disjoint exceptional curves at indices 1 and 4.
    return make_mmp_pair(fan_dp2(), WeilDivisor{{0, 0, 1, 3, 2}});
}

MmpPair pair_dp2_anticanonical() {
    return make_mmp_pair(fan_dp2(), WeilDivisor{{1, 1, 1, 1, 1}});
}

Rational square(const MmpPair& p, const WeilDivisor& d) {
    return divisor_product(p.fan, d, d);
}

WeilDivisor h_plus_tk(const MmpPair& p, const Rational& t) {
    return add(p.h, scale(t, canonical_divisor(p.fan)));
}

}  // namespace

TEST_CASE("scaling threshold golden values") {
    CHECK(scaling_threshold(pair_p2()) == 3);
    CHECK(scaling_threshold(pair_f1(3)) == 1);
    CHECK(scaling_threshold(pair_f1(1)) == 2);
    CHECK(scaling_threshold(pair_dp2_symmetric()) == 1);
    CHECK(scaling_threshold(pair_dp2_anticanonical()) == 1);
}

TEST_CASE("scaling threshold agrees with ratio oracle on corpus") {
    for (unsigned long long seed = 1; seed <= 25; ++seed) {
        MmpPair p = random_blowup_pair(seed, 1 + int(seed % 5));
        WeilDivisor k = canonical_divisor(p.fan);
        bool any = false;
        Rational best = 0;
        for (int i = 0; i < p.fan.size(); ++i) {
            Rational kd = oracle_pairing(p.fan, k, i);
            if (kd < 0) {
                Rational ratio = oracle_pairing(p.fan, p.h, i) / (-kd);
                if (!any || ratio < best) best = ratio;
                any = true;
            }
        }
        REQUIRE(any);
        CHECK(scaling_threshold(p) == 1 / best);
    }
}

TEST_CASE("extremal set golden values") {
    CHECK(extremal_set(pair_f1(3)) == std::vector<int>{1});
    CHECK(extremal_set(pair_f1(1)) == std::vector<int>{0, 2});
    CHECK(extremal_set(pair_p2()) == std::vector<int>{0, 1, 2});
    CHECK(extremal_set(pair_dp2_symmetric()) == std::vector<int>{1, 4});
    CHECK(extremal_set(pair_dp2_anticanonical()) == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("contraction classification golden values") {
    {
        MmpPair p = pair_f1(3);
        ContractionKind k = classify_contraction(p, extremal_set(p));
        CHECK(k.type == ContractionType::Divisorial);
        CHECK(k.rays == std::vector<int>{1});
    }
    {
        MmpPair p = pair_f1(1);
        ContractionKind k = classify_contraction(p, extremal_set(p));
        CHECK(k.type == ContractionType::MoriFiber);
        CHECK(k.rays == std::vector<int>{0, 2});
    }
    {
        MmpPair p = pair_p2();
        ContractionKind k = classify_contraction(p, extremal_set(p));
        CHECK(k.type == ContractionType::PointContraction);
        CHECK(k.rays.empty());
    }
    {
        MmpPair p = pair_dp2_symmetric();
        ContractionKind k = classify_contraction(p, extremal_set(p));
        CHECK(k.type == ContractionType::Divisorial);
        CHECK(k.rays == std::vector<int>{1, 4});
    }
    {
        MmpPair p = pair_dp2_anticanonical();
        CHECK_THROWS_AS(classify_contraction(p, extremal_set(p)), AmbiguousContraction);
    }
}

TEST_CASE("surgery blows down one exceptional curve and pushes the divisor forward") {
    MmpPair p = pair_f1(3);
    auto result = execute_surgery(p, classify_contraction(p, extremal_set(p)));
    REQUIRE(std::holds_alternative<MmpPair>(result));
    const MmpPair& q = std::get<MmpPair>(result);

    REQUIRE(q.fan.size() == 3);
    CHECK(q.fan.rays == std::vector<RayVector>{{1, 0}, {-1, 1}, {0, -1}});
    CHECK(fans_isomorphic(q.fan, projective_plane_fan()));

    CHECK(q.h.coeffs == std::vector<Rational>{0, -1, 2});
    for (int i = 0; i < 3; ++i) CHECK(oracle_pairing(q.fan, q.h, i) == 1);
    CHECK(square(q, q.h) == 1);
}

TEST_CASE("surgery contracts two disjoint exceptional curves at once") {
    MmpPair p = pair_dp2_symmetric();
    auto result = execute_surgery(p, classify_contraction(p, extremal_set(p)));
    REQUIRE(std::holds_alternative<MmpPair>(result));
    const MmpPair& q = std::get<MmpPair>(result);

    CHECK(q.fan.rays == std::vector<RayVector>{{1, 0}, {0, 1}, {-1, -1}});
    CHECK(q.h.coeffs == std::vector<Rational>{-1, 0, 2});
    CHECK(is_ample(q.fan, q.h));
    CHECK(square(q, q.h) == 1);
}

TEST_CASE("surgery on fiber and point contractions reports the terminal state") {
    {
        MmpPair p = pair_f1(1);
        auto r = execute_surgery(p, classify_contraction(p, extremal_set(p)));
        REQUIRE(std::holds_alternative<TerminalState>(r));
        CHECK(std::get<TerminalState>(r) == TerminalState::MoriFiberSpace);
    }
    {
        MmpPair p = pair_p2();
        auto r = execute_surgery(p, classify_contraction(p, extremal_set(p)));
        REQUIRE(std::holds_alternative<TerminalState>(r));
        CHECK(std::get<TerminalState>(r) == TerminalState::Point);
    }
}

TEST_CASE("surgery rejects adjacent contracted rays and non-ample results") {
    MmpPair p = pair_dp2_symmetric();
    // Rays 0 and 1 are both exceptional but meet; contracting both at once is invalid.
    CHECK_THROWS_AS(execute_surgery(p, ContractionKind{ContractionType::Divisorial, {0, 1}}),
                    AdjacentContractedRays);
    // Contracting only ray 1 while ray 4 also pairs to zero leaves a non-ample image.
    CHECK_THROWS_AS(execute_surgery(p, ContractionKind{ContractionType::Divisorial, {1}}),
                    ResultNotAmple);
}

TEST_CASE("golden trace: first Hirzebruch surface with the heavy polarization") {
    MmpTrace tr = run_mmp_with_scaling(pair_f1(3));
    REQUIRE(tr.steps.size() == 2);
    CHECK(tr.terminal == TerminalState::Point);
    CHECK_FALSE(tr.offending.has_value());

    CHECK(tr.steps[0].lambda == 1);
    CHECK(tr.steps[0].T == 1);
    CHECK(tr.steps[0].kind.type == ContractionType::Divisorial);
    CHECK(tr.steps[0].kind.rays == std::vector<int>{1});
    REQUIRE(tr.steps[0].pair_after.has_value());
    CHECK(fans_isomorphic(tr.steps[0].pair_after->fan, projective_plane_fan()));
    CHECK(tr.steps[0].pair_after->h.coeffs == std::vector<Rational>{0, -1, 2});

    CHECK(tr.steps[1].lambda == 3);
    CHECK(tr.steps[1].T == Rational(4, 3));
    CHECK(tr.steps[1].kind.type == ContractionType::PointContraction);
    CHECK_FALSE(tr.steps[1].pair_after.has_value());
}

TEST_CASE("golden trace: projective plane contracts to a point at one third") {
    MmpTrace tr = run_mmp_with_scaling(pair_p2());
    REQUIRE(tr.steps.size() == 1);
    CHECK(tr.steps[0].lambda == 3);
    CHECK(tr.steps[0].T == Rational(1, 3));
    CHECK(tr.steps[0].kind.type == ContractionType::PointContraction);
    CHECK(tr.terminal == TerminalState::Point);
}

TEST_CASE("golden trace: light polarization ends in a Mori fiber space at one half") {
    MmpTrace tr = run_mmp_with_scaling(pair_f1(1));
    REQUIRE(tr.steps.size() == 1);
    CHECK(tr.steps[0].lambda == 2);
    CHECK(tr.steps[0].T == Rational(1, 2));
    CHECK(tr.steps[0].kind.type == ContractionType::MoriFiber);
    CHECK(tr.steps[0].kind.rays == std::vector<int>{0, 2});
    CHECK(tr.terminal == TerminalState::MoriFiberSpace);
}

TEST_CASE("golden trace: simultaneous double contraction runs but is not good") {
    MmpPair p = pair_dp2_symmetric();
    MmpTrace tr = run_mmp_with_scaling(p);
    REQUIRE(tr.steps.size() == 2);
    CHECK(tr.steps[0].T == 1);
    CHECK(tr.steps[0].kind.rays == std::vector<int>{1, 4});
    CHECK(tr.steps[1].T == Rational(4, 3));
    CHECK(tr.terminal == TerminalState::Point);

    GoodDivisorReport rep = is_good_initial_divisor(p);
    CHECK_FALSE(rep.good);
    REQUIRE(rep.offending_step.has_value());
    CHECK(*rep.offending_step == 0);
}

TEST_CASE("mixed extremal set terminates the run as a bad divisor with a witness") {
    MmpPair p = pair_dp2_anticanonical();
    MmpTrace tr = run_mmp_with_scaling(p);
    CHECK(tr.steps.empty());
    CHECK(tr.terminal == TerminalState::NotGoodDivisor);
    REQUIRE(tr.offending.has_value());
    CHECK(tr.offending->index == 0);
    CHECK(tr.offending->lambda == 1);
    CHECK(tr.offending->T == 1);
    CHECK(tr.offending->extremal == std::vector<int>{0, 1, 2, 3, 4});

    GoodDivisorReport rep = is_good_initial_divisor(p);
    CHECK_FALSE(rep.good);
    REQUIRE(rep.offending_step.has_value());
    CHECK(*rep.offending_step == 0);
}

TEST_CASE("good divisor report accepts the clean golden runs") {
    CHECK(is_good_initial_divisor(pair_f1(3)).good);
    CHECK(is_good_initial_divisor(pair_f1(1)).good);
    CHECK(is_good_initial_divisor(pair_p2()).good);
}

TEST_CASE("volume polynomial golden coefficients on the heavy polarization") {
    MmpPair p = pair_f1(3);
    WeilDivisor k = canonical_divisor(p.fan);
    Rational h2 = divisor_product(p.fan, p.h, p.h);
    Rational hk = divisor_product(p.fan, p.h, k);
    Rational k2 = divisor_product(p.fan, k, k);
    CHECK(h2 == 15);
    CHECK(hk == -11);
    CHECK(k2 == 8);
    // (H + tK)^2 = 15 - 22 t + 8 t^2, worth exactly 1 at the first surgery time.
    CHECK(h2 + 2 * hk + k2 == 1);
    CHECK(square(p, h_plus_tk(p, 1)) == 1);
}

TEST_CASE("timeline is the exact running sum of inverse thresholds") {
    for (unsigned long long seed = 1; seed <= 25; ++seed) {
        MmpTrace tr = run_mmp_with_scaling(random_blowup_pair(seed, 1 + int(seed % 6)));
        Rational acc = 0;
        for (const auto& s : tr.steps) {
            REQUIRE(s.lambda > 0);
            acc += 1 / s.lambda;
            CHECK(s.T == acc);
        }
    }
}

TEST_CASE("volume stays positive through divisorial steps and dies exactly at the end") {
    int clean = 0;
    for (unsigned long long seed = 1; seed <= 25; ++seed) {
        MmpPair cur = random_blowup_pair(seed, 1 + int(seed % 6));
        MmpTrace tr = run_mmp_with_scaling(cur);
        if (tr.terminal == TerminalState::NotGoodDivisor) continue;
        ++clean;
        for (const auto& s : tr.steps) {
            Rational t = 1 / s.lambda;
            Rational vol = square(cur, h_plus_tk(cur, t));
            if (s.pair_after.has_value()) {
                CHECK(vol > 0);
                // Pushing forward preserves the square of the limit divisor.
                CHECK(vol == square(*s.pair_after, s.pair_after->h));
                cur = *s.pair_after;
            } else {
                CHECK(vol == 0);
            }
        }
    }
    CHECK(clean == 25);  // every corpus pair descends without ambiguity
}

TEST_CASE("ray accounting: every contraction removes its rays, terminals are minimal") {
    for (unsigned long long seed = 1; seed <= 25; ++seed) {
        MmpPair p = random_blowup_pair(seed, 1 + int(seed % 6));
        MmpTrace tr = run_mmp_with_scaling(p);
        if (tr.terminal == TerminalState::NotGoodDivisor) continue;
        int rays = p.fan.size();
        for (const auto& s : tr.steps) {
            if (s.kind.type == ContractionType::Divisorial) {
                rays -= int(s.kind.rays.size());
                REQUIRE(s.pair_after.has_value());
                CHECK(s.pair_after->fan.size() == rays);
                CHECK(is_ample(s.pair_after->fan, s.pair_after->h));
            }
        }
        if (tr.terminal == TerminalState::Point) CHECK(rays == 3);
        if (tr.terminal == TerminalState::MoriFiberSpace) CHECK(rays == 4);
    }
}

TEST_CASE("rescaling the polarization rescales the timeline and nothing else") {
    for (unsigned long long seed = 1; seed <= 10; ++seed) {
        MmpPair p = random_blowup_pair(seed, 1 + int(seed % 6));
        MmpTrace base = run_mmp_with_scaling(p);
        for (Rational c : {Rational(2), Rational(7, 3)}) {
            MmpPair q{p.fan, scale(c, p.h)};
            MmpTrace tr = run_mmp_with_scaling(q);
            REQUIRE(tr.steps.size() == base.steps.size());
            CHECK(tr.terminal == base.terminal);
            for (size_t i = 0; i < tr.steps.size(); ++i) {
                CHECK(tr.steps[i].lambda == base.steps[i].lambda / c);
                CHECK(tr.steps[i].T == base.steps[i].T * c);
                CHECK(tr.steps[i].kind.type == base.steps[i].kind.type);
                CHECK(tr.steps[i].kind.rays == base.steps[i].kind.rays);
            }
        }
    }
}

TEST_CASE("corpus pairs are valid, ample, and deterministic") {
    MmpPair g = random_blowup_pair(7, 5);
    CHECK(g.fan.size() == 8);
    for (unsigned long long seed = 1; seed <= 25; ++seed) {
        int blowups = 1 + int(seed % 6);
        MmpPair a = random_blowup_pair(seed, blowups);
        MmpPair b = random_blowup_pair(seed, blowups);
        CHECK(a.fan.size() == 3 + blowups);
        CHECK(is_ample(a.fan, a.h));
        CHECK(a.fan.rays == b.fan.rays);
        CHECK(a.h.coeffs == b.h.coeffs);

        MmpTrace ta = run_mmp_with_scaling(a);
        MmpTrace tb = run_mmp_with_scaling(b);
        REQUIRE(ta.steps.size() == tb.steps.size());
        CHECK(ta.terminal == tb.terminal);
        for (size_t i = 0; i < ta.steps.size(); ++i) {
            CHECK(ta.steps[i].lambda == tb.steps[i].lambda);
            CHECK(ta.steps[i].T == tb.steps[i].T);
            CHECK(ta.steps[i].kind.rays == tb.steps[i].kind.rays);
        }
    }
}
