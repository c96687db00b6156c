#include "ricci_mmp/mmp.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <utility>

namespace ricci_mmp {

namespace {

// Rebuild a pair on the canonical ray order produced by validate_fan, carrying
// each coefficient along with its ray.
MmpPair align_pair(const std::vector<RayVector>& rays, const std::vector<Rational>& coeffs) {
    if (rays.size() != coeffs.size())
        throw LengthMismatch("divisor length does not match ray count");
    ToricSurfaceFan fan = validate_fan(rays);
    std::vector<Rational> aligned(coeffs.size());
    for (int i = 0; i < fan.size(); ++i) {
        auto it = std::find(rays.begin(), rays.end(), fan.rays[size_t(i)]);
        aligned[size_t(i)] = coeffs[size_t(it - rays.begin())];
    }
    return MmpPair{std::move(fan), WeilDivisor{std::move(aligned)}};
}

Rational nef_threshold_checked(const MmpPair& pair) {
    auto t = nef_threshold(pair.fan, pair.h);
    if (!t.has_value())
        throw InternalRelationFailure("canonical direction unbounded on a complete surface fan");
    return *t;
}

}  // namespace

MmpPair make_mmp_pair(ToricSurfaceFan fan, WeilDivisor h) {
    MmpPair p = align_pair(fan.rays, h.coeffs);
    if (!is_ample(p.fan, p.h)) throw NotAmple("polarization is not ample");
    return p;
}

Rational scaling_threshold(const MmpPair& pair) { return 1 / nef_threshold_checked(pair); }

std::vector<int> extremal_set(const MmpPair& pair) {
    Rational t0 = nef_threshold_checked(pair);
    WeilDivisor k = canonical_divisor(pair.fan);
    WeilDivisor limit = add(pair.h, scale(t0, k));
    std::vector<int> out;
    for (int i = 0; i < pair.fan.size(); ++i) {
        if (intersection_number(pair.fan, k, i) < 0 &&
            intersection_number(pair.fan, limit, i) == 0)
            out.push_back(i);
    }
    return out;
}

ContractionKind classify_contraction(const MmpPair& pair, const std::vector<int>& extremal) {
    if (extremal.empty())
        throw InternalRelationFailure("extremal set is empty at the nef threshold");
    bool any_minus_one = false;
    bool all_minus_one = true;
    std::vector<int> fibers;
    for (int i : extremal) {
        long long s = self_intersection(pair.fan, i);
        if (s == -1)
            any_minus_one = true;
        else
            all_minus_one = false;
        if (s == 0) fibers.push_back(i);
    }
    if (all_minus_one) return ContractionKind{ContractionType::Divisorial, extremal};
    if (any_minus_one)
        throw AmbiguousContraction(
            "extremal set mixes exceptional curves with non-exceptional rays");
    if (!fibers.empty()) return ContractionKind{ContractionType::MoriFiber, std::move(fibers)};
    return ContractionKind{ContractionType::PointContraction, {}};
}

std::variant<MmpPair, TerminalState> execute_surgery(const MmpPair& pair,
                                                     const ContractionKind& kind) {
    switch (kind.type) {
        case ContractionType::MoriFiber:
            return TerminalState::MoriFiberSpace;
        case ContractionType::PointContraction:
            return TerminalState::Point;
        case ContractionType::Flip:
            throw MmpError("flips do not occur on surfaces");
        case ContractionType::Divisorial:
            break;
    }

    int n = pair.fan.size();
    if (kind.rays.empty()) throw MmpError("divisorial contraction without contracted rays");
    std::set<int> contracted;
    for (int i : kind.rays) {
        if (i < 0 || i >= n) throw MmpError("contracted ray index out of range");
        if (self_intersection(pair.fan, i) != -1)
            throw NotContractible("contracted ray does not have self-intersection -1");
        contracted.insert(i);
    }
    for (int i : contracted) {
        if (contracted.count((i + 1) % n) || contracted.count((i + n - 1) % n))
            throw AdjacentContractedRays("contracted rays meet on the surface");
    }

    Rational t0 = nef_threshold_checked(pair);
    WeilDivisor limit = add(pair.h, scale(t0, canonical_divisor(pair.fan)));

    std::vector<RayVector> rays;
    std::vector<Rational> coeffs;
    rays.reserve(size_t(n) - contracted.size());
    for (int i = 0; i < n; ++i) {
        if (contracted.count(i)) continue;
        rays.push_back(pair.fan.rays[size_t(i)]);
        coeffs.push_back(limit.coeffs[size_t(i)]);
    }
    MmpPair next = align_pair(rays, coeffs);
    if (!is_ample(next.fan, next.h))
        throw ResultNotAmple("pushed-forward polarization is not ample");
    return next;
}

MmpTrace run_mmp_with_scaling(const MmpPair& initial) {
    MmpTrace trace{initial, {}, TerminalState::Point, std::nullopt};
    MmpPair cur = initial;
    Rational T = 0;
    int guard = initial.fan.size() + 1;
    for (int step = 0; step < guard; ++step) {
        Rational t0 = nef_threshold_checked(cur);
        Rational lambda = 1 / t0;
        T += t0;
        std::vector<int> ext = extremal_set(cur);
        ContractionKind kind;
        try {
            kind = classify_contraction(cur, ext);
        } catch (const AmbiguousContraction& e) {
            trace.terminal = TerminalState::NotGoodDivisor;
            trace.offending = OffendingStep{step, lambda, T, std::move(ext), e.what()};
            return trace;
        }
        auto result = execute_surgery(cur, kind);
        if (std::holds_alternative<MmpPair>(result)) {
            cur = std::get<MmpPair>(result);
            trace.steps.push_back(MmpStep{lambda, T, std::move(kind), cur});
        } else {
            trace.steps.push_back(MmpStep{lambda, T, std::move(kind), std::nullopt});
            trace.terminal = std::get<TerminalState>(result);
            return trace;
        }
    }
    throw InternalRelationFailure("contraction sequence failed to terminate");
}

GoodDivisorReport is_good_initial_divisor(const MmpPair& pair) {
    GoodDivisorReport rep;
    rep.trace = run_mmp_with_scaling(pair);
    rep.good = true;
    if (rep.trace.terminal == TerminalState::NotGoodDivisor) {
        rep.good = false;
        rep.offending_step = rep.trace.offending->index;
        return rep;
    }
    for (size_t i = 0; i < rep.trace.steps.size(); ++i) {
        const MmpStep& s = rep.trace.steps[i];
        if (s.kind.type == ContractionType::Divisorial && s.kind.rays.size() != 1) {
            rep.good = false;
            rep.offending_step = int(i);
            return rep;
        }
    }
    return rep;
}

MmpPair random_blowup_pair(unsigned long long seed, int blowups) {
    std::mt19937_64 rng(seed);
    std::vector<RayVector> rays = {{1, 0}, {0, 1}, {-1, -1}};
    std::vector<Rational> h = {1, 0, 0};  // the hyperplane class
    for (int b = 0; b < blowups; ++b) {
        int n = int(rays.size());
        int i = int(rng() % static_cast<unsigned long long>(n));
        int j = (i + 1) % n;
        RayVector nu{rays[size_t(i)].x + rays[size_t(j)].x,
                     rays[size_t(i)].y + rays[size_t(j)].y};
        // Pull the polarization back (support value c_i + c_j on the inserted
        // ray) and subtract the exceptional class after scaling by 4. Scaling
        // by 3 would make the result anticanonical-proportional on the first
        // step (3 * hyperplane = -K on the plane) and tie every ratio; with 4
        // the fresh exceptional curve is always the unique ratio minimizer.
        Rational support = h[size_t(i)] + h[size_t(j)];
        for (auto& c : h) c *= 4;
        Rational ne = 4 * support - 1;
        if (j == 0) {
            rays.push_back(nu);
            h.push_back(ne);
        } else {
            rays.insert(rays.begin() + j, nu);
            h.insert(h.begin() + j, ne);
        }
    }
    return make_mmp_pair(ToricSurfaceFan{std::move(rays)}, WeilDivisor{std::move(h)});
}

}  // namespace ricci_mmp
