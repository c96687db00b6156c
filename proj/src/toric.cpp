#include "ricci_mmp/toric.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace ricci_mmp {

namespace {

// angular order starting from direction (1,0), counterclockwise
int half_plane(RayVector a) { return (a.y > 0 || (a.y == 0 && a.x > 0)) ? 0 : 1; }

bool angle_less(RayVector a, RayVector b) {
    int ha = half_plane(a), hb = half_plane(b);
    if (ha != hb) return ha < hb;
    return cross(a, b) > 0;
}

std::vector<RayVector> sorted_ccw(std::vector<RayVector> rays) {
    std::sort(rays.begin(), rays.end(), angle_less);
    return rays;
}

}  // namespace

ToricSurfaceFan validate_fan(const std::vector<RayVector>& rays) {
    if (rays.size() < 3) throw NotComplete("fan needs at least 3 rays");
    for (auto r : rays) {
        if (r.x == 0 && r.y == 0) throw NotPrimitive("zero ray");
        if (std::gcd(std::abs(r.x), std::abs(r.y)) != 1)
            throw NotPrimitive("ray (" + std::to_string(r.x) + "," + std::to_string(r.y) +
                               ") is not primitive");
    }
    std::set<std::pair<long long, long long>> seen;
    for (auto r : rays)
        if (!seen.insert({r.x, r.y}).second)
            throw DuplicateRay("ray (" + std::to_string(r.x) + "," + std::to_string(r.y) +
                               ") repeated");

    ToricSurfaceFan fan{sorted_ccw(rays)};
    int n = fan.size();
    for (int i = 0; i < n; ++i) {
        long long c = cross(fan.ray(i), fan.ray(i + 1));
        if (c <= 0) throw NotComplete("angle gap of at least pi after ray index " + std::to_string(i));
    }
    for (int i = 0; i < n; ++i) {
        long long c = cross(fan.ray(i), fan.ray(i + 1));
        if (c != 1)
            throw NotSmooth("cone (" + std::to_string(i) + "," + std::to_string(fan.mod(i + 1)) +
                            ") has determinant " + std::to_string(c));
    }
    return fan;
}

long long self_intersection(const ToricSurfaceFan& fan, int i) {
    auto p = fan.ray(i - 1);
    auto c = fan.ray(i);
    auto nx = fan.ray(i + 1);
    long long sx = p.x + nx.x, sy = p.y + nx.y;
    long long a;
    if (c.x != 0) {
        if (sx % c.x != 0) throw InternalRelationFailure("fan relation fails at ray " + std::to_string(i));
        a = sx / c.x;
    } else {
        if (sy % c.y != 0) throw InternalRelationFailure("fan relation fails at ray " + std::to_string(i));
        a = sy / c.y;
    }
    if (a * c.x != sx || a * c.y != sy)
        throw InternalRelationFailure("fan relation fails at ray " + std::to_string(i));
    return -a;
}

SelfIntersectionProfile self_intersections(const ToricSurfaceFan& fan) {
    SelfIntersectionProfile prof;
    prof.values.reserve(fan.size());
    for (int i = 0; i < fan.size(); ++i) prof.values.push_back(self_intersection(fan, i));
    return prof;
}

Rational intersection_number(const ToricSurfaceFan& fan, const WeilDivisor& d, int i) {
    if (static_cast<int>(d.coeffs.size()) != fan.size())
        throw LengthMismatch("divisor has " + std::to_string(d.coeffs.size()) + " coefficients, fan has " +
                             std::to_string(fan.size()) + " rays");
    i = fan.mod(i);
    return d.coeffs[fan.mod(i - 1)] + d.coeffs[i] * Rational(self_intersection(fan, i)) +
           d.coeffs[fan.mod(i + 1)];
}

WeilDivisor canonical_divisor(const ToricSurfaceFan& fan) {
    return WeilDivisor{std::vector<Rational>(fan.size(), Rational(-1))};
}

bool is_nef(const ToricSurfaceFan& fan, const WeilDivisor& d) {
    for (int i = 0; i < fan.size(); ++i)
        if (intersection_number(fan, d, i) < 0) return false;
    return true;
}

bool is_ample(const ToricSurfaceFan& fan, const WeilDivisor& d) {
    for (int i = 0; i < fan.size(); ++i)
        if (intersection_number(fan, d, i) <= 0) return false;
    return true;
}

std::optional<Rational> nef_threshold(const ToricSurfaceFan& fan, const WeilDivisor& ample_h) {
    if (!is_ample(fan, ample_h)) throw NotAmple("nef_threshold needs an ample divisor");
    auto k = canonical_divisor(fan);
    std::optional<Rational> best;
    for (int i = 0; i < fan.size(); ++i) {
        Rational kd = intersection_number(fan, k, i);
        if (kd >= 0) continue;
        Rational ratio = intersection_number(fan, ample_h, i) / (-kd);
        if (!best || ratio < *best) best = ratio;
    }
    return best;  // nullopt iff K nef: unreachable on a toric surface, kept total
}

ToricSurfaceFan blow_down(const ToricSurfaceFan& fan, int i) {
    i = fan.mod(i);
    if (self_intersection(fan, i) != -1)
        throw NotContractible("ray " + std::to_string(i) + " has self-intersection " +
                              std::to_string(self_intersection(fan, i)));
    std::vector<RayVector> rays;
    for (int j = 0; j < fan.size(); ++j)
        if (j != i) rays.push_back(fan.rays[j]);
    return validate_fan(rays);
}

ToricSurfaceFan blow_up(const ToricSurfaceFan& fan, int cone_i) {
    cone_i = fan.mod(cone_i);
    auto a = fan.ray(cone_i), b = fan.ray(cone_i + 1);
    std::vector<RayVector> rays = fan.rays;
    rays.push_back({a.x + b.x, a.y + b.y});
    return validate_fan(rays);
}

WeilDivisor pushforward(const ToricSurfaceFan& fan, const WeilDivisor& d, int i) {
    if (static_cast<int>(d.coeffs.size()) != fan.size())
        throw LengthMismatch("divisor/fan size mismatch in pushforward");
    i = fan.mod(i);
    if (self_intersection(fan, i) != -1)
        throw NotContractible("ray " + std::to_string(i) + " is not a (-1)-curve");
    std::vector<std::pair<RayVector, Rational>> rest;
    for (int j = 0; j < fan.size(); ++j)
        if (j != i) rest.push_back({fan.rays[j], d.coeffs[j]});
    std::sort(rest.begin(), rest.end(),
              [](const auto& l, const auto& r) { return angle_less(l.first, r.first); });
    WeilDivisor out;
    for (auto& [ray, c] : rest) out.coeffs.push_back(c);
    return out;
}

Rational divisor_product(const ToricSurfaceFan& fan, const WeilDivisor& a, const WeilDivisor& b) {
    Rational sum = 0;
    for (int i = 0; i < fan.size(); ++i) sum += a.coeffs[i] * intersection_number(fan, b, i);
    return sum;
}

WeilDivisor add(const WeilDivisor& a, const WeilDivisor& b) {
    if (a.coeffs.size() != b.coeffs.size()) throw LengthMismatch("divisor sum size mismatch");
    WeilDivisor out;
    out.coeffs.reserve(a.coeffs.size());
    for (size_t i = 0; i < a.coeffs.size(); ++i) out.coeffs.push_back(a.coeffs[i] + b.coeffs[i]);
    return out;
}

WeilDivisor scale(const Rational& c, const WeilDivisor& d) {
    WeilDivisor out;
    out.coeffs.reserve(d.coeffs.size());
    for (auto& x : d.coeffs) out.coeffs.push_back(c * x);
    return out;
}

bool fans_isomorphic(const ToricSurfaceFan& a, const ToricSurfaceFan& b) {
    int n = a.size();
    if (b.size() != n) return false;
    auto a0 = a.ray(0), a1 = a.ray(1);
    // inverse of the column matrix [a0 a1]; its determinant is +1 on a smooth fan
    long long inv00 = a1.y, inv01 = -a1.x, inv10 = -a0.y, inv11 = a0.x;
    for (int s = 0; s < n; ++s) {
        auto b0 = b.ray(s), b1 = b.ray(s + 1);
        long long m00 = b0.x * inv00 + b1.x * inv10;
        long long m01 = b0.x * inv01 + b1.x * inv11;
        long long m10 = b0.y * inv00 + b1.y * inv10;
        long long m11 = b0.y * inv01 + b1.y * inv11;
        bool ok = true;
        for (int k = 0; k < n && ok; ++k) {
            auto u = a.ray(k);
            RayVector img{m00 * u.x + m01 * u.y, m10 * u.x + m11 * u.y};
            if (!(img == b.ray(s + k))) ok = false;
        }
        if (ok) return true;
    }
    return false;
}

ToricSurfaceFan projective_plane_fan() { return validate_fan({{1, 0}, {0, 1}, {-1, -1}}); }

}  // namespace ricci_mmp
