#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ricci_mmp/rational.hpp"

namespace ricci_mmp {

struct ToricError : std::runtime_error {
    explicit ToricError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NotPrimitive : ToricError { using ToricError::ToricError; };
struct NotSmooth : ToricError { using ToricError::ToricError; };
struct NotComplete : ToricError { using ToricError::ToricError; };
struct DuplicateRay : ToricError { using ToricError::ToricError; };
struct LengthMismatch : ToricError { using ToricError::ToricError; };
struct NotAmple : ToricError { using ToricError::ToricError; };
struct NotContractible : ToricError { using ToricError::ToricError; };
struct InternalRelationFailure : ToricError { using ToricError::ToricError; };

struct RayVector {
    long long x = 0;
    long long y = 0;
    bool operator==(const RayVector&) const = default;
};

inline long long cross(RayVector a, RayVector b) { return a.x * b.y - a.y * b.x; }

// Cyclically ordered primitive rays of a smooth complete toric surface.
// Counterclockwise, det(u_i, u_{i+1}) = +1 for every consecutive pair (wrapping).
struct ToricSurfaceFan {
    std::vector<RayVector> rays;
    int size() const { return static_cast<int>(rays.size()); }
    int mod(int i) const {
        int n = size();
        return ((i % n) + n) % n;
    }
    const RayVector& ray(int i) const { return rays[mod(i)]; }
    bool operator==(const ToricSurfaceFan&) const = default;
};

struct WeilDivisor {
    std::vector<Rational> coeffs;
    bool operator==(const WeilDivisor&) const = default;
};

struct SelfIntersectionProfile {
    std::vector<long long> values;  // values[i] = D_i^2
};

ToricSurfaceFan validate_fan(const std::vector<RayVector>& rays);
SelfIntersectionProfile self_intersections(const ToricSurfaceFan& fan);
long long self_intersection(const ToricSurfaceFan& fan, int i);
Rational intersection_number(const ToricSurfaceFan& fan, const WeilDivisor& d, int i);
WeilDivisor canonical_divisor(const ToricSurfaceFan& fan);
bool is_nef(const ToricSurfaceFan& fan, const WeilDivisor& d);
bool is_ample(const ToricSurfaceFan& fan, const WeilDivisor& d);

// min over {i : K.D_i < 0} of (H.D_i)/(-K.D_i); nullopt means +Infinity (K nef),
// which cannot happen on a smooth complete toric surface but is kept for interface totality.
std::optional<Rational> nef_threshold(const ToricSurfaceFan& fan, const WeilDivisor& ample_h);

ToricSurfaceFan blow_down(const ToricSurfaceFan& fan, int i);
ToricSurfaceFan blow_up(const ToricSurfaceFan& fan, int cone_i);
WeilDivisor pushforward(const ToricSurfaceFan& fan, const WeilDivisor& d, int i);

// D.D' expanded through pairwise invariant-curve intersections.
Rational divisor_product(const ToricSurfaceFan& fan, const WeilDivisor& a, const WeilDivisor& b);

WeilDivisor add(const WeilDivisor& a, const WeilDivisor& b);
WeilDivisor scale(const Rational& c, const WeilDivisor& d);

// Orientation-preserving unimodular equivalence respecting cyclic order.
bool fans_isomorphic(const ToricSurfaceFan& a, const ToricSurfaceFan& b);

ToricSurfaceFan projective_plane_fan();

}  // namespace ricci_mmp
