#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "ricci_mmp/toric.hpp"

namespace ricci_mmp {

struct MmpError : std::runtime_error {
    explicit MmpError(const std::string& msg) : std::runtime_error(msg) {}
};
struct AmbiguousContraction : MmpError { using MmpError::MmpError; };
struct AdjacentContractedRays : MmpError { using MmpError::MmpError; };
struct ResultNotAmple : MmpError { using MmpError::MmpError; };

struct MmpPair {
    ToricSurfaceFan fan;
    WeilDivisor h;  // ample
};

MmpPair make_mmp_pair(ToricSurfaceFan fan, WeilDivisor h);  // throws NotAmple

enum class ContractionType { Divisorial, MoriFiber, PointContraction, Flip };
// Flip is declared for trace-schema completeness and never constructed on surfaces.

struct ContractionKind {
    ContractionType type = ContractionType::PointContraction;
    std::vector<int> rays;  // contracted rays (Divisorial) or collapsed fibers (MoriFiber)
};

enum class TerminalState { MinimalModel, MoriFiberSpace, Point, NotGoodDivisor };
// MinimalModel is unreachable on toric surfaces (K is never nef); kept for totality.

struct MmpStep {
    Rational lambda;  // scaling threshold of the pair this step acted on
    Rational T;       // cumulative singular time, T_i = T_{i-1} + 1/lambda_i
    ContractionKind kind;
    std::optional<MmpPair> pair_after;  // empty on terminal steps
};

struct OffendingStep {
    int index = 0;  // position in the would-be step sequence
    Rational lambda;
    Rational T;
    std::vector<int> extremal;  // the extremal set that could not be contracted cleanly
    std::string reason;
};

struct MmpTrace {
    MmpPair initial;
    std::vector<MmpStep> steps;
    TerminalState terminal = TerminalState::Point;
    std::optional<OffendingStep> offending;  // set iff terminal == NotGoodDivisor
};

Rational scaling_threshold(const MmpPair& pair);
std::vector<int> extremal_set(const MmpPair& pair);
ContractionKind classify_contraction(const MmpPair& pair, const std::vector<int>& extremal);

// Divisorial: blow down the contracted rays and push H + T0*K forward (must stay ample).
// MoriFiber / PointContraction: terminal marker.
std::variant<MmpPair, TerminalState> execute_surgery(const MmpPair& pair, const ContractionKind& kind);

MmpTrace run_mmp_with_scaling(const MmpPair& pair);

struct GoodDivisorReport {
    bool good = false;
    MmpTrace trace;                     // witness either way
    std::optional<int> offending_step;  // first bad step index when not good
};
GoodDivisorReport is_good_initial_divisor(const MmpPair& pair);

// Deterministic test-corpus generator: iterated blow-ups of the plane with an
// ample divisor maintained alongside (H <- 3*pullback(H) - E keeps integer ample).
MmpPair random_blowup_pair(unsigned long long seed, int blowups);

}  // namespace ricci_mmp
