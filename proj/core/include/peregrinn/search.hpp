#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "peregrinn/encoder.hpp"
#include "peregrinn/interval.hpp"
#include "peregrinn/query.hpp"

namespace peregrinn {

enum class VerdictKind { Safe, Unsafe, Unknown };
enum class UnknownReason { Timeout, Resource, Numeric };

struct Verdict {
    VerdictKind kind = VerdictKind::Unknown;
    UnknownReason reason = UnknownReason::Numeric;  // Unknown only
    Eigen::VectorXd witness_input;                  // Unsafe only (ambient x)
    Eigen::VectorXd witness_output;                 // Unsafe only (network output)

    bool safe() const { return kind == VerdictKind::Safe; }
    bool unsafe() const { return kind == VerdictKind::Unsafe; }
};

enum class PickPolicy { MinVolume, RandomChoice };

struct VerifierConfig {
    double timeout_s = 1200.0;
    int volume_samples = 2000;
    double lp_tol = 1e-7;
    double indeterminacy_tol = 1e-6;
    double weight_ratio_cap = 1e6;
    std::uint64_t seed = 42;
    long max_lp_solves = 1000000;
    PickPolicy pick_policy = PickPolicy::MinVolume;
    std::ostream* trace = nullptr;  // JSON lines, one per iteration event
};

struct SearchStats {
    long lp_solves = 0;
    long backtracks = 0;
    long inferences = 0;  // total inferred phase fixes across iterations
    long iterations = 0;
    long depth_checks = 0;
    long depth_violations = 0;
    long depth_repairs = 0;  // violations answered by conditioning or pruning the offender
    long forced_conditions = 0;
};

struct StackEntry {
    ConditioningDecision decision;  // origin Search
    bool tried_active = false;
    bool tried_inactive = false;
    // Ambient-space activation boundary recorded at decision time; used to
    // filter the shared volume samples. Invalid when degenerate.
    Hyperplane plane;
    bool plane_valid = false;

    bool tried(Phase p) const { return p == Phase::Active ? tried_active : tried_inactive; }
    void mark_tried(Phase p) { (p == Phase::Active ? tried_active : tried_inactive) = true; }
    bool exhausted() const { return tried_active && tried_inactive; }
};

struct SearchState {
    std::vector<StackEntry> stack;
    SearchStats stats;

    std::vector<ConditioningDecision> decisions() const;
};

struct VerificationResult {
    Verdict verdict;
    SearchStats stats;
};

// The main loop: per iteration runs symbolic inference, encodes and solves
// the relaxed program, then either concludes, backtracks on infeasibility,
// or conditions one more neuron chosen by the layer/volume priorities.
VerificationResult verify(const Network& net, const VerificationQuery& query,
                          const VerifierConfig& cfg = {});

struct NeuronChoice {
    int layer = 0;
    int neuron = 0;
    Phase phase = Phase::Free;
    Hyperplane plane;  // ambient space
    bool plane_valid = false;
};

struct PickContext {
    const Network& net;
    const VerificationQuery& query;
    const SearchState& state;
    const PhaseMap& phases;                           // decided + inferred
    const std::vector<Eigen::VectorXd>& lp_preacts;   // solver-implied prefix phases
    const std::vector<Eigen::VectorXd>& samples;      // filtered shared sample set
    const std::vector<Eigen::VectorXd>& all_samples;  // fallback when the filter empties
    const Polytope& domain;                           // ambient input polytope
    std::mt19937_64* rng = nullptr;                   // set = random-choice baseline
};

// Restricts to the shallowest indeterminate layer, prunes (neuron, phase)
// candidates whose input-space sign pattern is incompatible with same-layer
// decided phases, and returns the smallest-volume survivor. nullopt = every
// candidate pruned (the branch is infeasible).
std::optional<NeuronChoice> pick_neuron(const std::vector<IndeterminateNeuron>& indeterminates,
                                        const PickContext& ctx);

// Pops entries deeper than the deepest one named by the IIS tags (top entry
// when the tags are empty or name no entry), then flips the first flippable
// entry walking upward. Returns false when the stack is exhausted.
bool backtrack(SearchState& state, const std::vector<std::string>& iis_tags);

// x in the input set, the (pre-mapped) forward output in the violation set,
// and every coupled row satisfied, all at 1e-6.
bool validate_witness(const Network& net, const VerificationQuery& query,
                      const Eigen::VectorXd& x);

}  // namespace peregrinn
