#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "peregrinn/geometry.hpp"
#include "peregrinn/network.hpp"

namespace peregrinn {

enum class PhaseOrigin : unsigned char { Free, Decided, Inferred };

// Per-neuron phase assignment with the reason it is fixed. Decided entries
// mirror the search's conditioning stack; Inferred entries come from the
// interval analysis.
struct PhaseMap {
    std::vector<std::vector<Phase>> phase;
    std::vector<std::vector<PhaseOrigin>> origin;

    static PhaseMap free_for(const Network& net);
    Phase at(int layer, int neuron) const { return phase[layer - 1][neuron]; }
    PhaseOrigin origin_at(int layer, int neuron) const { return origin[layer - 1][neuron]; }
    void set(int layer, int neuron, Phase p, PhaseOrigin o);
    bool fixed(int layer, int neuron) const { return at(layer, neuron) != Phase::Free; }
};

// Affine expression over the network input variables.
struct AffineExpr {
    Eigen::RowVectorXd coef;
    double constant = 0.0;

    double eval(const Eigen::VectorXd& x) const { return coef.dot(x) + constant; }
    double max_over(const Box& box) const;
    double min_over(const Box& box) const;
};

struct LayerSymbolicBounds {
    std::vector<AffineExpr> pre_lower, pre_upper;  // bound the pre-activation
    Eigen::VectorXd concrete_lo, concrete_hi;      // pre-activation range over the box
    // Post-activation expressions used to propagate into the next layer.
    std::vector<AffineExpr> post_lower, post_upper;
};

struct SymbolicBounds {
    std::vector<LayerSymbolicBounds> layers;  // index i-1 = layer i
    const LayerSymbolicBounds& layer(int i) const { return layers[i - 1]; }
};

// Chord upper relaxation of a straddling ReLU (lo < 0 < hi):
//   upper' = hi/(hi-lo) * (upper - lo),  lower' = 0.
std::pair<AffineExpr, AffineExpr> relax_relu(const AffineExpr& lower, const AffineExpr& upper,
                                             double lo, double hi);

// Layer-by-layer affine bound propagation over the input box, honoring
// phases already fixed in `fixed` and auto-fixing neurons whose concrete
// bounds have a definite sign.
SymbolicBounds symbolic_analysis(const Network& net, const Box& input_box, const PhaseMap& fixed);

struct InferenceResult {
    PhaseMap map;  // fixed plus Inferred entries
    // Set when a Decided phase contradicts the concrete bounds; the branch
    // cannot contain any consistent input.
    std::optional<std::pair<int, int>> conflict;
    int inferred_count = 0;
    bool branch_infeasible() const { return conflict.has_value(); }
};

InferenceResult infer_phases(const Network& net, const SymbolicBounds& bounds,
                             const PhaseMap& fixed);

}  // namespace peregrinn
