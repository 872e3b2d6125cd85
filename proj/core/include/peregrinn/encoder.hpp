#pragma once

#include <map>
#include <string>
#include <vector>

#include "peregrinn/interval.hpp"
#include "peregrinn/lp.hpp"
#include "peregrinn/query.hpp"

namespace peregrinn {

enum class DecisionOrigin : unsigned char { Search, Inferred };

struct ConditioningDecision {
    int layer = 0;   // 1-based
    int neuron = 0;  // 0-based within the layer
    Phase phase = Phase::Free;
    DecisionOrigin origin = DecisionOrigin::Search;
};

// The relaxed program of the verifier: per-neuron slack variables bounded
// below by both ReLU branches, input/violation/coupled rows, and tagged
// conditioning constraints.
struct RelaxedProgram {
    LinearProgram lp;
    int ambient_dim = 0;
    // Variable id of slack y_{i,j}; layer i in 1..relu_layer_count.
    std::vector<int> layer_offset;  // layer_offset[i-1] + j
    int output_offset = 0;          // z block (equals the last slack block when final ReLU)
    std::vector<ConditioningDecision> decisions;
    std::map<std::pair<int, int>, std::vector<std::string>> conditioning_tags;
    // First layer with the query pre-map folded in (ambient -> layer 1).
    Eigen::MatrixXd eff_first_weights;
    Eigen::VectorXd eff_first_bias;

    int slack_var(int layer, int neuron) const { return layer_offset[layer - 1] + neuron; }
};

// Geometric layer weights with the earliest layers heaviest:
// q_i = ratio^(n-i). The verifier picks ratio so that q_1/q_n stays at the
// configured cap (default 1e6).
Eigen::VectorXd layer_weights(int n, double ratio);

double default_weight_ratio(int n, double cap = 1e6);

// Builds the relaxed program. `ambient_box` bounds the ambient input
// variables (precomputed once per query by the caller).
RelaxedProgram encode(const Network& net, const VerificationQuery& query,
                      const std::vector<ConditioningDecision>& decisions,
                      const Eigen::VectorXd& weights, const Box& ambient_box);

struct IndeterminateNeuron {
    int layer = 0;
    int neuron = 0;
    double slack_excess = 0.0;  // slack minus max(0, pre-activation)
};

// Neurons whose slack sits strictly above both ReLU branches, sorted by
// layer (ascending) then slack excess (descending). Conditioned neurons are
// never listed.
std::vector<IndeterminateNeuron> indeterminate_neurons(const Network& net,
                                                       const RelaxedProgram& prog,
                                                       const Eigen::VectorXd& sol, double tol);

// Ambient input block of an optimal solution; any query pre-map is applied
// by the caller at validation time.
Eigen::VectorXd extract_candidate_input(const RelaxedProgram& prog, const Eigen::VectorXd& sol);

// Pre-activation values implied by the LP solution itself (the slack values
// of the previous layer feed each layer's affine form). One vector per ReLU
// layer.
std::vector<Eigen::VectorXd> lp_preactivations(const Network& net, const RelaxedProgram& prog,
                                               const Eigen::VectorXd& sol);

std::vector<std::string> decision_tags(const ConditioningDecision& d);

}  // namespace peregrinn
