#pragma once

#include <Eigen/Dense>

#include <istream>
#include <vector>

#include "peregrinn/errors.hpp"

namespace peregrinn {

enum class Phase : unsigned char { Free, Active, Inactive };

struct Layer {
    Eigen::MatrixXd weights;  // k_i x k_{i-1}
    Eigen::VectorXd bias;     // k_i

    int out_dim() const { return static_cast<int>(weights.rows()); }
    int in_dim() const { return static_cast<int>(weights.cols()); }
};

// Feed-forward ReLU network. Every layer applies max(Wy+b, 0); the final
// layer is left linear when final_relu is false (classifier logits).
// Immutable after construction, safe to share across verifier workers.
class Network {
public:
    Network(std::vector<Layer> layers, int input_dim, bool final_relu = true);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return layers_.back().out_dim(); }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    bool final_relu() const { return final_relu_; }
    const Layer& layer(int i) const { return layers_[i - 1]; }  // 1-based
    int width(int i) const { return layers_[i - 1].out_dim(); }

    // Layers whose outputs pass through a ReLU (all, or all but the last).
    int relu_layer_count() const { return final_relu_ ? layer_count() : layer_count() - 1; }
    int relu_neuron_count() const;

private:
    std::vector<Layer> layers_;
    int input_dim_;
    bool final_relu_;
};

struct ActivationPattern {
    // phases[i-1][j] is layer i, neuron j (0-based within the layer).
    std::vector<std::vector<Phase>> phases;

    static ActivationPattern free_for(const Network& net);
    Phase at(int layer, int neuron) const { return phases[layer - 1][neuron]; }
    void set(int layer, int neuron, Phase p) { phases[layer - 1][neuron] = p; }
};

struct AffineMap {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd offset;

    AffineMap() = default;
    AffineMap(Eigen::MatrixXd m, Eigen::VectorXd o);
    static AffineMap identity(int dim);

    int in_dim() const { return static_cast<int>(matrix.cols()); }
    int out_dim() const { return static_cast<int>(matrix.rows()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

// result(x) == outer(inner(x))
AffineMap compose(const AffineMap& outer, const AffineMap& inner);

struct ForwardResult {
    Eigen::VectorXd output;
    ActivationPattern pattern;                // tie at 0 recorded Inactive
    std::vector<Eigen::VectorXd> preacts;     // preacts[i-1] = W_i y_{i-1} + b_i
};

ForwardResult forward(const Network& net, const Eigen::VectorXd& x);

// Affine map from network input to the post-activation output of
// through_layer under fixed phases. through_layer == 0: identity.
// Throws PhaseError if any ReLU neuron in 1..through_layer is Free.
AffineMap fold_affine(const Network& net, const ActivationPattern& pattern, int through_layer);

enum class NetworkFormat { Json, NNet };

// JSON: {"input_dim": n, "final_relu": bool, "layers": [{"weights": [[...]], "bias": [...]}]}
// NNet: the plain-text verifier interchange format; the normalization block
// is folded into the first and last layers so evaluation runs in original
// input/output units. NNet networks have a linear output layer.
Network load_network(std::istream& source, NetworkFormat format);
Network load_network_file(const std::string& path);

}  // namespace peregrinn
