#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "peregrinn/geometry.hpp"
#include "peregrinn/network.hpp"

namespace peregrinn {

// One affine row g_x.x + g_z.z <= rhs tying the ambient input to the
// network output.
struct CoupledConstraint {
    Eigen::VectorXd input_coeffs;
    Eigen::VectorXd output_coeffs;
    double rhs = 0.0;
};

// A single verification instance: is there an ambient x in the input set
// whose (pre-mapped) network output lands in the violation set while every
// coupled constraint holds? Empty set of such x = SAFE.
struct VerificationQuery {
    std::variant<Box, Polytope> input_set;
    std::optional<AffineMap> input_map;  // ambient x -> network input
    Polytope violation_set;              // over the network output; 0 rows = whole space
    std::vector<CoupledConstraint> coupled;

    int ambient_dim() const {
        return std::holds_alternative<Box>(input_set) ? std::get<Box>(input_set).dim()
                                                      : std::get<Polytope>(input_set).dim();
    }

    Eigen::VectorXd to_network_input(const Eigen::VectorXd& x) const {
        return input_map ? input_map->apply(x) : x;
    }

    void validate_against(const Network& net) const;
};

}  // namespace peregrinn
