#pragma once

#include <istream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "peregrinn/query.hpp"
#include "peregrinn/search.hpp"

namespace peregrinn {

// Max-norm adversarial robustness around an anchor input (one box query per
// competing class).
struct RobustnessSpec {
    Eigen::VectorXd anchor;
    double epsilon = 0.0;
    int true_class = 0;
    int num_classes = 0;
    std::optional<Box> clip;  // e.g. pixel range
};

// One-step closed-loop safety: next state A x + B NN(H x + d), checked per
// (region, obstacle) pair.
struct ClosedLoopSpec {
    std::vector<Polytope> regions;
    std::vector<Polytope> obstacles;
    Eigen::MatrixXd a_matrix;
    Eigen::MatrixXd b_matrix;
    AffineMap observation;  // H, d
};

// For each class m != t: can class m reach the maximum inside the eps-box?
// Violation rows are z_i - z_m <= 0 for all i != m.
std::vector<VerificationQuery> robustness_queries(const RobustnessSpec& spec);

// Class the query at index qi of robustness_queries targets.
int robustness_query_class(const RobustnessSpec& spec, int qi);

enum class RobustnessStatus { Robust, NotRobust, Unknown };

struct RobustnessResult {
    RobustnessStatus status = RobustnessStatus::Unknown;
    int adversarial_class = -1;      // NotRobust only
    Eigen::VectorXd witness;         // NotRobust only
    UnknownReason reason = UnknownReason::Timeout;
    std::vector<VerificationResult> per_query;
};

RobustnessResult check_robustness(const Network& net, const RobustnessSpec& spec,
                                  const VerifierConfig& cfg = {});

// w*o queries ordered region-major: for region m and obstacle t, ambient
// variable is the state, the violation set is unconstrained, and coupled
// rows encode A x + B z inside the obstacle.
std::vector<VerificationQuery> closed_loop_queries(const ClosedLoopSpec& spec);

// Axis-aligned cells of side epsilon tiling the bounds; trailing partial
// cells are kept.
std::vector<Polytope> grid_workspace(const Box& bounds, double epsilon);

// Property file schema: {"type": "robustness"|"closed_loop"|"raw", ...}.
struct PropertyFile {
    std::variant<RobustnessSpec, ClosedLoopSpec, VerificationQuery> spec;
};

PropertyFile load_property(std::istream& source);
PropertyFile load_property_file(const std::string& path);

// Expands a property into the concrete query batch with stable labels.
struct LabeledQuery {
    std::string label;
    VerificationQuery query;
};
std::vector<LabeledQuery> expand_property(const PropertyFile& prop);

}  // namespace peregrinn
