#include "peregrinn/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace peregrinn {

void VerificationQuery::validate_against(const Network& net) const {
    const int amb = ambient_dim();
    if (input_map) {
        if (input_map->in_dim() != amb)
            throw ShapeError("query: input map does not accept the ambient dimension");
        if (input_map->out_dim() != net.input_dim())
            throw ShapeError("query: input map does not produce the network input dimension");
    } else if (amb != net.input_dim()) {
        throw ShapeError("query: input set dimension does not match network input");
    }
    if (violation_set.rows() > 0 && violation_set.dim() != net.output_dim())
        throw ShapeError("query: violation set dimension does not match network output");
    for (const auto& c : coupled) {
        if (c.input_coeffs.size() != amb || c.output_coeffs.size() != net.output_dim())
            throw ShapeError("query: coupled constraint dimension mismatch");
    }
}

Eigen::VectorXd layer_weights(int n, double ratio) {
    if (n < 1) throw DomainError("layer_weights: n must be >= 1");
    if (!(ratio > 1.0)) throw DomainError("layer_weights: ratio must exceed 1");
    Eigen::VectorXd q(n);
    for (int i = 1; i <= n; ++i) q[i - 1] = std::pow(ratio, n - i);
    return q;
}

double default_weight_ratio(int n, double cap) {
    if (n <= 1) return cap;
    return std::pow(cap, 1.0 / static_cast<double>(n - 1));
}

std::vector<std::string> decision_tags(const ConditioningDecision& d) {
    const std::string stem =
        "cond:" + std::to_string(d.layer) + ":" + std::to_string(d.neuron);
    if (d.phase == Phase::Active) return {stem + ":on"};
    return {stem + ":off:z", stem + ":off:le"};
}

namespace {

// First layer seen by the LP once the query pre-map is folded in.
struct EffectiveFirstLayer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
};

EffectiveFirstLayer effective_first_layer(const Network& net, const VerificationQuery& query) {
    const Layer& l1 = net.layer(1);
    if (!query.input_map) return {l1.weights, l1.bias};
    return {l1.weights * query.input_map->matrix,
            l1.weights * query.input_map->offset + l1.bias};
}

}  // namespace

RelaxedProgram encode(const Network& net, const VerificationQuery& query,
                      const std::vector<ConditioningDecision>& decisions,
                      const Eigen::VectorXd& weights, const Box& ambient_box) {
    query.validate_against(net);
    if (weights.size() != net.layer_count())
        throw ShapeError("encode: weight vector length must equal the layer count");
    const int relu_layers = net.relu_layer_count();
    std::set<std::pair<int, int>> seen;
    for (const auto& d : decisions) {
        if (d.layer < 1 || d.layer > relu_layers || d.neuron < 0 || d.neuron >= net.width(d.layer))
            throw ShapeError("encode: decision addresses a nonexistent ReLU neuron");
        if (d.phase == Phase::Free) throw DomainError("encode: decision carries no phase");
        if (!seen.insert({d.layer, d.neuron}).second)
            throw DomainError("encode: two decisions on one neuron");
    }

    RelaxedProgram prog;
    prog.ambient_dim = query.ambient_dim();
    prog.decisions = decisions;
    if (ambient_box.dim() != prog.ambient_dim)
        throw ShapeError("encode: ambient box dimension mismatch");
    {
        const EffectiveFirstLayer e = effective_first_layer(net, query);
        prog.eff_first_weights = e.weights;
        prog.eff_first_bias = e.bias;
    }

    LinearProgram& lp = prog.lp;
    for (int j = 0; j < prog.ambient_dim; ++j)
        lp.add_variable(ambient_box.lower[j], ambient_box.upper[j]);
    prog.layer_offset.resize(relu_layers);
    for (int i = 1; i <= relu_layers; ++i) {
        prog.layer_offset[i - 1] = lp.num_vars();
        for (int j = 0; j < net.width(i); ++j) lp.add_variable(0.0, kInf);
    }
    if (net.final_relu()) {
        prog.output_offset = prog.layer_offset.back();
    } else {
        prog.output_offset = lp.num_vars();
        for (int j = 0; j < net.output_dim(); ++j) lp.add_variable(-kInf, kInf);
    }
    const int nvar = lp.num_vars();

    const EffectiveFirstLayer eff{prog.eff_first_weights, prog.eff_first_bias};
    // Row with the affine form of neuron (i,j) in terms of the previous
    // block: coeffs*vars = (W_i y_{i-1})_j, plus the constant part.
    auto preact_row = [&](int i, int j, double self_coeff, int self_var) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(nvar);
        double constant;
        if (i == 1) {
            row.head(prog.ambient_dim) = -eff.weights.row(j).transpose();
            constant = eff.bias[j];
        } else {
            const Layer& l = net.layer(i);
            const int prev = prog.layer_offset[i - 2];
            for (int t = 0; t < l.in_dim(); ++t) row[prev + t] = -l.weights(j, t);
            constant = net.layer(i).bias[j];
        }
        if (self_var >= 0) row[self_var] = self_coeff;
        return std::make_pair(row, constant);
    };

    if (std::holds_alternative<Polytope>(query.input_set)) {
        const Polytope& in = std::get<Polytope>(query.input_set);
        for (int r = 0; r < in.rows(); ++r) {
            Eigen::VectorXd row = Eigen::VectorXd::Zero(nvar);
            row.head(prog.ambient_dim) = in.a_matrix.row(r).transpose();
            lp.add_constraint(std::move(row), Sense::LessEq, in.b_vector[r],
                              "in:" + std::to_string(r));
        }
    }

    for (int i = 1; i <= relu_layers; ++i) {
        for (int j = 0; j < net.width(i); ++j) {
            auto [row, c] = preact_row(i, j, 1.0, prog.slack_var(i, j));
            lp.add_constraint(std::move(row), Sense::GreaterEq, c,
                              "relu:" + std::to_string(i) + ":" + std::to_string(j));
        }
    }

    if (!net.final_relu()) {
        const int n = net.layer_count();
        for (int j = 0; j < net.output_dim(); ++j) {
            auto [row, c] = preact_row(n, j, 1.0, prog.output_offset + j);
            lp.add_constraint(std::move(row), Sense::Equal, c, "outdef:" + std::to_string(j));
        }
    }

    for (int r = 0; r < query.violation_set.rows(); ++r) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(nvar);
        for (int j = 0; j < net.output_dim(); ++j)
            row[prog.output_offset + j] = query.violation_set.a_matrix(r, j);
        lp.add_constraint(std::move(row), Sense::LessEq, query.violation_set.b_vector[r],
                          "out:" + std::to_string(r));
    }

    for (size_t r = 0; r < query.coupled.size(); ++r) {
        const auto& c = query.coupled[r];
        Eigen::VectorXd row = Eigen::VectorXd::Zero(nvar);
        row.head(prog.ambient_dim) = c.input_coeffs;
        for (int j = 0; j < net.output_dim(); ++j) row[prog.output_offset + j] += c.output_coeffs[j];
        lp.add_constraint(std::move(row), Sense::LessEq, c.rhs, "cpl:" + std::to_string(r));
    }

    for (const auto& d : decisions) {
        const auto tags = decision_tags(d);
        if (d.phase == Phase::Active) {
            auto [row, c] = preact_row(d.layer, d.neuron, 1.0, prog.slack_var(d.layer, d.neuron));
            lp.add_constraint(std::move(row), Sense::Equal, c, tags[0]);
        } else {
            Eigen::VectorXd zrow = Eigen::VectorXd::Zero(nvar);
            zrow[prog.slack_var(d.layer, d.neuron)] = 1.0;
            lp.add_constraint(std::move(zrow), Sense::Equal, 0.0, tags[0]);
            // preact_row gives (-W terms, b); flip both sides for (Wy+b)_j <= 0.
            auto [row, c] = preact_row(d.layer, d.neuron, 0.0, -1);
            lp.add_constraint(-row, Sense::LessEq, -c, tags[1]);
        }
        prog.conditioning_tags[{d.layer, d.neuron}] = tags;
    }

    lp.objective = Eigen::VectorXd::Zero(nvar);
    for (int i = 1; i <= relu_layers; ++i)
        for (int j = 0; j < net.width(i); ++j) lp.objective[prog.slack_var(i, j)] = weights[i - 1];
    return prog;
}

std::vector<Eigen::VectorXd> lp_preactivations(const Network& net, const RelaxedProgram& prog,
                                               const Eigen::VectorXd& sol) {
    std::vector<Eigen::VectorXd> pre;
    const Eigen::VectorXd x = sol.head(prog.ambient_dim);
    for (int i = 1; i <= net.relu_layer_count(); ++i) {
        if (i == 1) {
            pre.push_back(prog.eff_first_weights * x + prog.eff_first_bias);
        } else {
            const Layer& l = net.layer(i);
            const Eigen::VectorXd prev = sol.segment(prog.layer_offset[i - 2], net.width(i - 1));
            pre.push_back(l.weights * prev + l.bias);
        }
    }
    return pre;
}

std::vector<IndeterminateNeuron> indeterminate_neurons(const Network& net,
                                                       const RelaxedProgram& prog,
                                                       const Eigen::VectorXd& sol, double tol) {
    std::set<std::pair<int, int>> conditioned;
    for (const auto& d : prog.decisions) conditioned.insert({d.layer, d.neuron});

    const auto pre = lp_preactivations(net, prog, sol);
    std::vector<IndeterminateNeuron> out;
    for (int i = 1; i <= net.relu_layer_count(); ++i) {
        for (int j = 0; j < net.width(i); ++j) {
            if (conditioned.count({i, j})) continue;
            const double slack = sol[prog.slack_var(i, j)];
            const double excess = slack - std::max(0.0, pre[i - 1][j]);
            if (excess > tol) out.push_back({i, j, excess});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.layer != b.layer) return a.layer < b.layer;
        if (a.slack_excess != b.slack_excess) return a.slack_excess > b.slack_excess;
        return a.neuron < b.neuron;
    });
    return out;
}

Eigen::VectorXd extract_candidate_input(const RelaxedProgram& prog, const Eigen::VectorXd& sol) {
    return sol.head(prog.ambient_dim);
}

}  // namespace peregrinn
