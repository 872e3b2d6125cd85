#include "peregrinn/properties.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace peregrinn {

std::vector<VerificationQuery> robustness_queries(const RobustnessSpec& spec) {
    if (spec.true_class < 0 || spec.true_class >= spec.num_classes)
        throw DomainError("robustness: true class out of range");
    if (spec.epsilon < 0.0) throw DomainError("robustness: epsilon must be nonnegative");
    const int d = static_cast<int>(spec.anchor.size());

    Eigen::VectorXd lo = spec.anchor.array() - spec.epsilon;
    Eigen::VectorXd hi = spec.anchor.array() + spec.epsilon;
    if (spec.clip) {
        if (spec.clip->dim() != d) throw ShapeError("robustness: clip dimension mismatch");
        lo = lo.cwiseMax(spec.clip->lower);
        hi = hi.cwiseMin(spec.clip->upper);
    }
    const Box input(lo, hi);

    std::vector<VerificationQuery> out;
    const int m_count = spec.num_classes;
    for (int m = 0; m < m_count; ++m) {
        if (m == spec.true_class) continue;
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m_count - 1, m_count);
        int r = 0;
        for (int i = 0; i < m_count; ++i) {
            if (i == m) continue;
            a(r, i) = 1.0;
            a(r, m) = -1.0;  // z_i - z_m <= 0
            ++r;
        }
        VerificationQuery q;
        q.input_set = input;
        q.violation_set = Polytope(std::move(a), Eigen::VectorXd::Zero(m_count - 1));
        out.push_back(std::move(q));
    }
    return out;
}

int robustness_query_class(const RobustnessSpec& spec, int qi) {
    return qi < spec.true_class ? qi : qi + 1;
}

RobustnessResult check_robustness(const Network& net, const RobustnessSpec& spec,
                                  const VerifierConfig& cfg) {
    if (net.output_dim() != spec.num_classes)
        throw ShapeError("robustness: class count does not match network output");
    RobustnessResult res;
    bool any_unknown = false;
    UnknownReason reason = UnknownReason::Timeout;
    const auto queries = robustness_queries(spec);
    for (size_t qi = 0; qi < queries.size(); ++qi) {
        VerificationResult vr = verify(net, queries[qi], cfg);
        res.per_query.push_back(vr);
        if (vr.verdict.unsafe()) {
            res.status = RobustnessStatus::NotRobust;
            res.adversarial_class = robustness_query_class(spec, static_cast<int>(qi));
            res.witness = vr.verdict.witness_input;
            return res;
        }
        if (vr.verdict.kind == VerdictKind::Unknown) {
            any_unknown = true;
            reason = vr.verdict.reason;
        }
    }
    if (any_unknown) {
        res.status = RobustnessStatus::Unknown;
        res.reason = reason;
    } else {
        res.status = RobustnessStatus::Robust;
    }
    return res;
}

std::vector<VerificationQuery> closed_loop_queries(const ClosedLoopSpec& spec) {
    const int state_dim = static_cast<int>(spec.a_matrix.rows());
    if (spec.a_matrix.cols() != state_dim)
        throw ShapeError("closed loop: A must be square over the state");
    if (spec.b_matrix.rows() != state_dim)
        throw ShapeError("closed loop: B must map outputs to the state");
    if (spec.observation.in_dim() != state_dim)
        throw ShapeError("closed loop: H must accept the state");
    const int out_dim = static_cast<int>(spec.b_matrix.cols());

    std::vector<VerificationQuery> queries;
    for (const auto& region : spec.regions) {
        if (region.dim() != state_dim) throw ShapeError("closed loop: region dimension mismatch");
        for (const auto& obstacle : spec.obstacles) {
            if (obstacle.dim() != state_dim)
                throw ShapeError("closed loop: obstacle dimension mismatch");
            VerificationQuery q;
            q.input_set = region;
            q.input_map = spec.observation;
            q.violation_set = Polytope(Eigen::MatrixXd::Zero(0, out_dim), Eigen::VectorXd(0));
            for (int r = 0; r < obstacle.rows(); ++r) {
                // a.(A x + B z) <= b
                CoupledConstraint c;
                c.input_coeffs = (obstacle.a_matrix.row(r) * spec.a_matrix).transpose();
                c.output_coeffs = (obstacle.a_matrix.row(r) * spec.b_matrix).transpose();
                c.rhs = obstacle.b_vector[r];
                q.coupled.push_back(std::move(c));
            }
            queries.push_back(std::move(q));
        }
    }
    return queries;
}

std::vector<Polytope> grid_workspace(const Box& bounds, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("grid_workspace: epsilon must be positive");
    const int d = bounds.dim();
    std::vector<int> counts(d);
    for (int j = 0; j < d; ++j) {
        const double span = bounds.upper[j] - bounds.lower[j];
        counts[j] = std::max(1, static_cast<int>(std::ceil(span / epsilon - 1e-12)));
    }
    std::vector<Polytope> cells;
    std::vector<int> idx(d, 0);
    while (true) {
        Eigen::VectorXd lo(d), hi(d);
        for (int j = 0; j < d; ++j) {
            lo[j] = bounds.lower[j] + idx[j] * epsilon;
            hi[j] = std::min(lo[j] + epsilon, bounds.upper[j]);
        }
        cells.push_back(to_polytope(Box(lo, hi)));
        int j = 0;
        for (; j < d; ++j) {
            if (++idx[j] < counts[j]) break;
            idx[j] = 0;
        }
        if (j == d) break;
    }
    return cells;
}

namespace {

using nlohmann::json;

Eigen::VectorXd parse_vector(const json& j) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

Eigen::MatrixXd parse_matrix(const json& j) {
    const size_t rows = j.size();
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    const size_t cols = j.at(0).size();
    Eigen::MatrixXd m(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        if (j.at(r).size() != cols) throw ShapeError("property: ragged matrix");
        for (size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    }
    return m;
}

Box parse_box(const json& j) {
    return Box(parse_vector(j.at("lower")), parse_vector(j.at("upper")));
}

Polytope parse_polytope(const json& j) {
    if (j.contains("lower")) return to_polytope(parse_box(j));
    return Polytope(parse_matrix(j.at("A")), parse_vector(j.at("b")));
}

AffineMap parse_affine(const json& j) {
    return AffineMap(parse_matrix(j.at("matrix")), parse_vector(j.at("offset")));
}

PropertyFile parse_property(const json& doc) {
    const std::string type = doc.at("type").get<std::string>();
    PropertyFile out;
    if (type == "robustness") {
        RobustnessSpec spec;
        spec.anchor = parse_vector(doc.at("anchor"));
        spec.epsilon = doc.at("epsilon").get<double>();
        spec.true_class = doc.at("true_class").get<int>();
        spec.num_classes = doc.at("num_classes").get<int>();
        if (doc.contains("clip")) spec.clip = parse_box(doc.at("clip"));
        out.spec = std::move(spec);
    } else if (type == "closed_loop") {
        ClosedLoopSpec spec;
        if (doc.contains("regions")) {
            for (const auto& r : doc.at("regions")) spec.regions.push_back(parse_polytope(r));
        } else {
            spec.regions =
                grid_workspace(parse_box(doc.at("workspace")), doc.at("grid_epsilon").get<double>());
        }
        for (const auto& o : doc.at("obstacles")) spec.obstacles.push_back(parse_polytope(o));
        spec.a_matrix = parse_matrix(doc.at("A"));
        spec.b_matrix = parse_matrix(doc.at("B"));
        if (doc.contains("H")) {
            Eigen::VectorXd d = doc.contains("d")
                                    ? parse_vector(doc.at("d"))
                                    : Eigen::VectorXd::Zero(doc.at("H").size());
            spec.observation = AffineMap(parse_matrix(doc.at("H")), std::move(d));
        } else {
            spec.observation = AffineMap::identity(static_cast<int>(spec.a_matrix.rows()));
        }
        out.spec = std::move(spec);
    } else if (type == "raw") {
        VerificationQuery q;
        const auto& in = doc.at("input_set");
        if (in.contains("lower"))
            q.input_set = parse_box(in);
        else
            q.input_set = parse_polytope(in);
        if (doc.contains("input_map")) q.input_map = parse_affine(doc.at("input_map"));
        q.violation_set = parse_polytope(doc.at("violation_set"));
        if (doc.contains("coupled")) {
            for (const auto& c : doc.at("coupled")) {
                CoupledConstraint cc;
                cc.input_coeffs = parse_vector(c.at("input"));
                cc.output_coeffs = parse_vector(c.at("output"));
                cc.rhs = c.at("rhs").get<double>();
                q.coupled.push_back(std::move(cc));
            }
        }
        out.spec = std::move(q);
    } else {
        throw ParseError("property: unknown type '" + type + "'");
    }
    return out;
}

}  // namespace

PropertyFile load_property(std::istream& source) {
    json doc;
    try {
        source >> doc;
    } catch (const json::exception& e) {
        throw ParseError(std::string("property json: ") + e.what());
    }
    try {
        return parse_property(doc);
    } catch (const json::exception& e) {
        throw ParseError(std::string("property json: ") + e.what());
    }
}

PropertyFile load_property_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("property: cannot open '" + path + "'");
    return load_property(in);
}

std::vector<LabeledQuery> expand_property(const PropertyFile& prop) {
    std::vector<LabeledQuery> out;
    if (std::holds_alternative<RobustnessSpec>(prop.spec)) {
        const auto& spec = std::get<RobustnessSpec>(prop.spec);
        auto queries = robustness_queries(spec);
        for (size_t i = 0; i < queries.size(); ++i)
            out.push_back({"class-" + std::to_string(robustness_query_class(spec, static_cast<int>(i))),
                           std::move(queries[i])});
    } else if (std::holds_alternative<ClosedLoopSpec>(prop.spec)) {
        const auto& spec = std::get<ClosedLoopSpec>(prop.spec);
        auto queries = closed_loop_queries(spec);
        const size_t o = spec.obstacles.size();
        for (size_t i = 0; i < queries.size(); ++i)
            out.push_back({"region-" + std::to_string(i / o) + "-obstacle-" + std::to_string(i % o),
                           std::move(queries[i])});
    } else {
        out.push_back({"query-0", std::get<VerificationQuery>(prop.spec)});
    }
    return out;
}

}  // namespace peregrinn
