#include "peregrinn/geometry.hpp"

#include <cmath>
#include <random>

namespace peregrinn {

namespace {

constexpr double kSignSlack = 1e-7;

// Uniform double in [lo, hi) from the top 53 bits; keeps sample streams
// identical across standard library implementations.
double uniform_from_bits(std::uint64_t bits, double lo, double hi) {
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

}  // namespace

Polytope::Polytope(Eigen::MatrixXd a, Eigen::VectorXd b)
    : a_matrix(std::move(a)), b_vector(std::move(b)) {
    if (a_matrix.rows() != b_vector.size())
        throw ShapeError("polytope: row count does not match rhs length");
}

Box::Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw ShapeError("box: bound lengths differ");
    for (int i = 0; i < lower.size(); ++i)
        if (lower[i] > upper[i]) throw ShapeError("box: lower exceeds upper");
}

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
    if (x.size() != dim()) throw ShapeError("box: dimension mismatch");
    for (int i = 0; i < dim(); ++i)
        if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
    return true;
}

Polytope to_polytope(const Box& box) {
    const int d = box.dim();
    Eigen::MatrixXd a(2 * d, d);
    Eigen::VectorXd b(2 * d);
    a.setZero();
    for (int i = 0; i < d; ++i) {
        a(2 * i, i) = 1.0;
        b[2 * i] = box.upper[i];
        a(2 * i + 1, i) = -1.0;
        b[2 * i + 1] = -box.lower[i];
    }
    return Polytope(std::move(a), std::move(b));
}

bool contains(const Polytope& p, const Eigen::VectorXd& x, double tol) {
    if (x.size() != p.dim()) throw ShapeError("contains: dimension mismatch");
    for (int r = 0; r < p.rows(); ++r)
        if (p.a_matrix.row(r).dot(x) > p.b_vector[r] + tol) return false;
    return true;
}

bool sign_pattern_feasible(const std::vector<std::pair<Hyperplane, Side>>& planes,
                           const Polytope& domain) {
    const int d = domain.dim();
    LinearProgram lp;
    for (int j = 0; j < d; ++j) lp.add_variable(-kInf, kInf);
    lp.objective = Eigen::VectorXd::Zero(d);
    for (int r = 0; r < domain.rows(); ++r)
        lp.add_constraint(domain.a_matrix.row(r).transpose(), Sense::LessEq, domain.b_vector[r]);
    for (const auto& [plane, side] : planes) {
        if (plane.normal.size() != d)
            throw ShapeError("sign_pattern_feasible: plane dimension mismatch");
        const double s = side == Side::Plus ? 1.0 : -1.0;
        // s*(n.x + c) >= -slack
        lp.add_constraint(s * plane.normal, Sense::GreaterEq, -s * plane.offset - kSignSlack);
    }
    return solve(lp).status == LpStatus::Optimal;
}

double volume_fraction(const Hyperplane& plane, Side side,
                       const std::vector<Eigen::VectorXd>& samples) {
    if (samples.empty()) throw SamplingError("volume_fraction: empty sample set");
    const double s = side == Side::Plus ? 1.0 : -1.0;
    long hits = 0;
    for (const auto& x : samples) {
        if (x.size() != plane.normal.size())
            throw ShapeError("volume_fraction: sample dimension mismatch");
        if (s * plane.eval(x) >= 0.0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

Box bounding_box(const Polytope& p, double tol) {
    const int d = p.dim();
    LinearProgram lp;
    for (int j = 0; j < d; ++j) lp.add_variable(-kInf, kInf);
    for (int r = 0; r < p.rows(); ++r)
        lp.add_constraint(p.a_matrix.row(r).transpose(), Sense::LessEq, p.b_vector[r]);

    Eigen::VectorXd lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
        c[j] = 1.0;
        lp.objective = c;
        LpOutcome down = solve(lp, tol);
        if (down.status == LpStatus::Infeasible) {
            // Empty polytope: any point serves as a (vacuous) box.
            return Box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d));
        }
        if (down.status == LpStatus::Unbounded)
            throw DomainError("bounding_box: polytope unbounded below in coordinate " +
                              std::to_string(j));
        lp.objective = -c;
        LpOutcome up = solve(lp, tol);
        if (up.status == LpStatus::Unbounded)
            throw DomainError("bounding_box: polytope unbounded above in coordinate " +
                              std::to_string(j));
        lo[j] = down.objective_value;
        hi[j] = -up.objective_value;
        if (lo[j] > hi[j]) lo[j] = hi[j] = 0.5 * (lo[j] + hi[j]);
    }
    return Box(std::move(lo), std::move(hi));
}

std::vector<Eigen::VectorXd> sample_box(const Box& box, int count, std::uint64_t seed) {
    if (count < 1) throw DomainError("sample_box: count must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    const int d = box.dim();
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd x(d);
        for (int j = 0; j < d; ++j) x[j] = uniform_from_bits(rng(), box.lower[j], box.upper[j]);
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<Eigen::VectorXd> sample_polytope(const Polytope& p, int count, std::uint64_t seed) {
    if (count < 1) throw DomainError("sample_polytope: count must be >= 1");
    const Box bb = bounding_box(p);
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    const int d = p.dim();
    const long cap = 50L * count;
    long rounds = 0;
    while (static_cast<int>(out.size()) < count) {
        if (++rounds > cap)
            throw SamplingError("sample_polytope: rejection cap exceeded (near-degenerate region)");
        Eigen::VectorXd x(d);
        for (int j = 0; j < d; ++j) x[j] = uniform_from_bits(rng(), bb.lower[j], bb.upper[j]);
        if (contains(p, x, 0.0)) out.push_back(std::move(x));
    }
    return out;
}

}  // namespace peregrinn
