#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "peregrinn/errors.hpp"
#include "peregrinn/lp.hpp"

namespace peregrinn {

// {x : A x <= b}
struct Polytope {
    Eigen::MatrixXd a_matrix;
    Eigen::VectorXd b_vector;

    Polytope() = default;
    Polytope(Eigen::MatrixXd a, Eigen::VectorXd b);

    int dim() const { return static_cast<int>(a_matrix.cols()); }
    int rows() const { return static_cast<int>(a_matrix.rows()); }
};

struct Box {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Box() = default;
    Box(Eigen::VectorXd lo, Eigen::VectorXd hi);

    int dim() const { return static_cast<int>(lower.size()); }
    bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
};

Polytope to_polytope(const Box& box);

// Boundary {x : normal.x + offset == 0}. A zero normal is degenerate: the
// "plane" is all of space or empty depending on the offset sign.
struct Hyperplane {
    Eigen::VectorXd normal;
    double offset = 0.0;

    double eval(const Eigen::VectorXd& x) const { return normal.dot(x) + offset; }
    bool degenerate(double tol = 1e-12) const { return normal.cwiseAbs().maxCoeff() <= tol; }
};

enum class Side : int8_t { Plus = +1, Minus = -1 };

bool contains(const Polytope& p, const Eigen::VectorXd& x, double tol);

// True iff some x in the domain satisfies sign*(normal.x + offset) >= 0 for
// every pair, decided by one LP feasibility call with 1e-7 slack per row.
bool sign_pattern_feasible(const std::vector<std::pair<Hyperplane, Side>>& planes,
                           const Polytope& domain);

// Fraction of samples on the requested side; boundary points count on both.
double volume_fraction(const Hyperplane& plane, Side side,
                       const std::vector<Eigen::VectorXd>& samples);

// Componentwise min/max of x over the polytope, by 2*d LP solves.
// Throws DomainError when some direction is unbounded.
Box bounding_box(const Polytope& p, double tol = kLpTol);

std::vector<Eigen::VectorXd> sample_box(const Box& box, int count, std::uint64_t seed);

// Rejection sampling from the bounding box, capped at 50x oversampling.
// Throws SamplingError when the cap is exhausted (near-degenerate region).
std::vector<Eigen::VectorXd> sample_polytope(const Polytope& p, int count, std::uint64_t seed);

}  // namespace peregrinn
