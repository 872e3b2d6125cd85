#pragma once

#include <Eigen/Dense>

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "peregrinn/errors.hpp"

namespace peregrinn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLpTol = 1e-7;

enum class Sense { LessEq, Equal, GreaterEq };

struct VariableBound {
    double lower = -kInf;
    double upper = kInf;
};

struct Constraint {
    Eigen::VectorXd coeffs;
    Sense sense = Sense::LessEq;
    double rhs = 0.0;
    std::string tag;
};

// Dense LP in the form: minimize c.x subject to row constraints and
// per-variable bounds. Value semantics throughout; solve() never mutates.
struct LinearProgram {
    std::vector<VariableBound> variables;
    std::vector<Constraint> constraints;
    Eigen::VectorXd objective;

    int num_vars() const { return static_cast<int>(variables.size()); }

    void add_variable(double lower, double upper) { variables.push_back({lower, upper}); }

    void add_constraint(Eigen::VectorXd coeffs, Sense sense, double rhs, std::string tag = {});
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpOutcome {
    LpStatus status = LpStatus::Infeasible;
    Eigen::VectorXd solution;      // Optimal only
    double objective_value = 0.0;  // Optimal only
    // Infeasible only: tags of rows with nonzero phase-1 duals, a coarse
    // (not yet irreducible) set of rows participating in the Farkas proof.
    std::vector<std::string> infeasibility_witness;
};

// Two-phase dense simplex. Dantzig pivoting with a switch to Bland's rule
// after a bounded number of pivots. Deterministic for identical inputs.
LpOutcome solve(const LinearProgram& lp, double tol = kLpTol);

struct IisResult {
    enum class Kind {
        Report,         // tags form an IIS among the candidates
        NotInfeasible,  // the program is feasible as given
        BaseInfeasible  // infeasible even with every candidate removed
    };
    Kind kind = Kind::Report;
    std::vector<std::string> tags;
    long solves_used = 0;
};

// Deletion filter over the candidate-tagged constraints, most recently
// listed candidate dropped first. On Kind::Report: the program restricted
// to base + reported tags is infeasible and removing any single reported
// tag restores feasibility.
IisResult extract_iis(const LinearProgram& lp, const std::vector<std::string>& candidates,
                      double tol = kLpTol);

// Persistent extension: returns a copy with the rows appended.
LinearProgram with_constraints(const LinearProgram& lp, const std::vector<Constraint>& added);

// CPLEX-style LP text dump for cross-checking against external solvers.
void write_lp_text(std::ostream& os, const LinearProgram& lp);

}  // namespace peregrinn
