#include "peregrinn/lp.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace peregrinn {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kRcTol = 1e-9;
constexpr double kDualTol = 1e-9;

// One variable of the original program expressed in standard form.
struct VarTransform {
    enum class Kind { Shifted, Reflected, Split } kind;
    double base = 0.0;  // l for Shifted, u for Reflected
    int col = -1;
    int col_neg = -1;  // Split only
};

struct StandardForm {
    Eigen::MatrixXd rows;     // m x ncols, equality rows, rhs >= 0
    Eigen::VectorXd rhs;      // m
    Eigen::VectorXd cost;     // ncols, phase-2 cost on standard vars
    std::vector<int> row_of_constraint;  // original constraint index per row, -1 for bound rows
    std::vector<VarTransform> transforms;
    int ncols = 0;
};

StandardForm build_standard_form(const LinearProgram& lp) {
    const int n = lp.num_vars();
    for (const auto& c : lp.constraints) {
        if (c.coeffs.size() != n)
            throw ShapeError("lp: constraint coefficient length does not match variable count");
    }
    if (lp.objective.size() != 0 && lp.objective.size() != n)
        throw ShapeError("lp: objective length does not match variable count");

    StandardForm sf;
    sf.transforms.resize(n);
    int next_col = 0;
    int extra_bound_rows = 0;
    for (int j = 0; j < n; ++j) {
        const auto& b = lp.variables[j];
        if (std::isfinite(b.lower)) {
            sf.transforms[j] = {VarTransform::Kind::Shifted, b.lower, next_col++, -1};
            if (std::isfinite(b.upper)) ++extra_bound_rows;
        } else if (std::isfinite(b.upper)) {
            sf.transforms[j] = {VarTransform::Kind::Reflected, b.upper, next_col++, -1};
        } else {
            sf.transforms[j] = {VarTransform::Kind::Split, 0.0, next_col, next_col + 1};
            next_col += 2;
        }
    }
    const int n_struct = next_col;
    const int m_orig = static_cast<int>(lp.constraints.size());
    const int m = m_orig + extra_bound_rows;

    int n_slack = 0;
    for (const auto& c : lp.constraints)
        if (c.sense != Sense::Equal) ++n_slack;
    n_slack += extra_bound_rows;

    sf.ncols = n_struct + n_slack;
    sf.rows = Eigen::MatrixXd::Zero(m, sf.ncols);
    sf.rhs = Eigen::VectorXd::Zero(m);
    sf.cost = Eigen::VectorXd::Zero(sf.ncols);
    sf.row_of_constraint.assign(m, -1);

    if (lp.objective.size() == n) {
        for (int j = 0; j < n; ++j) {
            const auto& t = sf.transforms[j];
            const double c = lp.objective[j];
            switch (t.kind) {
                case VarTransform::Kind::Shifted: sf.cost[t.col] += c; break;
                case VarTransform::Kind::Reflected: sf.cost[t.col] -= c; break;
                case VarTransform::Kind::Split:
                    sf.cost[t.col] += c;
                    sf.cost[t.col_neg] -= c;
                    break;
            }
        }
    }

    int slack_col = n_struct;
    int row = 0;
    for (int i = 0; i < m_orig; ++i, ++row) {
        const auto& c = lp.constraints[i];
        double rhs = c.rhs;
        for (int j = 0; j < n; ++j) {
            const double a = c.coeffs[j];
            if (a == 0.0) continue;
            if (!std::isfinite(a)) throw ValueError("lp: non-finite constraint coefficient");
            const auto& t = sf.transforms[j];
            switch (t.kind) {
                case VarTransform::Kind::Shifted:
                    sf.rows(row, t.col) += a;
                    rhs -= a * t.base;
                    break;
                case VarTransform::Kind::Reflected:
                    sf.rows(row, t.col) -= a;
                    rhs -= a * t.base;
                    break;
                case VarTransform::Kind::Split:
                    sf.rows(row, t.col) += a;
                    sf.rows(row, t.col_neg) -= a;
                    break;
            }
        }
        if (!std::isfinite(rhs)) throw ValueError("lp: non-finite rhs");
        if (c.sense == Sense::LessEq)
            sf.rows(row, slack_col++) = 1.0;
        else if (c.sense == Sense::GreaterEq)
            sf.rows(row, slack_col++) = -1.0;
        sf.rhs[row] = rhs;
        sf.row_of_constraint[row] = i;
    }
    // Range rows for doubly bounded variables: s_j <= u - l.
    for (int j = 0; j < n; ++j) {
        const auto& b = lp.variables[j];
        const auto& t = sf.transforms[j];
        if (t.kind == VarTransform::Kind::Shifted && std::isfinite(b.upper)) {
            sf.rows(row, t.col) = 1.0;
            sf.rows(row, slack_col++) = 1.0;
            sf.rhs[row] = b.upper - b.lower;
            ++row;
        }
    }
    // Normalize to nonnegative rhs.
    for (int i = 0; i < m; ++i) {
        if (sf.rhs[i] < 0.0) {
            sf.rows.row(i) = -sf.rows.row(i);
            sf.rhs[i] = -sf.rhs[i];
        }
    }
    return sf;
}

struct Tableau {
    Eigen::MatrixXd T;
    Eigen::VectorXd rhs;
    std::vector<int> basis;
    long pivots = 0;

    int rows() const { return static_cast<int>(T.rows()); }
    int cols() const { return static_cast<int>(T.cols()); }

    void pivot(int r, int e) {
        const double p = T(r, e);
        T.row(r) /= p;
        rhs[r] /= p;
        T(r, e) = 1.0;
        for (int i = 0; i < rows(); ++i) {
            if (i == r) continue;
            const double f = T(i, e);
            if (f == 0.0) continue;
            T.row(i) -= f * T.row(r);
            rhs[i] -= f * rhs[r];
            T(i, e) = 0.0;
            if (rhs[i] < 0.0 && rhs[i] > -1e-11) rhs[i] = 0.0;
        }
        ++pivots;
    }
};

enum class RunStatus { Optimal, Unbounded };

// Minimizes cost over the tableau. Columns with entering_ok[j]==false never
// enter the basis. Dantzig pivoting for a budgeted number of iterations,
// Bland's rule afterwards.
RunStatus run_simplex(Tableau& tb, const Eigen::VectorXd& cost, const std::vector<char>& entering_ok) {
    const int m = tb.rows();
    const int ncols = tb.cols();
    const long dantzig_budget = 2000 + 10L * (m + ncols);
    const long hard_cap = 50000 + 100L * (m + ncols);
    long iters = 0;

    Eigen::VectorXd cb(m);
    while (true) {
        if (++iters > hard_cap)
            throw NumericError("simplex: iteration cap exceeded");
        for (int i = 0; i < m; ++i) cb[i] = cost[tb.basis[i]];
        // Reduced costs r = c - T^T cb, recomputed each iteration.
        Eigen::VectorXd r = cost - tb.T.transpose() * cb;

        int entering = -1;
        if (iters <= dantzig_budget) {
            double best = -kRcTol;
            for (int j = 0; j < ncols; ++j) {
                if (!entering_ok[j]) continue;
                if (r[j] < best) {
                    best = r[j];
                    entering = j;
                }
            }
        } else {
            for (int j = 0; j < ncols; ++j) {
                if (entering_ok[j] && r[j] < -kRcTol) {
                    entering = j;
                    break;
                }
            }
        }
        if (entering < 0) return RunStatus::Optimal;

        int leave = -1;
        double best_ratio = 0.0;
        for (int i = 0; i < m; ++i) {
            const double a = tb.T(i, entering);
            if (a <= kPivotTol) continue;
            const double ratio = tb.rhs[i] / a;
            if (leave < 0 || ratio < best_ratio - 1e-12 ||
                (std::abs(ratio - best_ratio) <= 1e-12 && tb.basis[i] < tb.basis[leave])) {
                leave = i;
                best_ratio = ratio;
            }
        }
        if (leave < 0) return RunStatus::Unbounded;
        tb.basis[leave] = entering;
        tb.pivot(leave, entering);
    }
}

}  // namespace

void LinearProgram::add_constraint(Eigen::VectorXd coeffs, Sense sense, double rhs, std::string tag) {
    if (coeffs.size() != num_vars())
        throw ShapeError("lp: constraint coefficient length does not match variable count");
    constraints.push_back({std::move(coeffs), sense, rhs, std::move(tag)});
}

LpOutcome solve(const LinearProgram& lp, double tol) {
    StandardForm sf = build_standard_form(lp);
    const int m = static_cast<int>(sf.rows.rows());
    const int nreal = sf.ncols;

    // Phase 1: artificial basis, minimize the sum of artificials.
    Tableau tb;
    tb.T.resize(m, nreal + m);
    tb.T.leftCols(nreal) = sf.rows;
    tb.T.rightCols(m) = Eigen::MatrixXd::Identity(m, m);
    tb.rhs = sf.rhs;
    tb.basis.resize(m);
    for (int i = 0; i < m; ++i) tb.basis[i] = nreal + i;

    Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(nreal + m);
    cost1.tail(m).setOnes();
    std::vector<char> ok1(nreal + m, 1);
    run_simplex(tb, cost1, ok1);  // bounded below by 0, cannot be unbounded

    double phase1 = 0.0;
    for (int i = 0; i < m; ++i)
        if (tb.basis[i] >= nreal) phase1 += tb.rhs[i];

    if (phase1 > tol) {
        LpOutcome out;
        out.status = LpStatus::Infeasible;
        // Farkas duals via artificial reduced costs: y_i = 1 - r(artificial_i).
        Eigen::VectorXd cb(m);
        for (int i = 0; i < m; ++i) cb[i] = cost1[tb.basis[i]];
        Eigen::VectorXd rart = Eigen::VectorXd::Ones(m) - tb.T.rightCols(m).transpose() * cb;
        std::unordered_set<std::string> seen;
        for (int i = 0; i < m; ++i) {
            const double y = 1.0 - rart[i];
            if (std::abs(y) <= kDualTol) continue;
            const int ci = sf.row_of_constraint[i];
            if (ci < 0) continue;
            const std::string& tag = lp.constraints[ci].tag;
            if (tag.empty() || !seen.insert(tag).second) continue;
            out.infeasibility_witness.push_back(tag);
        }
        return out;
    }

    // Pivot artificials out of the basis; delete rows that turn out redundant.
    std::vector<int> keep_rows;
    for (int i = 0; i < m; ++i) {
        if (tb.basis[i] < nreal) {
            keep_rows.push_back(i);
            continue;
        }
        int col = -1;
        for (int j = 0; j < nreal; ++j) {
            if (std::abs(tb.T(i, j)) > kPivotTol) {
                col = j;
                break;
            }
        }
        if (col >= 0) {
            tb.basis[i] = col;
            tb.pivot(i, col);
            keep_rows.push_back(i);
        }
        // else: redundant row, dropped below
    }
    const int m2 = static_cast<int>(keep_rows.size());
    Tableau tb2;
    tb2.T.resize(m2, nreal);
    tb2.rhs.resize(m2);
    tb2.basis.resize(m2);
    for (int i = 0; i < m2; ++i) {
        tb2.T.row(i) = tb.T.row(keep_rows[i]).head(nreal);
        tb2.rhs[i] = std::max(0.0, tb.rhs[keep_rows[i]]);
        tb2.basis[i] = tb.basis[keep_rows[i]];
    }

    std::vector<char> ok2(nreal, 1);
    if (run_simplex(tb2, sf.cost, ok2) == RunStatus::Unbounded) {
        LpOutcome out;
        out.status = LpStatus::Unbounded;
        return out;
    }

    // Recover the original variables.
    Eigen::VectorXd s = Eigen::VectorXd::Zero(nreal);
    for (int i = 0; i < m2; ++i) s[tb2.basis[i]] = tb2.rhs[i];
    LpOutcome out;
    out.status = LpStatus::Optimal;
    out.solution.resize(lp.num_vars());
    for (int j = 0; j < lp.num_vars(); ++j) {
        const auto& t = sf.transforms[j];
        switch (t.kind) {
            case VarTransform::Kind::Shifted: out.solution[j] = t.base + s[t.col]; break;
            case VarTransform::Kind::Reflected: out.solution[j] = t.base - s[t.col]; break;
            case VarTransform::Kind::Split: out.solution[j] = s[t.col] - s[t.col_neg]; break;
        }
    }
    out.objective_value =
        lp.objective.size() ? lp.objective.dot(out.solution) : 0.0;

    // Residual check against the original rows.
    const double xmax = out.solution.size() ? out.solution.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& c : lp.constraints) {
        const double ax = c.coeffs.dot(out.solution);
        const double scale = 1.0 + std::abs(c.rhs) + c.coeffs.cwiseAbs().sum() * xmax;
        const double viol = c.sense == Sense::LessEq    ? ax - c.rhs
                            : c.sense == Sense::GreaterEq ? c.rhs - ax
                                                          : std::abs(ax - c.rhs);
        if (viol > 1e3 * tol * scale)
            throw NumericError("simplex: optimal solution fails residual check");
    }
    return out;
}

IisResult extract_iis(const LinearProgram& lp, const std::vector<std::string>& candidates,
                      double tol) {
    IisResult res;
    auto solve_without = [&](const std::unordered_set<std::string>& removed) {
        LinearProgram sub;
        sub.variables = lp.variables;
        sub.objective = Eigen::VectorXd::Zero(lp.num_vars());
        for (const auto& c : lp.constraints)
            if (!removed.count(c.tag)) sub.constraints.push_back(c);
        ++res.solves_used;
        return solve(sub, tol).status;
    };

    if (solve_without({}) != LpStatus::Infeasible) {
        res.kind = IisResult::Kind::NotInfeasible;
        return res;
    }
    std::unordered_set<std::string> all(candidates.begin(), candidates.end());
    if (solve_without(all) == LpStatus::Infeasible) {
        res.kind = IisResult::Kind::BaseInfeasible;
        return res;
    }

    // Deletion filter, most recently listed candidate first.
    std::unordered_set<std::string> dropped;
    for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
        std::unordered_set<std::string> trial = dropped;
        trial.insert(*it);
        if (solve_without(trial) == LpStatus::Infeasible) dropped = std::move(trial);
    }
    res.kind = IisResult::Kind::Report;
    for (const auto& c : candidates)
        if (!dropped.count(c)) res.tags.push_back(c);
    return res;
}

LinearProgram with_constraints(const LinearProgram& lp, const std::vector<Constraint>& added) {
    LinearProgram out = lp;
    for (const auto& c : added) {
        if (c.coeffs.size() != lp.num_vars())
            throw ShapeError("with_constraints: coefficient length mismatch");
        out.constraints.push_back(c);
    }
    return out;
}

void write_lp_text(std::ostream& os, const LinearProgram& lp) {
    auto var_name = [](int j) { return "x" + std::to_string(j); };
    auto write_linear = [&](const Eigen::VectorXd& a) {
        bool first = true;
        for (int j = 0; j < a.size(); ++j) {
            if (a[j] == 0.0) continue;
            if (first) {
                os << (a[j] < 0 ? "- " : "");
            } else {
                os << (a[j] < 0 ? " - " : " + ");
            }
            os << std::abs(a[j]) << " " << var_name(j);
            first = false;
        }
        if (first) os << "0 " << var_name(0);
    };

    os << "\\ peregrinn lp dump\nMinimize\n obj: ";
    if (lp.objective.size())
        write_linear(lp.objective);
    else
        os << "0 x0";
    os << "\nSubject To\n";
    for (size_t i = 0; i < lp.constraints.size(); ++i) {
        const auto& c = lp.constraints[i];
        os << " " << (c.tag.empty() ? "c" + std::to_string(i) : c.tag) << ": ";
        write_linear(c.coeffs);
        os << (c.sense == Sense::LessEq ? " <= " : c.sense == Sense::GreaterEq ? " >= " : " = ")
           << c.rhs << "\n";
    }
    os << "Bounds\n";
    for (int j = 0; j < lp.num_vars(); ++j) {
        const auto& b = lp.variables[j];
        if (!std::isfinite(b.lower) && !std::isfinite(b.upper)) {
            os << " " << var_name(j) << " free\n";
        } else {
            os << " ";
            if (std::isfinite(b.lower))
                os << b.lower << " <= ";
            else
                os << "-inf <= ";
            os << var_name(j);
            if (std::isfinite(b.upper)) os << " <= " << b.upper;
            os << "\n";
        }
    }
    os << "End\n";
}

}  // namespace peregrinn
