#include "peregrinn/interval.hpp"

namespace peregrinn {

PhaseMap PhaseMap::free_for(const Network& net) {
    PhaseMap m;
    m.phase.resize(net.layer_count());
    m.origin.resize(net.layer_count());
    for (int i = 1; i <= net.layer_count(); ++i) {
        m.phase[i - 1].assign(net.width(i), Phase::Free);
        m.origin[i - 1].assign(net.width(i), PhaseOrigin::Free);
    }
    return m;
}

void PhaseMap::set(int layer, int neuron, Phase p, PhaseOrigin o) {
    phase[layer - 1][neuron] = p;
    origin[layer - 1][neuron] = o;
}

double AffineExpr::max_over(const Box& box) const {
    double v = constant;
    for (int j = 0; j < coef.size(); ++j)
        v += coef[j] * (coef[j] >= 0.0 ? box.upper[j] : box.lower[j]);
    return v;
}

double AffineExpr::min_over(const Box& box) const {
    double v = constant;
    for (int j = 0; j < coef.size(); ++j)
        v += coef[j] * (coef[j] >= 0.0 ? box.lower[j] : box.upper[j]);
    return v;
}

std::pair<AffineExpr, AffineExpr> relax_relu(const AffineExpr& lower, const AffineExpr& upper,
                                             double lo, double hi) {
    if (!(lo < 0.0 && hi > 0.0))
        throw DomainError("relax_relu: bounds must straddle zero");
    const double slope = hi / (hi - lo);
    AffineExpr up;
    up.coef = slope * upper.coef;
    up.constant = slope * (upper.constant - lo);
    AffineExpr low;
    low.coef = Eigen::RowVectorXd::Zero(lower.coef.size());
    low.constant = 0.0;
    return {low, up};
}

SymbolicBounds symbolic_analysis(const Network& net, const Box& input_box, const PhaseMap& fixed) {
    if (input_box.dim() != net.input_dim())
        throw ShapeError("symbolic_analysis: box dimension does not match network input");
    const int k0 = net.input_dim();

    SymbolicBounds bounds;
    bounds.layers.resize(net.layer_count());

    // The "post" expressions of layer 0 are the inputs themselves.
    std::vector<AffineExpr> prev_lo(k0), prev_hi(k0);
    for (int j = 0; j < k0; ++j) {
        prev_lo[j].coef = Eigen::RowVectorXd::Zero(k0);
        prev_lo[j].coef[j] = 1.0;
        prev_hi[j] = prev_lo[j];
    }

    for (int i = 1; i <= net.layer_count(); ++i) {
        const Layer& l = net.layer(i);
        LayerSymbolicBounds& lb = bounds.layers[i - 1];
        const int k = l.out_dim();
        lb.pre_lower.resize(k);
        lb.pre_upper.resize(k);
        lb.post_lower.resize(k);
        lb.post_upper.resize(k);
        lb.concrete_lo.resize(k);
        lb.concrete_hi.resize(k);

        for (int j = 0; j < k; ++j) {
            AffineExpr lo_e, hi_e;
            lo_e.coef = Eigen::RowVectorXd::Zero(k0);
            hi_e.coef = Eigen::RowVectorXd::Zero(k0);
            lo_e.constant = hi_e.constant = l.bias[j];
            for (int t = 0; t < l.in_dim(); ++t) {
                const double w = l.weights(j, t);
                if (w == 0.0) continue;
                const AffineExpr& src_lo = w >= 0.0 ? prev_lo[t] : prev_hi[t];
                const AffineExpr& src_hi = w >= 0.0 ? prev_hi[t] : prev_lo[t];
                lo_e.coef += w * src_lo.coef;
                lo_e.constant += w * src_lo.constant;
                hi_e.coef += w * src_hi.coef;
                hi_e.constant += w * src_hi.constant;
            }
            lb.pre_lower[j] = lo_e;
            lb.pre_upper[j] = hi_e;
            lb.concrete_lo[j] = lo_e.min_over(input_box);
            lb.concrete_hi[j] = hi_e.max_over(input_box);

            if (i > net.relu_layer_count()) {
                lb.post_lower[j] = lo_e;
                lb.post_upper[j] = hi_e;
                continue;
            }
            Phase p = fixed.at(i, j);
            if (p == Phase::Free) {
                if (lb.concrete_lo[j] >= 0.0)
                    p = Phase::Active;
                else if (lb.concrete_hi[j] <= 0.0)
                    p = Phase::Inactive;
            }
            if (p == Phase::Active) {
                lb.post_lower[j] = lo_e;
                lb.post_upper[j] = hi_e;
            } else if (p == Phase::Inactive) {
                AffineExpr zero;
                zero.coef = Eigen::RowVectorXd::Zero(k0);
                lb.post_lower[j] = zero;
                lb.post_upper[j] = zero;
            } else {
                auto [rl, ru] = relax_relu(lo_e, hi_e, lb.concrete_lo[j], lb.concrete_hi[j]);
                lb.post_lower[j] = rl;
                lb.post_upper[j] = ru;
            }
        }
        prev_lo = lb.post_lower;
        prev_hi = lb.post_upper;
    }
    return bounds;
}

InferenceResult infer_phases(const Network& net, const SymbolicBounds& bounds,
                             const PhaseMap& fixed) {
    InferenceResult res;
    res.map = fixed;
    for (int i = 1; i <= net.relu_layer_count(); ++i) {
        const LayerSymbolicBounds& lb = bounds.layer(i);
        for (int j = 0; j < net.width(i); ++j) {
            const double lo = lb.concrete_lo[j];
            const double hi = lb.concrete_hi[j];
            if (fixed.origin_at(i, j) == PhaseOrigin::Decided) {
                const Phase p = fixed.at(i, j);
                if ((p == Phase::Active && hi < 0.0) || (p == Phase::Inactive && lo > 0.0)) {
                    res.conflict = {i, j};
                    return res;
                }
                continue;
            }
            if (fixed.fixed(i, j)) continue;
            if (hi <= 0.0) {
                res.map.set(i, j, Phase::Inactive, PhaseOrigin::Inferred);
                ++res.inferred_count;
            } else if (lo >= 0.0) {
                res.map.set(i, j, Phase::Active, PhaseOrigin::Inferred);
                ++res.inferred_count;
            }
        }
    }
    return res;
}

}  // namespace peregrinn
