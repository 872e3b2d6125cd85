#include "peregrinn/search.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>

namespace peregrinn {

namespace {

constexpr double kWitnessTol = 1e-6;
constexpr double kSignSlack = 1e-7;

using Clock = std::chrono::steady_clock;

ActivationPattern prefix_pattern(const Network& net, const PhaseMap& phases,
                                 const std::vector<Eigen::VectorXd>& lp_preacts,
                                 int through_layer) {
    ActivationPattern pat = ActivationPattern::free_for(net);
    for (int i = 1; i <= through_layer; ++i) {
        for (int j = 0; j < net.width(i); ++j) {
            Phase p = phases.at(i, j);
            if (p == Phase::Free) p = lp_preacts[i - 1][j] > 0.0 ? Phase::Active : Phase::Inactive;
            pat.set(i, j, p);
        }
    }
    return pat;
}

// Activation boundary of neuron (layer, j) pulled back to the ambient input
// space through the fixed-phase prefix and the query pre-map.
Hyperplane ambient_plane(const Network& net, const VerificationQuery& query,
                         const AffineMap& prefix, int layer, int j) {
    const Layer& l = net.layer(layer);
    Eigen::RowVectorXd nu = l.weights.row(j) * prefix.matrix;
    const double off_u = l.weights.row(j).dot(prefix.offset) + l.bias[j];
    Hyperplane h;
    if (query.input_map) {
        h.normal = (nu * query.input_map->matrix).transpose();
        h.offset = nu.dot(query.input_map->offset) + off_u;
    } else {
        h.normal = nu.transpose();
        h.offset = off_u;
    }
    return h;
}

Box premap_box(const Polytope& domain, const AffineMap& map, double tol) {
    LinearProgram lp;
    const int d = domain.dim();
    for (int j = 0; j < d; ++j) lp.add_variable(-kInf, kInf);
    for (int r = 0; r < domain.rows(); ++r)
        lp.add_constraint(domain.a_matrix.row(r).transpose(), Sense::LessEq, domain.b_vector[r]);
    const int k = map.out_dim();
    Eigen::VectorXd lo(k), hi(k);
    for (int i = 0; i < k; ++i) {
        lp.objective = map.matrix.row(i).transpose();
        LpOutcome down = solve(lp, tol);
        if (down.status == LpStatus::Infeasible) return Box(Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k));
        if (down.status == LpStatus::Unbounded)
            throw DomainError("verify: pre-mapped input region unbounded");
        lp.objective = -map.matrix.row(i).transpose();
        LpOutcome up = solve(lp, tol);
        if (up.status == LpStatus::Unbounded)
            throw DomainError("verify: pre-mapped input region unbounded");
        lo[i] = down.objective_value + map.offset[i];
        hi[i] = -up.objective_value + map.offset[i];
        if (lo[i] > hi[i]) lo[i] = hi[i] = 0.5 * (lo[i] + hi[i]);
    }
    return Box(std::move(lo), std::move(hi));
}

struct TraceWriter {
    std::ostream* os;
    long iter = 0;

    void emit(const char* event, const SearchState& state, const nlohmann::json& extra) {
        if (!os) return;
        nlohmann::json j{{"iter", iter}, {"event", event}, {"stack", state.stack.size()}};
        if (extra.is_object()) j.update(extra);
        (*os) << j.dump() << "\n";
    }
};

}  // namespace

std::vector<ConditioningDecision> SearchState::decisions() const {
    std::vector<ConditioningDecision> out;
    out.reserve(stack.size());
    for (const auto& e : stack) out.push_back(e.decision);
    return out;
}

bool validate_witness(const Network& net, const VerificationQuery& query,
                      const Eigen::VectorXd& x) {
    if (x.size() != query.ambient_dim()) throw ShapeError("validate_witness: dimension mismatch");
    if (std::holds_alternative<Box>(query.input_set)) {
        if (!std::get<Box>(query.input_set).contains(x, kWitnessTol)) return false;
    } else if (!contains(std::get<Polytope>(query.input_set), x, kWitnessTol)) {
        return false;
    }
    const Eigen::VectorXd z = forward(net, query.to_network_input(x)).output;
    if (query.violation_set.rows() > 0 && !contains(query.violation_set, z, kWitnessTol))
        return false;
    for (const auto& c : query.coupled)
        if (c.input_coeffs.dot(x) + c.output_coeffs.dot(z) > c.rhs + kWitnessTol) return false;
    return true;
}

bool backtrack(SearchState& state, const std::vector<std::string>& iis_tags) {
    if (state.stack.empty()) return false;
    int locate = -1;
    if (!iis_tags.empty()) {
        const std::set<std::string> hit(iis_tags.begin(), iis_tags.end());
        for (int i = static_cast<int>(state.stack.size()) - 1; i >= 0; --i) {
            for (const auto& t : decision_tags(state.stack[i].decision)) {
                if (hit.count(t)) {
                    locate = i;
                    break;
                }
            }
            if (locate >= 0) break;
        }
    }
    if (locate < 0) locate = static_cast<int>(state.stack.size()) - 1;
    state.stack.resize(locate + 1);

    while (!state.stack.empty()) {
        StackEntry& e = state.stack.back();
        const Phase other = e.decision.phase == Phase::Active ? Phase::Inactive : Phase::Active;
        if (!e.tried(other)) {
            e.decision.phase = other;
            e.mark_tried(other);
            return true;
        }
        state.stack.pop_back();
    }
    return false;
}

std::optional<NeuronChoice> pick_neuron(const std::vector<IndeterminateNeuron>& indeterminates,
                                        const PickContext& ctx) {
    if (indeterminates.empty()) throw DomainError("pick_neuron: empty indeterminate list");
    const int layer = indeterminates.front().layer;

    const ActivationPattern pat =
        prefix_pattern(ctx.net, ctx.phases, ctx.lp_preacts, layer - 1);
    const AffineMap prefix = fold_affine(ctx.net, pat, layer - 1);

    // Same-layer conditionings constrain which sign patterns remain possible.
    std::vector<std::pair<Hyperplane, Side>> context;
    for (const auto& e : ctx.state.stack) {
        if (e.decision.layer != layer) continue;
        Hyperplane h = ambient_plane(ctx.net, ctx.query, prefix, layer, e.decision.neuron);
        if (h.degenerate()) continue;
        context.emplace_back(std::move(h),
                             e.decision.phase == Phase::Active ? Side::Plus : Side::Minus);
    }

    struct Candidate {
        double volume;
        int neuron;
        Phase phase;
        Hyperplane plane;
        bool plane_valid;
    };
    std::vector<Candidate> cands;
    const auto& samples = ctx.samples.empty() ? ctx.all_samples : ctx.samples;

    for (const auto& ind : indeterminates) {
        if (ind.layer != layer) continue;
        Hyperplane h = ambient_plane(ctx.net, ctx.query, prefix, layer, ind.neuron);
        const bool degenerate = h.degenerate();
        for (const Phase phase : {Phase::Active, Phase::Inactive}) {
            const Side side = phase == Phase::Active ? Side::Plus : Side::Minus;
            bool feasible;
            if (degenerate) {
                feasible = phase == Phase::Active ? h.offset >= -kSignSlack : h.offset <= kSignSlack;
            } else {
                auto planes = context;
                planes.emplace_back(h, side);
                feasible = sign_pattern_feasible(planes, ctx.domain);
            }
            if (!feasible) continue;
            const double vol = samples.empty() ? 1.0 : volume_fraction(h, side, samples);
            cands.push_back({vol, ind.neuron, phase, h, !degenerate});
        }
    }
    if (cands.empty()) return std::nullopt;

    size_t pick = 0;
    if (ctx.rng) {
        pick = (*ctx.rng)() % cands.size();
    } else {
        for (size_t i = 1; i < cands.size(); ++i) {
            const auto& a = cands[i];
            const auto& b = cands[pick];
            if (a.volume < b.volume ||
                (a.volume == b.volume &&
                 (a.neuron < b.neuron ||
                  (a.neuron == b.neuron && a.phase == Phase::Active && b.phase != Phase::Active))))
                pick = i;
        }
    }
    const Candidate& c = cands[pick];
    return NeuronChoice{layer, c.neuron, c.phase, c.plane, c.plane_valid};
}

VerificationResult verify(const Network& net, const VerificationQuery& query,
                          const VerifierConfig& cfg) {
    query.validate_against(net);

    const Polytope domain = std::holds_alternative<Box>(query.input_set)
                                ? to_polytope(std::get<Box>(query.input_set))
                                : std::get<Polytope>(query.input_set);
    const Box amb_box = std::holds_alternative<Box>(query.input_set)
                            ? std::get<Box>(query.input_set)
                            : bounding_box(domain, cfg.lp_tol);
    const Box nn_box =
        query.input_map ? premap_box(domain, *query.input_map, cfg.lp_tol) : amb_box;

    const Eigen::VectorXd weights = layer_weights(
        net.layer_count(), default_weight_ratio(net.layer_count(), cfg.weight_ratio_cap));

    std::vector<Eigen::VectorXd> all_samples;
    if (cfg.volume_samples > 0) {
        try {
            all_samples = std::holds_alternative<Box>(query.input_set)
                              ? sample_box(std::get<Box>(query.input_set), cfg.volume_samples,
                                           cfg.seed)
                              : sample_polytope(domain, cfg.volume_samples, cfg.seed);
        } catch (const SamplingError&) {
            // Near-degenerate region: rank volumes over box samples instead.
            all_samples = sample_box(amb_box, cfg.volume_samples, cfg.seed);
        }
    }

    SearchState state;
    TraceWriter trace{cfg.trace};
    std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(cfg.timeout_s));
    bool just_conditioned = false;
    int last_conditioned_layer = 0;

    auto finish = [&](Verdict v) {
        return VerificationResult{std::move(v), state.stats};
    };
    auto push = [&](int layer, int neuron, Phase phase, const Hyperplane& plane,
                    bool plane_valid) {
        StackEntry e;
        e.decision = {layer, neuron, phase, DecisionOrigin::Search};
        e.mark_tried(phase);
        e.plane = plane;
        e.plane_valid = plane_valid;
        state.stack.push_back(std::move(e));
        just_conditioned = true;
        last_conditioned_layer = layer;
    };

    while (true) {
        ++state.stats.iterations;
        trace.iter = state.stats.iterations;
        if (Clock::now() > deadline)
            return finish({VerdictKind::Unknown, UnknownReason::Timeout, {}, {}});
        if (state.stats.lp_solves > cfg.max_lp_solves)
            return finish({VerdictKind::Unknown, UnknownReason::Resource, {}, {}});

        PhaseMap fixed = PhaseMap::free_for(net);
        for (const auto& e : state.stack)
            fixed.set(e.decision.layer, e.decision.neuron, e.decision.phase, PhaseOrigin::Decided);

        const SymbolicBounds bounds = symbolic_analysis(net, nn_box, fixed);
        const InferenceResult inferred = infer_phases(net, bounds, fixed);
        if (inferred.branch_infeasible()) {
            trace.emit("infer_conflict", state,
                       {{"layer", inferred.conflict->first}, {"neuron", inferred.conflict->second}});
            ++state.stats.backtracks;
            just_conditioned = false;
            if (!backtrack(state, {})) return finish({VerdictKind::Safe, {}, {}, {}});
            continue;
        }
        state.stats.inferences += inferred.inferred_count;

        std::vector<ConditioningDecision> decisions = state.decisions();
        for (int i = 1; i <= net.relu_layer_count(); ++i)
            for (int j = 0; j < net.width(i); ++j)
                if (inferred.map.origin_at(i, j) == PhaseOrigin::Inferred)
                    decisions.push_back({i, j, inferred.map.at(i, j), DecisionOrigin::Inferred});

        RelaxedProgram prog = encode(net, query, decisions, weights, amb_box);
        LpOutcome out;
        try {
            out = solve(prog.lp, cfg.lp_tol);
            ++state.stats.lp_solves;
        } catch (const NumericError&) {
            return finish({VerdictKind::Unknown, UnknownReason::Numeric, {}, {}});
        }

        if (out.status == LpStatus::Infeasible) {
            trace.emit("solve", state, {{"lp", "infeasible"}});
            if (state.stack.empty()) return finish({VerdictKind::Safe, {}, {}, {}});

            // The IIS runs against the program without inferred conditionings
            // so that BaseInfeasible certifies structural infeasibility.
            RelaxedProgram iis_prog = encode(net, query, state.decisions(), weights, amb_box);
            std::vector<std::string> candidates;
            for (const auto& e : state.stack)
                for (const auto& t : decision_tags(e.decision)) candidates.push_back(t);
            IisResult iis;
            try {
                iis = extract_iis(iis_prog.lp, candidates, cfg.lp_tol);
                state.stats.lp_solves += iis.solves_used;
            } catch (const NumericError&) {
                return finish({VerdictKind::Unknown, UnknownReason::Numeric, {}, {}});
            }
            if (iis.kind == IisResult::Kind::BaseInfeasible)
                return finish({VerdictKind::Safe, {}, {}, {}});
            const std::vector<std::string> tags =
                iis.kind == IisResult::Kind::Report ? iis.tags : std::vector<std::string>{};
            trace.emit("backtrack", state, {{"iis_size", tags.size()}});
            ++state.stats.backtracks;
            just_conditioned = false;
            if (!backtrack(state, tags)) return finish({VerdictKind::Safe, {}, {}, {}});
            continue;
        }
        if (out.status == LpStatus::Unbounded)
            return finish({VerdictKind::Unknown, UnknownReason::Numeric, {}, {}});

        const auto indets =
            indeterminate_neurons(net, prog, out.solution, cfg.indeterminacy_tol);
        trace.emit("solve", state,
                   {{"lp", "optimal"},
                    {"objective", out.objective_value},
                    {"indets", indets.size()}});
        bool depth_violation = false;
        if (just_conditioned) {
            ++state.stats.depth_checks;
            if (!indets.empty() && indets.front().layer < last_conditioned_layer) {
                depth_violation = true;
                ++state.stats.depth_violations;
                trace.emit("depth_violation", state,
                           {{"layer", indets.front().layer},
                            {"conditioned", last_conditioned_layer}});
            }
        }
        const auto lp_pre = lp_preactivations(net, prog, out.solution);

        if (indets.empty()) {
            const Eigen::VectorXd x = extract_candidate_input(prog, out.solution);
            if (validate_witness(net, query, x)) {
                const Eigen::VectorXd z = forward(net, query.to_network_input(x)).output;
                trace.emit("unsafe", state, {});
                return finish({VerdictKind::Unsafe, {}, x, z});
            }
            // Numeric edge: pin down the neuron farthest from its ReLU branch
            // and keep searching.
            std::set<std::pair<int, int>> conditioned;
            for (const auto& d : decisions) conditioned.insert({d.layer, d.neuron});
            int bl = -1, bn = -1;
            double worst = -1.0;
            for (int i = 1; i <= net.relu_layer_count(); ++i) {
                for (int j = 0; j < net.width(i); ++j) {
                    if (conditioned.count({i, j})) continue;
                    const double r =
                        std::abs(out.solution[prog.slack_var(i, j)] - std::max(0.0, lp_pre[i - 1][j]));
                    if (r > worst) {
                        worst = r;
                        bl = i;
                        bn = j;
                    }
                }
            }
            if (bl < 0) return finish({VerdictKind::Unknown, UnknownReason::Numeric, {}, {}});
            const Phase ph = lp_pre[bl - 1][bn] > 0.0 ? Phase::Active : Phase::Inactive;
            const ActivationPattern pat = prefix_pattern(net, inferred.map, lp_pre, bl - 1);
            const Hyperplane plane =
                ambient_plane(net, query, fold_affine(net, pat, bl - 1), bl, bn);
            trace.emit("forced_condition", state, {{"layer", bl}, {"neuron", bn}});
            ++state.stats.forced_conditions;
            push(bl, bn, ph, plane, !plane.degenerate());
            continue;
        }

        std::vector<Eigen::VectorXd> filtered;
        filtered.reserve(all_samples.size());
        for (const auto& s : all_samples) {
            bool keep = true;
            for (const auto& e : state.stack) {
                if (!e.plane_valid) continue;
                const double v = e.plane.eval(s);
                if (e.decision.phase == Phase::Active ? v < 0.0 : v > 0.0) {
                    keep = false;
                    break;
                }
            }
            if (keep) filtered.push_back(s);
        }

        PickContext ctx{net,      query,       state,    inferred.map, lp_pre,
                        filtered, all_samples, domain,
                        cfg.pick_policy == PickPolicy::RandomChoice ? &rng : nullptr};
        // A depth violation is repaired by conditioning the shallow offender
        // itself; either phase choice (or pruning it) keeps the search sound.
        const std::vector<IndeterminateNeuron> pick_list =
            depth_violation ? std::vector<IndeterminateNeuron>{indets.front()} : indets;
        if (depth_violation) ++state.stats.depth_repairs;
        const auto choice = pick_neuron(pick_list, ctx);
        if (!choice) {
            trace.emit("no_candidate", state, {});
            if (state.stack.empty()) return finish({VerdictKind::Safe, {}, {}, {}});
            ++state.stats.backtracks;
            just_conditioned = false;
            if (!backtrack(state, {})) return finish({VerdictKind::Safe, {}, {}, {}});
            continue;
        }
        trace.emit(depth_violation ? "depth_repair" : "condition", state,
                   {{"layer", choice->layer},
                    {"neuron", choice->neuron},
                    {"phase", choice->phase == Phase::Active ? "on" : "off"}});
        push(choice->layer, choice->neuron, choice->phase, choice->plane, choice->plane_valid);
    }
}

}  // namespace peregrinn
