#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>
#include <set>

#include "peregrinn/search.hpp"
#include "testkit.hpp"

using namespace peregrinn;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
    Eigen::VectorXd v(static_cast<int>(vals.size()));
    int i = 0;
    for (double x : vals) v[i++] = x;
    return v;
}

Network identity_net() {
    Layer l;
    l.weights = Eigen::MatrixXd::Identity(1, 1);
    l.bias = Eigen::VectorXd::Zero(1);
    return Network({l}, 1);
}

// {z : z_0 >= thresh}
Polytope output_at_least(int dim, double thresh) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, dim);
    a(0, 0) = -1.0;
    return Polytope(a, vec({-thresh}));
}

VerificationQuery unit_query(double lo, double hi, double thresh) {
    VerificationQuery q;
    q.input_set = Box(vec({lo}), vec({hi}));
    q.violation_set = output_at_least(1, thresh);
    return q;
}

VerifierConfig fast_cfg() {
    VerifierConfig cfg;
    cfg.timeout_s = 60.0;
    cfg.volume_samples = 400;
    return cfg;
}

}  // namespace

TEST_CASE("identity net: unreachable violation is safe") {
    const auto res = verify(identity_net(), unit_query(0.0, 1.0, 2.0), fast_cfg());
    CHECK(res.verdict.safe());
}

TEST_CASE("identity net: reachable violation yields a validated witness") {
    const auto q = unit_query(0.0, 1.0, 0.5);
    const auto res = verify(identity_net(), q, fast_cfg());
    REQUIRE(res.verdict.unsafe());
    CHECK(res.verdict.witness_input[0] >= 0.5 - 1e-6);
    CHECK(res.verdict.witness_input[0] <= 1.0 + 1e-6);
    CHECK(validate_witness(identity_net(), q, res.verdict.witness_input));
}

TEST_CASE("validate_witness checks every query component") {
    const auto q = unit_query(0.0, 1.0, 0.5);
    CHECK(validate_witness(identity_net(), q, vec({0.75})));
    CHECK_FALSE(validate_witness(identity_net(), q, vec({0.25})));  // output misses
    CHECK_FALSE(validate_witness(identity_net(), q, vec({1.5})));   // outside the box

    VerificationQuery coupled = q;
    coupled.violation_set = Polytope(Eigen::MatrixXd::Zero(0, 1), Eigen::VectorXd(0));
    CoupledConstraint c;
    c.input_coeffs = vec({1.0});
    c.output_coeffs = vec({1.0});
    c.rhs = 1.0;  // x + z <= 1
    coupled.coupled.push_back(c);
    CHECK(validate_witness(identity_net(), coupled, vec({0.4})));
    CHECK_FALSE(validate_witness(identity_net(), coupled, vec({0.8})));
}

TEST_CASE("verdicts agree with the exhaustive oracle on a mixed mini suite") {
    testkit::OracleSuiteConfig cfg;
    cfg.count = 50;
    cfg.seed = 99;
    cfg.verifier = fast_cfg();
    cfg.safe_check_samples = 2000;
    const auto rep = testkit::run_oracle_suite(cfg, nullptr);
    CHECK(rep.agree == rep.total);
    CHECK(rep.witness_failures == 0);
    CHECK(rep.safe_sampling_failures == 0);
    CHECK(rep.safe > 5);
    CHECK(rep.unsafe > 5);
}

TEST_CASE("pre-mapped queries agree with the oracle") {
    std::mt19937_64 rng(7001);
    int ran = 0;
    while (ran < 12) {
        const Network net = testkit::random_network(rng, 2, 4, 2);
        VerificationQuery q = testkit::random_query(rng, net, rng() & 1);
        // Ambient space is one dimension larger; the pre-map projects and
        // shifts it into the network's input space.
        const int amb = net.input_dim() + 1;
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(net.input_dim(), amb);
        for (int r = 0; r < net.input_dim(); ++r) {
            h(r, r) = testkit::uniform(rng, 0.5, 1.5);
            h(r, amb - 1) = testkit::uniform(rng, -0.3, 0.3);
        }
        Eigen::VectorXd d(net.input_dim());
        for (int r = 0; r < d.size(); ++r) d[r] = testkit::uniform(rng, -0.2, 0.2);
        q.input_map = AffineMap(h, d);
        q.input_set = Box(Eigen::VectorXd::Constant(amb, -1.0), Eigen::VectorXd::Constant(amb, 1.0));
        ++ran;
        const auto res = verify(net, q, fast_cfg());
        const auto oracle = testkit::exhaustive_pattern_oracle(net, q);
        REQUIRE(res.verdict.kind != VerdictKind::Unknown);
        CHECK(res.verdict.unsafe() == oracle.unsafe);
        if (res.verdict.unsafe()) CHECK(validate_witness(net, q, res.verdict.witness_input));
    }
}

TEST_CASE("verify is deterministic for a fixed seed") {
    std::mt19937_64 rng(303);
    for (int t = 0; t < 10; ++t) {
        const auto inst = testkit::random_instance(rng, 3, 5, 2);
        const auto a = verify(inst.net, inst.query, fast_cfg());
        const auto b = verify(inst.net, inst.query, fast_cfg());
        CHECK(a.verdict.kind == b.verdict.kind);
        CHECK(a.stats.lp_solves == b.stats.lp_solves);
        CHECK(a.stats.backtracks == b.stats.backtracks);
        if (a.verdict.unsafe()) CHECK(a.verdict.witness_input == b.verdict.witness_input);
    }
}

TEST_CASE("pick_neuron: smallest-volume side of a single candidate") {
    // One straddling neuron with boundary x = 0.7 over [0,1]: the active
    // region holds 30% of the volume.
    Layer l;
    l.weights = Eigen::MatrixXd::Constant(1, 1, 1.0);
    l.bias = Eigen::VectorXd::Constant(1, -0.7);
    const Network net({l}, 1);
    VerificationQuery q = unit_query(0.0, 1.0, -10.0);

    SearchState state;
    const PhaseMap phases = PhaseMap::free_for(net);
    const std::vector<Eigen::VectorXd> preacts;
    const auto samples = sample_box(std::get<Box>(q.input_set), 2000, 11);
    const Polytope domain = to_polytope(std::get<Box>(q.input_set));
    const PickContext ctx{net, q, state, phases, preacts, samples, samples, domain, nullptr};
    const auto choice = pick_neuron({{1, 0, 0.5}}, ctx);
    REQUIRE(choice.has_value());
    CHECK(choice->layer == 1);
    CHECK(choice->neuron == 0);
    CHECK(choice->phase == Phase::Active);
}

TEST_CASE("pick_neuron: inter-layer priority beats volume") {
    Layer l1;
    l1.weights = Eigen::MatrixXd::Constant(1, 1, 1.0);
    l1.bias = Eigen::VectorXd::Constant(1, -0.99);  // tiny active sliver
    Layer l2;
    l2.weights = Eigen::MatrixXd::Constant(1, 1, 1.0);
    l2.bias = Eigen::VectorXd::Constant(1, -0.0001);
    const Network net({l1, l2}, 1);
    VerificationQuery q = unit_query(0.0, 1.0, -10.0);

    SearchState state;
    const PhaseMap phases = PhaseMap::free_for(net);
    std::vector<Eigen::VectorXd> preacts{vec({0.3}), vec({0.2})};
    const auto samples = sample_box(std::get<Box>(q.input_set), 2000, 13);
    const Polytope domain = to_polytope(std::get<Box>(q.input_set));
    const PickContext ctx{net, q, state, phases, preacts, samples, samples, domain, nullptr};
    // Both layers indeterminate: layer 1 must win even with a larger volume.
    const auto choice = pick_neuron({{1, 0, 0.2}, {2, 0, 0.9}}, ctx);
    REQUIRE(choice.has_value());
    CHECK(choice->layer == 1);
}

TEST_CASE("pick_neuron: candidates contradicting same-layer decisions are pruned") {
    // Neuron 0 boundary x = 0.5, neuron 1 boundary x = 0.4 (flipped normal).
    Layer l;
    l.weights = Eigen::MatrixXd::Zero(2, 1);
    l.weights(0, 0) = 1.0;
    l.weights(1, 0) = -1.0;
    l.bias = vec({-0.5, 0.4});
    const Network net({l}, 1);
    VerificationQuery q = unit_query(0.0, 1.0, -10.0);

    SearchState state;
    StackEntry decided;
    decided.decision = {1, 0, Phase::Active, DecisionOrigin::Search};  // x >= 0.5
    decided.mark_tried(Phase::Active);
    state.stack.push_back(decided);

    PhaseMap phases = PhaseMap::free_for(net);
    phases.set(1, 0, Phase::Active, PhaseOrigin::Decided);
    const std::vector<Eigen::VectorXd> preacts;
    const auto samples = sample_box(std::get<Box>(q.input_set), 2000, 17);
    const Polytope domain = to_polytope(std::get<Box>(q.input_set));
    const PickContext ctx{net, q, state, phases, preacts, samples, samples, domain, nullptr};
    // Candidate (1,1,Active) needs -x + 0.4 >= 0, impossible beside x >= 0.5.
    const auto choice = pick_neuron({{1, 1, 0.3}}, ctx);
    REQUIRE(choice.has_value());
    CHECK(choice->neuron == 1);
    CHECK(choice->phase == Phase::Inactive);
}

TEST_CASE("backtrack: flip, pop, exhaustion") {
    SearchState state;
    auto entry = [](int layer, int neuron, Phase p, bool tried_both) {
        StackEntry e;
        e.decision = {layer, neuron, p, DecisionOrigin::Search};
        e.mark_tried(p);
        if (tried_both) {
            e.mark_tried(Phase::Active);
            e.mark_tried(Phase::Inactive);
        }
        return e;
    };

    // Flip in place when the other phase is untried.
    state.stack = {entry(1, 0, Phase::Active, false)};
    REQUIRE(backtrack(state, decision_tags({1, 0, Phase::Active, DecisionOrigin::Search})));
    CHECK(state.stack.size() == 1);
    CHECK(state.stack[0].decision.phase == Phase::Inactive);
    CHECK(state.stack[0].exhausted());

    // Exhausted everywhere: the stack empties.
    state.stack = {entry(1, 0, Phase::Active, true), entry(1, 1, Phase::Active, true)};
    CHECK_FALSE(backtrack(state, decision_tags({1, 0, Phase::Active, DecisionOrigin::Search})));
    CHECK(state.stack.empty());

    // The IIS names a shallow entry: deeper entries are discarded even if
    // they still had untried phases.
    state.stack = {entry(1, 0, Phase::Active, false), entry(2, 0, Phase::Active, false),
                   entry(2, 1, Phase::Inactive, false)};
    REQUIRE(backtrack(state, decision_tags({1, 0, Phase::Active, DecisionOrigin::Search})));
    CHECK(state.stack.size() == 1);
    CHECK(state.stack[0].decision.neuron == 0);
    CHECK(state.stack[0].decision.phase == Phase::Inactive);

    // No usable tags: fall back to the top entry.
    state.stack = {entry(1, 0, Phase::Active, false), entry(2, 0, Phase::Active, false)};
    REQUIRE(backtrack(state, {}));
    CHECK(state.stack.size() == 2);
    CHECK(state.stack[1].decision.phase == Phase::Inactive);
}

TEST_CASE("backtrack never revisits a stack assignment") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 30; ++trial) {
        const int pool = 4;  // neurons (1,0)...(1,3)
        SearchState state;
        std::set<std::string> visited;
        auto serialize = [&] {
            std::string s;
            for (const auto& e : state.stack) {
                s += std::to_string(e.decision.neuron);
                s += e.decision.phase == Phase::Active ? '+' : '-';
            }
            return s;
        };
        visited.insert(serialize());
        long steps = 0;
        while (steps++ < 200) {
            const bool can_push = static_cast<int>(state.stack.size()) < pool;
            const bool do_push = can_push && (state.stack.empty() || (rng() & 1));
            if (do_push) {
                std::set<int> used;
                for (const auto& e : state.stack) used.insert(e.decision.neuron);
                int neuron = static_cast<int>(rng() % pool);
                while (used.count(neuron)) neuron = (neuron + 1) % pool;
                StackEntry e;
                e.decision = {1, neuron, rng() & 1 ? Phase::Active : Phase::Inactive,
                              DecisionOrigin::Search};
                e.mark_tried(e.decision.phase);
                state.stack.push_back(e);
            } else {
                // Random subset of current tags as the "IIS".
                std::vector<std::string> tags;
                for (const auto& e : state.stack)
                    if (rng() & 1)
                        for (const auto& t : decision_tags(e.decision)) tags.push_back(t);
                if (!backtrack(state, tags)) break;
            }
            const std::string s = serialize();
            CHECK(visited.insert(s).second);
        }
    }
}

TEST_CASE("timeout and lp budget produce unknown verdicts") {
    std::mt19937_64 rng(777);
    const Network net = testkit::random_network(rng, 2, 16, 3, 1.0);
    const VerificationQuery q = testkit::random_query(rng, net, false);

    VerifierConfig cfg = fast_cfg();
    cfg.timeout_s = 0.2;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = verify(net, q, cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (res.verdict.kind == VerdictKind::Unknown) {
        CHECK(res.verdict.reason == UnknownReason::Timeout);
        CHECK(wall < 0.4);  // honored within 2x
    }

    VerifierConfig tiny = fast_cfg();
    tiny.max_lp_solves = 2;
    const auto res2 = verify(net, q, tiny);
    if (res2.verdict.kind == VerdictKind::Unknown)
        CHECK(res2.verdict.reason == UnknownReason::Resource);
}

TEST_CASE("trace log captures iteration events as json lines") {
    std::ostringstream trace;
    VerifierConfig cfg = fast_cfg();
    cfg.trace = &trace;
    std::mt19937_64 rng(888);
    const auto inst = testkit::random_instance(rng, 2, 4, 2);
    verify(inst.net, inst.query, cfg);
    const std::string text = trace.str();
    CHECK(text.find("\"iter\"") != std::string::npos);
    CHECK(text.find("\"event\"") != std::string::npos);
    // Every line parses as a standalone json object.
    std::istringstream lines(text);
    std::string line;
    int parsed = 0;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        CHECK_NOTHROW(nlohmann::json::parse(line));
        ++parsed;
    }
    CHECK(parsed >= 1);
}
