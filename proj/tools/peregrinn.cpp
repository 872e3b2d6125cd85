// Command-line front end: verify properties of ReLU networks, evaluate
// networks on concrete inputs, and run the random verify-vs-oracle suite.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "peregrinn/properties.hpp"
#include "testkit.hpp"

namespace {

using namespace peregrinn;
using nlohmann::json;

constexpr int kExitSafe = 0;
constexpr int kExitUnsafe = 1;
constexpr int kExitUnknown = 2;
constexpr int kExitError = 3;

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

std::string verdict_name(const Verdict& v) {
    switch (v.kind) {
        case VerdictKind::Safe: return "SAFE";
        case VerdictKind::Unsafe: return "UNSAFE";
        case VerdictKind::Unknown:
            switch (v.reason) {
                case UnknownReason::Timeout: return "UNKNOWN(TIMEOUT)";
                case UnknownReason::Resource: return "UNKNOWN(RESOURCE)";
                case UnknownReason::Numeric: return "UNKNOWN(NUMERIC)";
            }
    }
    return "UNKNOWN";
}

struct QueryRecord {
    std::string label;
    Verdict verdict;
    SearchStats stats;
    double wall_s = 0.0;
    bool witness_revalidated = false;
};

struct VerifyOptions {
    std::string network_path;
    std::string property_path;
    double timeout_s = 1200.0;
    std::uint64_t seed = 42;
    int volume_samples = 2000;
    double lp_tol = 1e-7;
    double indeterminacy_tol = 1e-6;
    int jobs = 1;
    std::string output = "text";
    std::string report_path;
    std::string trace_path;
    std::string dump_lp_path;
    bool no_timestamps = false;
};

int run_verify(const VerifyOptions& opt) {
    const Network net = load_network_file(opt.network_path);
    const PropertyFile prop = load_property_file(opt.property_path);
    std::vector<LabeledQuery> queries = expand_property(prop);

    if (!opt.dump_lp_path.empty()) {
        for (size_t qi = 0; qi < queries.size(); ++qi) {
            const auto& q = queries[qi].query;
            const Box amb = std::holds_alternative<Box>(q.input_set)
                                ? std::get<Box>(q.input_set)
                                : bounding_box(std::get<Polytope>(q.input_set));
            const Eigen::VectorXd w = layer_weights(
                net.layer_count(), default_weight_ratio(net.layer_count()));
            const auto prog = encode(net, q, {}, w, amb);
            const std::string path = queries.size() == 1
                                         ? opt.dump_lp_path
                                         : opt.dump_lp_path + ".q" + std::to_string(qi);
            std::ofstream out(path);
            write_lp_text(out, prog.lp);
        }
    }

    std::vector<QueryRecord> records(queries.size());
    std::atomic<size_t> next{0};
    std::mutex io_mutex;

    auto worker = [&] {
        while (true) {
            const size_t qi = next.fetch_add(1);
            if (qi >= queries.size()) return;
            VerifierConfig cfg;
            cfg.timeout_s = opt.timeout_s;
            cfg.seed = opt.seed + qi;
            cfg.volume_samples = opt.volume_samples;
            cfg.lp_tol = opt.lp_tol;
            cfg.indeterminacy_tol = opt.indeterminacy_tol;
            std::ofstream trace_file;
            if (!opt.trace_path.empty()) {
                const std::string path = queries.size() == 1
                                             ? opt.trace_path
                                             : opt.trace_path + ".q" + std::to_string(qi);
                trace_file.open(path);
                cfg.trace = &trace_file;
            }
            const auto t0 = std::chrono::steady_clock::now();
            QueryRecord rec;
            rec.label = queries[qi].label;
            try {
                const VerificationResult res = verify(net, queries[qi].query, cfg);
                rec.verdict = res.verdict;
                rec.stats = res.stats;
                if (res.verdict.unsafe())
                    rec.witness_revalidated =
                        validate_witness(net, queries[qi].query, res.verdict.witness_input);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "error: query " << rec.label << ": " << e.what() << "\n";
                rec.verdict = {VerdictKind::Unknown, UnknownReason::Numeric, {}, {}};
            }
            rec.wall_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            records[qi] = std::move(rec);
        }
    };

    const auto run_start = std::chrono::steady_clock::now();
    const int jobs = std::max(1, opt.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    const double total_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();

    int safe = 0, unsafe = 0, unknown = 0;
    for (const auto& r : records) {
        if (r.verdict.safe()) ++safe;
        else if (r.verdict.unsafe()) ++unsafe;
        else ++unknown;
    }
    const std::string overall = unsafe > 0 ? "UNSAFE" : unknown > 0 ? "UNKNOWN" : "SAFE";
    const bool robustness = std::holds_alternative<RobustnessSpec>(prop.spec);
    const std::string property_verdict =
        robustness ? (unsafe > 0 ? "NOT_ROBUST" : unknown > 0 ? "UNKNOWN" : "ROBUST") : overall;

    json doc;
    doc["schema"] = 1;
    doc["network"] = opt.network_path;
    doc["property"] = opt.property_path;
    doc["verdict"] = property_verdict;
    json jq = json::array();
    for (size_t qi = 0; qi < records.size(); ++qi) {
        const auto& r = records[qi];
        json item{{"id", qi},
                  {"label", r.label},
                  {"verdict", verdict_name(r.verdict)},
                  {"wall_time_s", opt.no_timestamps ? 0.0 : r.wall_s},
                  {"lp_solves", r.stats.lp_solves},
                  {"backtracks", r.stats.backtracks},
                  {"inferred_fixes", r.stats.inferences}};
        if (r.verdict.unsafe()) {
            item["witness"] = {{"input", vec_to_json(r.verdict.witness_input)},
                               {"output", vec_to_json(r.verdict.witness_output)},
                               {"revalidated", r.witness_revalidated}};
        }
        jq.push_back(std::move(item));
    }
    doc["queries"] = std::move(jq);
    doc["aggregate"] = {{"total", records.size()},
                        {"safe", safe},
                        {"unsafe", unsafe},
                        {"unknown", unknown},
                        {"total_time_s", opt.no_timestamps ? 0.0 : total_s}};
    if (!opt.no_timestamps) {
        const auto now = std::chrono::system_clock::now();
        doc["timestamp"] =
            static_cast<long>(std::chrono::duration_cast<std::chrono::seconds>(
                                  now.time_since_epoch())
                                  .count());
    }

    std::ostringstream body;
    if (opt.output == "json") {
        body << doc.dump(2) << "\n";
    } else {
        for (size_t qi = 0; qi < records.size(); ++qi) {
            const auto& r = records[qi];
            body << r.label << ": " << verdict_name(r.verdict);
            if (!opt.no_timestamps) {
                std::ostringstream t;
                t.precision(3);
                t << std::fixed << r.wall_s;
                body << "  (" << t.str() << " s, " << r.stats.lp_solves << " lp solves, "
                     << r.stats.backtracks << " backtracks)";
            } else {
                body << "  (" << r.stats.lp_solves << " lp solves, " << r.stats.backtracks
                     << " backtracks)";
            }
            body << "\n";
            if (r.verdict.unsafe()) {
                body << "  witness input: " << r.verdict.witness_input.transpose() << "\n";
                body << "  witness output: " << r.verdict.witness_output.transpose() << "\n";
                if (!r.witness_revalidated) body << "  warning: witness failed revalidation\n";
            }
        }
        body << overall;
        if (robustness) body << " (" << property_verdict << ")";
        body << ": " << safe << " safe, " << unsafe << " unsafe, " << unknown << " unknown";
        if (!opt.no_timestamps) {
            std::ostringstream t;
            t.precision(3);
            t << std::fixed << total_s;
            body << " in " << t.str() << " s";
        }
        body << "\n";
    }

    if (!opt.report_path.empty()) {
        std::ofstream out(opt.report_path);
        out << body.str();
    }
    std::cout << body.str();

    if (unsafe > 0) return kExitUnsafe;
    if (unknown > 0) return kExitUnknown;
    return kExitSafe;
}

int run_eval(const std::string& network_path, const std::string& input_csv) {
    const Network net = load_network_file(network_path);
    std::vector<double> vals;
    std::stringstream ss(input_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        vals.push_back(std::stod(item));
    }
    if (static_cast<int>(vals.size()) != net.input_dim())
        throw ShapeError("eval: expected " + std::to_string(net.input_dim()) +
                         " input values, got " + std::to_string(vals.size()));
    Eigen::VectorXd x(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) x[i] = vals[i];
    const Eigen::VectorXd z = forward(net, x).output;
    int argmax = 0;
    for (int i = 1; i < z.size(); ++i)
        if (z[i] > z[argmax]) argmax = i;
    std::cout << "output:";
    for (int i = 0; i < z.size(); ++i) std::cout << " " << z[i];
    std::cout << "\nargmax: " << argmax << "\n";
    return kExitSafe;
}

struct OracleOptions {
    int count = 50;
    int max_layers = 3;
    int max_width = 6;
    int dim = 3;
    std::uint64_t seed = 7;
    double timeout_s = 120.0;
    std::string persist_dir = ".";
    bool inject_mismatch = false;
};

int run_oracle(const OracleOptions& opt) {
    testkit::OracleSuiteConfig cfg;
    cfg.count = opt.count;
    cfg.max_layers = opt.max_layers;
    cfg.max_width = opt.max_width;
    cfg.max_dim = opt.dim;
    cfg.seed = opt.seed;
    cfg.verifier.timeout_s = opt.timeout_s;
    cfg.safe_check_samples = 0;
    cfg.inject_mismatch = opt.inject_mismatch;
    cfg.persist_dir = opt.persist_dir;
    const auto rep = testkit::run_oracle_suite(cfg, &std::cout);
    std::cout << "oracle suite: " << rep.agree << "/" << rep.total << " agree, " << rep.safe
              << " safe, " << rep.unsafe << " unsafe, " << rep.unknown << " unknown ("
              << rep.seconds << " s)\n";
    if (!rep.mismatch_indices.empty()) {
        std::cout << "mismatches at instances:";
        for (int i : rep.mismatch_indices) std::cout << " " << i;
        std::cout << "\n";
        for (const auto& path : rep.persisted)
            std::cout << "fixture persisted: " << path << ".{network,property}.json\n";
    }
    if (rep.witness_failures > 0)
        std::cout << "witness validation failures: " << rep.witness_failures << "\n";
    return rep.all_agree() ? kExitSafe : kExitUnsafe;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"peregrinn: sound and complete verification of ReLU networks"};
    app.require_subcommand(1);

    VerifyOptions vopt;
    CLI::App* v = app.add_subcommand("verify", "verify a property of a network");
    v->add_option("--network", vopt.network_path, "network file (.json or .nnet)")
        ->required()
        ->envname("PEREGRINE_NETWORK");
    v->add_option("--property", vopt.property_path, "property file (json)")
        ->required()
        ->envname("PEREGRINE_PROPERTY");
    v->add_option("--timeout", vopt.timeout_s, "per-query timeout in seconds")
        ->envname("PEREGRINE_TIMEOUT");
    v->add_option("--seed", vopt.seed, "sampling seed")->envname("PEREGRINE_SEED");
    v->add_option("--volume-samples", vopt.volume_samples, "shared volume sample count")
        ->envname("PEREGRINE_VOLUME_SAMPLES");
    v->add_option("--lp-tol", vopt.lp_tol, "lp feasibility tolerance")
        ->envname("PEREGRINE_LP_TOL");
    v->add_option("--indeterminacy-tol", vopt.indeterminacy_tol,
                  "slack excess needed to call a neuron indeterminate");
    v->add_option("--jobs", vopt.jobs, "worker threads across queries")
        ->envname("PEREGRINE_JOBS");
    v->add_option("--output", vopt.output, "report format: text or json")
        ->check(CLI::IsMember({"text", "json"}));
    v->add_option("--report", vopt.report_path, "also write the report to this file");
    v->add_option("--trace", vopt.trace_path, "per-iteration json-lines trace file");
    v->add_option("--dump-lp", vopt.dump_lp_path,
                  "write the unconditioned relaxed program in LP text form");
    v->add_flag("--no-timestamps", vopt.no_timestamps,
                "omit timestamps and zero wall times for byte-stable reports");

    std::string eval_network, eval_input;
    CLI::App* e = app.add_subcommand("eval", "forward-evaluate a network");
    e->add_option("--network", eval_network, "network file")->required();
    e->add_option("--input", eval_input, "comma-separated input vector")->required();

    OracleOptions oopt;
    CLI::App* o = app.add_subcommand("oracle", "random verify-vs-oracle agreement suite");
    o->add_option("--count", oopt.count, "instance count");
    o->add_option("--max-layers", oopt.max_layers, "max layers per random net");
    o->add_option("--max-width", oopt.max_width, "max neurons per layer");
    o->add_option("--dim", oopt.dim, "max input dimension");
    o->add_option("--seed", oopt.seed, "generator seed");
    o->add_option("--timeout", oopt.timeout_s, "per-instance timeout");
    o->add_option("--persist-dir", oopt.persist_dir, "directory for mismatch fixtures");
    o->add_flag("--inject-mismatch", oopt.inject_mismatch,
                "self-test: flip one verdict to exercise mismatch reporting");

    try {
        app.parse(argc, argv);
        if (v->parsed()) return run_verify(vopt);
        if (e->parsed()) return run_eval(eval_network, eval_input);
        if (o->parsed()) return run_oracle(oopt);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitError;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitError;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
