// Command-line front end: worst-case pose search, saved-distribution
// re-evaluation, sigma sweeps, the brute-force grid oracle, the protocol
// stub server, and plot-ready data tables.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "advpose/advpose.hpp"

namespace {

using namespace advpose;

std::array<int, 6> parse_grid(const std::string& text) {
    std::array<int, 6> counts{36, 9, 5, 1, 1, 1};
    if (text.empty()) return counts;
    std::vector<int> parts;
    std::string cur;
    for (char c : text + "x") {
        if (c == 'x' || c == 'X') {
            if (cur.empty()) throw InvalidInput("bad grid spec '" + text + "'");
            parts.push_back(std::stoi(cur));
            cur.clear();
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            cur += c;
        } else {
            throw InvalidInput("bad grid spec '" + text + "'");
        }
    }
    if (parts.size() != 3 && parts.size() != 6)
        throw InvalidInput("grid spec needs 3 (rotations) or 6 counts, got " +
                           std::to_string(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) counts[i] = parts[i];
    return counts;
}

// Config problems (missing file, parse failures, inconsistent values) are
// usage errors for the CLI: exit code 2.
AttackConfig load_config(const std::string& path) {
    try {
        return AttackConfig::load(path);
    } catch (const Error& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
}

std::vector<double> parse_scales(const std::string& text) {
    std::vector<double> scales;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) scales.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (scales.empty()) throw InvalidInput("empty scale list");
    return scales;
}

int cmd_attack(const std::string& config_path, long seed_override, int budget_override,
               const std::string& output_override, int threads_override) {
    AttackConfig cfg = load_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (budget_override > 0) cfg.budget = budget_override;
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (threads_override > 0) cfg.threads = threads_override;

    AttackOutcome out = run_attack(cfg);
    write_attack_outputs(out, cfg);

    nlohmann::json summary;
    summary["clean_correct"] = out.report.clean_correct;
    summary["asr_thetastar"] = out.report.asr_thetastar;
    summary["asr_pstar"] = out.report.asr_pstar;
    summary["asr_random"] = out.report.asr_random;
    summary["best_isp"] = out.run.best_isp;
    summary["theta_star"] = pose_to_json(out.report.theta_star);
    summary["output_dir"] = cfg.output_dir;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& dist_path,
             const std::string& protocol, int n, long seed) {
    AttackConfig cfg = load_config(config_path);
    Victim victim = make_victim(cfg);
    SearchDistribution<6> dist = load_distribution(dist_path);

    nlohmann::json out;
    out["protocol"] = protocol;
    if (protocol == "pstar") {
        out["asr"] = evaluate_pstar(victim, dist, n, static_cast<std::uint64_t>(seed));
        out["n"] = n;
    } else if (protocol == "random") {
        out["asr"] = evaluate_random(victim, n, static_cast<std::uint64_t>(seed));
        out["n"] = n;
    } else if (protocol == "thetastar") {
        auto [miss, pose] = evaluate_thetastar(victim, dist);
        out["misclassified"] = miss;
        out["pose"] = pose_to_json(pose);
    } else if (protocol == "clean") {
        out["clean_correct"] = !victim.misclassified(victim.canonical_pose);
        out["pose"] = pose_to_json(victim.canonical_pose);
    } else {
        throw InvalidInput("unknown protocol '" + protocol +
                           "' (expected pstar | thetastar | random | clean)");
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& dist_path,
              const std::string& scales_text, int n, long seed, const std::string& out_path) {
    AttackConfig cfg = load_config(config_path);
    Victim victim = make_victim(cfg);
    SearchDistribution<6> dist = load_distribution(dist_path);
    auto rows = sigma_sweep(victim, dist, parse_scales(scales_text), n,
                            static_cast<std::uint64_t>(seed));

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw Error("cannot open for writing: " + out_path);
        os = &file;
    }
    *os << "scale\tasr\n";
    for (const auto& [scale, asr] : rows) *os << scale << "\t" << asr << "\n";
    return 0;
}

int cmd_oracle(const std::string& config_path, const std::string& grid_text, long cell_budget,
               const std::string& dump_path) {
    AttackConfig cfg = load_config(config_path);
    Victim victim = make_victim(cfg);
    GridSpec spec;
    spec.counts = parse_grid(grid_text);
    if (cell_budget > 0) spec.cell_budget = cell_budget;
    OracleResult res = brute_force_oracle(victim, spec, !dump_path.empty());

    if (!dump_path.empty()) {
        nlohmann::json dump;
        dump["best_pose"] = pose_to_json(res.best_pose);
        dump["best_isp"] = res.best_isp;
        nlohmann::json cells = nlohmann::json::array();
        for (const GridCell& c : res.cells)
            cells.push_back({{"pose", pose_to_json(c.pose)},
                             {"isp", c.isp},
                             {"argmax", c.argmax}});
        dump["cells"] = cells;
        std::ofstream f(dump_path);
        if (!f) throw Error("cannot open for writing: " + dump_path);
        f << dump.dump() << "\n";
    }

    nlohmann::json out;
    out["best_pose"] = pose_to_json(res.best_pose);
    out["best_isp"] = res.best_isp;
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_stub_server(int port, int dim) {
    StubServerOptions opt;
    opt.embed_dim = dim;
    StubServer server(opt);
    std::cerr << "stub server listening on port " << port << " (dim " << dim << ")\n";
    server.run(port);
    return 0;
}

int cmd_plot(const std::string& log_path, const std::string& dump_path,
             const std::string& out_path) {
    if (log_path.empty() == dump_path.empty())
        throw InvalidInput("pass exactly one of --log (convergence) or --dump (landscape)");

    std::ofstream out(out_path);
    if (!out) throw Error("cannot open for writing: " + out_path);

    if (!log_path.empty()) {
        std::ifstream in(log_path);
        if (!in) throw Error("cannot open: " + log_path);
        out << "iteration\tbest_isp\tmean_isp\tbest_nat\tsigma\n";
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(log_path + ":" + std::to_string(line_no) + ": " + e.what());
            }
            out << j.at("iteration").get<long>() << "\t" << j.at("best_isp").get<double>() << "\t"
                << j.at("mean_isp").get<double>() << "\t" << j.at("best_nat").get<double>() << "\t"
                << j.at("sigma").get<double>() << "\n";
        }
    } else {
        std::ifstream in(dump_path);
        if (!in) throw Error("cannot open: " + dump_path);
        nlohmann::json dump;
        try {
            in >> dump;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(dump_path + ": " + e.what());
        }
        out << "yaw\tpitch\troll\tdx\tdy\tscale\tisp\targmax\n";
        for (const auto& cell : dump.at("cells")) {
            PoseParams p = pose_from_json(cell.at("pose"));
            out << p.yaw << "\t" << p.pitch << "\t" << p.roll << "\t" << p.dx << "\t" << p.dy
                << "\t" << p.scale << "\t" << cell.at("isp").get<double>() << "\t"
                << cell.at("argmax").get<int>() << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Worst-case rigid 3D transformation search against pose-sensitive scorers"};
    app.require_subcommand(1);

    std::string config_path, dist_path, protocol = "pstar", scales = "1,2,4,8";
    std::string grid_text, dump_path, log_path, out_path, output_dir;
    long seed = 0, cell_budget = 0;
    int n = 10, budget = 0, threads = 0, port = 8711, dim = 64;
    long seed_override = -1;

    auto* attack = app.add_subcommand("attack", "Optimize an adversarial pose distribution");
    attack->add_option("--config", config_path, "attack config file")->required();
    attack->add_option("--seed", seed_override, "override [run].seed");
    attack->add_option("--budget", budget, "override [run].budget");
    attack->add_option("--output", output_dir, "override [run].output_dir");
    attack->add_option("--threads", threads, "override [run].threads");

    auto* eval = app.add_subcommand("eval", "Re-evaluate a saved distribution under a protocol");
    eval->add_option("--config", config_path, "attack config file")->required();
    eval->add_option("--dist", dist_path, "saved distribution JSON")->required();
    eval->add_option("--protocol", protocol, "pstar | thetastar | random | clean");
    eval->add_option("--n", n, "samples for pstar/random");
    eval->add_option("--seed", seed, "sampling seed");

    auto* sweep = app.add_subcommand("sweep-sigma", "ASR as the sampling spread scales");
    sweep->add_option("--config", config_path, "attack config file")->required();
    sweep->add_option("--dist", dist_path, "saved distribution JSON")->required();
    sweep->add_option("--scales", scales, "comma-separated scale factors");
    sweep->add_option("--n", n, "samples per scale");
    sweep->add_option("--seed", seed, "sampling seed");
    sweep->add_option("--out", out_path, "write TSV here instead of stdout");

    auto* oracle = app.add_subcommand("oracle", "Brute-force grid search over the bounds box");
    oracle->add_option("--config", config_path, "attack config file")->required();
    oracle->add_option("--grid", grid_text, "counts, e.g. 36x9x5 or 36x9x5x1x1x1");
    oracle->add_option("--cell-budget", cell_budget, "refuse grids above this many cells");
    oracle->add_option("--dump", dump_path, "write the full grid dump JSON here");

    auto* stub = app.add_subcommand("stub-server", "Run the protocol conformance stub server");
    stub->add_option("--port", port, "listen port");
    stub->add_option("--dim", dim, "embedding dimension");

    auto* plot = app.add_subcommand("plot", "Emit plot-ready data tables");
    plot->add_option("--log", log_path, "run_log.jsonl for a convergence table");
    plot->add_option("--dump", dump_path, "oracle dump JSON for a landscape table");
    plot->add_option("--out", out_path, "output TSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;    // usage errors exit 2, --help exits 0
    }

    try {
        if (attack->parsed())
            return cmd_attack(config_path, seed_override, budget, output_dir, threads);
        if (eval->parsed()) return cmd_eval(config_path, dist_path, protocol, n, seed);
        if (sweep->parsed()) return cmd_sweep(config_path, dist_path, scales, n, seed, out_path);
        if (oracle->parsed()) return cmd_oracle(config_path, grid_text, cell_budget, dump_path);
        if (stub->parsed()) return cmd_stub_server(port, dim);
        if (plot->parsed()) return cmd_plot(log_path, dump_path, out_path);
    } catch (const InvalidInput& e) {
        std::cerr << "error (usage): " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
