// Command-line front end: dispatches the subcommands onto the library
// runners and emits report JSON / CSV artifacts.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "constrank/runner.hpp"

using namespace constrank;

namespace {

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("CONSTRANK_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

void emit_excess_csv(const json& report, const std::string& dir) {
    std::string csv = "center,radius,excess\n";
    int idx = 0;
    for (const auto& center : report.at("centers")) {
        for (const auto& entry : center.at("scan")) {
            csv += std::to_string(idx) + "," + entry.at("radius").dump() + "," +
                   entry.at("excess").dump() + "\n";
        }
        ++idx;
    }
    write_text(dir + "/excess.csv", csv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constrank: constant-rank operator and linear-growth minimization lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    int64_t seed_flag = -1;
    int threads_flag = 0;

    const std::vector<std::string> commands = {
        "rank-check",       "potential",      "project",        "decompose",
        "minimize",         "verify-caccioppoli", "verify-poincare", "verify-korn",
        "excess-scan",      "harmonic-approx", "batch"};
    std::vector<CLI::App*> subs;
    for (const auto& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed_flag, "override the config seed");
        sub->add_option("--threads", threads_flag,
                        "bound on internal parallelism (env CONSTRANK_THREADS as fallback)");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);
    std::string command;
    for (size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) command = commands[i];

    try {
        json config = load_config(config_path);
        int threads = resolve_threads(threads_flag);
        (void)threads;  // execution is sequential; the bound is recorded only

        if (command == "batch") {
            if (seed_flag >= 0)
                for (auto& r : config.at("runs")) r["seed"] = static_cast<uint64_t>(seed_flag);
            BatchSummary summary = batch(config);
            json full = summary.body();
            write_text(out_dir + "/report.json", full.dump(2) + "\n");
            write_text(out_dir + "/matrix.csv", batch_csv(summary));
            std::cout << (summary.pass ? "PASS" : "FAIL") << " " << summary.pass_count << "/"
                      << summary.records.size() << " runs\n";
            return summary.pass ? 0 : 1;
        }

        config["command"] = command;
        if (seed_flag >= 0) config["seed"] = static_cast<uint64_t>(seed_flag);
        RunRecord record = run(config);
        write_text(out_dir + "/report.json", record.full().dump(2) + "\n");
        if (command == "excess-scan") emit_excess_csv(record.body.at("report"), out_dir);
        std::cout << (record.pass ? "PASS" : "FAIL") << " " << command << " (report in "
                  << out_dir << "/report.json)\n";
        return record.pass ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
