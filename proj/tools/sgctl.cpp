#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "experiments.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

std::string usage() {
    std::string s = "usage: sgctl <subcommand> --config <path> [--set key=value ...] [--out dir]\nsubcommands:";
    for (auto& c : sgx::subcommands()) s += " " + c;
    return s + "\nworkers: SGCTL_WORKERS=<n> (default: all cores)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sine-Gordon scale-decomposition experiments"};
    std::string sub, config, out = "out";
    std::vector<std::string> sets;
    bool dump = false;
    app.add_option("subcommand", sub, "experiment to run")->required();
    app.add_option("--config", config, "JSON config file (defaults apply to missing keys)");
    app.add_option("--set", sets, "override a config key, e.g. --set mc.n_traj=500");
    app.add_option("--out", out, "output root");
    app.add_flag("--dump-config", dump, "print the resolved config and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << usage();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << usage();
        return 2;
    }
    bool known = false;
    for (auto& c : sgx::subcommands()) known = known || c == sub;
    if (!known) {
        std::cerr << "error: unknown subcommand '" << sub << "'\n" << usage();
        return 2;
    }

    if (const char* w = std::getenv("SGCTL_WORKERS")) {
        int n = std::atoi(w);
        if (n < 1) {
            std::cerr << "error: SGCTL_WORKERS must be a positive integer\n";
            return 2;
        }
#ifdef _OPENMP
        omp_set_num_threads(n);
#endif
    }

    sgx::json cfg;
    try {
        cfg = sgx::load_config(config, sets);
    } catch (const sgx::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n" << usage();
        return 2;
    }
    if (dump) {
        std::cout << cfg.dump(2) << "\n";
        return 0;
    }

    auto started = std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
        std::chrono::system_clock::now().time_since_epoch()).count());
    sgx::Outcome o;
    try {
        o = sgx::run_subcommand(sub, cfg);
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 1;
    }
    std::string dir = sgx::write_outputs(out, sub, cfg, o, started);
    for (auto& c : o.checks) {
        std::string tag = c.criterion ? "criterion " + std::to_string(c.criterion) : "invariant";
        std::printf("%s [%s] %s: %s\n", c.pass ? "PASS" : "FAIL", tag.c_str(), c.name.c_str(), c.detail.c_str());
    }
    std::printf("results: %s\n", dir.c_str());
    if (!o.passed()) {
        for (auto& c : o.checks)
            if (!c.pass) std::fprintf(stderr, "violated: %s (%s)\n", c.name.c_str(), c.detail.c_str());
        return 1;
    }
    return 0;
}
