#pragma once
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace sgx {

using json = nlohmann::json;

// bad config, bad override or unknown subcommand (exit 2)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// the full schema with defaults; a config file may override any subset of it
json default_config();
// file (may be empty) merged over defaults, then key.path=value overrides, then validated
json load_config(const std::string& path, const std::vector<std::string>& sets);
void validate_config(const json& cfg);
std::string sha256_hex(const std::string& text);
std::string run_hash(const std::string& subcommand, const json& cfg);

struct Table {
    std::string name;
    std::vector<std::string> cols;
    std::vector<std::vector<std::string>> rows = {};
    void add(std::vector<std::string> r) { rows.push_back(std::move(r)); }
};
std::string to_csv(const Table& t);
std::string num(double v);

struct Check {
    int criterion = 0;   // 0: module-level invariant, 1..13: acceptance criterion
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Outcome {
    std::vector<Table> tables;
    std::vector<Check> checks;
    bool passed() const;
};

const std::vector<std::string>& subcommands();
Outcome run_subcommand(const std::string& name, const json& cfg);

// writes <root>/<hash>/<table>.csv and run.json; returns the run directory
std::string write_outputs(const std::string& root, const std::string& subcommand, const json& cfg,
                          const Outcome& out, const std::string& started);

}  // namespace sgx
