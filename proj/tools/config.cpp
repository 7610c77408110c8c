#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "experiments.hpp"

#ifndef SG_VERSION
#define SG_VERSION "unknown"
#endif

namespace sgx {

json default_config() {
    return json::parse(R"({
  "grid": {"n_side": 64, "side_length": 16.0, "mass": 1.0},
  "schedule": {"knots": 64, "t_min": 0.01, "t_max": 0.0},
  "physics": {"beta_sq": 6.283185307179586, "lambda": 0.1, "cutoff_radius": 4.0},
  "mc": {"n_traj": 2000, "master_seed": 1},
  "fine_grid": {"n_side": 256, "side_length": 64.0},
  "decompose_check": {"random_fields": 20, "energy_drifts": 100, "fd_delta": 0.001,
                      "young_t": [0.5, 1.0, 4.0, 16.0]},
  "wick_check": {"split_knot": 32},
  "lp_scaling": {"n_traj": 1000, "besov_n_traj": 200, "besov_knots": 8},
  "bd_solve": {"psi_radius": 2.0, "psi_amp": 0.5, "kappa": 0.5, "lambda_alt": 0.05,
               "setting_traj": 1000, "opt_traj": 300, "opt_iter": 8, "method": "adjoint",
               "gain_bound": 50.0, "el_traj": 300, "profile_traj": 500, "dp_split": 32,
               "window_lo": 4.0, "window_hi": 0.0},
  "observables": {"free_traj": 4000, "coupling_traj": 4000, "reweight_traj": 4000,
                  "strong_lambda": 0.5, "strong_traj": 4000, "opt_traj": 300, "opt_iter": 4,
                  "psi_radius": 1.0, "kappa": 0.5, "rp_radius": 1.0,
                  "decay_n_side": 128, "decay_side_length": 32.0, "decay_radii": [1.0, 2.0, 4.0],
                  "decay_traj": 200},
  "semiclassical": {"n_side": 32, "side_length": 8.0, "cutoff_radius": 2.0, "psi_radius": 1.0,
                    "psi_amp": 0.5, "kappa": 0.3, "hbar": [0.4, 0.2, 0.1, 0.05],
                    "n_traj": 20000, "tol": 1e-8}
})");
}

namespace {

// overlay src on dst; every key must exist in dst and keep its kind
void overlay(json& dst, const json& src, const std::string& where) {
    if (!src.is_object()) throw ConfigError("config block '" + where + "' must be an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!dst.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        json& d = dst[it.key()];
        const json& v = it.value();
        if (d.is_object()) {
            overlay(d, v, key);
        } else if (d.is_number_integer()) {
            if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
            d = v;
        } else if (d.is_number()) {
            if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
            d = v.get<double>();
        } else if (d.is_array()) {
            if (!v.is_array()) throw ConfigError("config key '" + key + "' must be a list");
            json arr = json::array();
            for (auto& e : v) {
                if (!e.is_number()) throw ConfigError("config key '" + key + "' must hold numbers");
                arr.push_back(e.get<double>());
            }
            d = arr;
        } else if (d.is_string()) {
            if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
            d = v;
        }
    }
}

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

bool pow2(long v) { return v >= 8 && (v & (v - 1)) == 0; }

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

json load_config(const std::string& path, const std::vector<std::string>& sets) {
    json cfg = default_config();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file '" + path + "'");
        json file;
        try {
            file = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file '" + path + "' is not valid: " + e.what());
        }
        overlay(cfg, file, "");
    }
    for (const auto& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + s + "' is not key=value");
        std::string key = s.substr(0, eq);
        json patch = parse_value(s.substr(eq + 1));
        std::vector<std::string> parts;
        std::stringstream ss(key);
        for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
        for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
        overlay(cfg, patch, "");
    }
    validate_config(cfg);
    return cfg;
}

void validate_config(const json& c) {
    const double pi = 3.14159265358979323846;
    auto& g = c["grid"];
    require(pow2(g["n_side"].get<long>()), "grid.n_side must be a power of two >= 8");
    require(g["side_length"].get<double>() > 0, "grid.side_length must be positive");
    require(g["mass"].get<double>() > 0, "grid.mass must be positive");
    require(pow2(c["fine_grid"]["n_side"].get<long>()), "fine_grid.n_side must be a power of two >= 8");
    require(c["fine_grid"]["side_length"].get<double>() > 0, "fine_grid.side_length must be positive");
    auto& s = c["schedule"];
    require(s["knots"].get<int>() >= 2, "schedule.knots must be >= 2");
    require(s["t_min"].get<double>() > 0, "schedule.t_min must be positive");
    require(s["t_max"].get<double>() == 0 || s["t_max"].get<double>() > s["t_min"].get<double>(),
            "schedule.t_max must be 0 (auto) or exceed t_min");
    auto& p = c["physics"];
    double b2 = p["beta_sq"].get<double>();
    require(b2 > 0 && b2 < 4 * pi, "physics.beta_sq must lie in (0, 4 pi)");
    require(p["cutoff_radius"].get<double>() > 0, "physics.cutoff_radius must be positive");
    require(p["cutoff_radius"].get<double>() <= g["side_length"].get<double>() / 4 + 1e-12,
            "physics.cutoff_radius must not exceed side_length / 4");
    require(c["mc"]["n_traj"].get<long>() >= 20, "mc.n_traj must be >= 20");
    require(c["mc"]["master_seed"].get<long>() >= 0, "mc.master_seed must be nonnegative");
    auto m = c["bd_solve"]["method"].get<std::string>();
    require(m == "adjoint" || m == "spsa" || m == "coordinate_fd",
            "bd_solve.method must be adjoint, spsa or coordinate_fd");
    int knots = s["knots"].get<int>();
    require(c["bd_solve"]["dp_split"].get<int>() >= 0 && c["bd_solve"]["dp_split"].get<int>() < knots,
            "bd_solve.dp_split must index a knot");
    require(c["wick_check"]["split_knot"].get<int>() >= 0 && c["wick_check"]["split_knot"].get<int>() < knots,
            "wick_check.split_knot must index a knot");
    auto& h = c["semiclassical"]["hbar"];
    require(h.size() >= 3, "semiclassical.hbar needs at least 3 values");
    for (size_t i = 0; i < h.size(); ++i) {
        require(h[i].get<double>() > 0, "semiclassical.hbar values must be positive");
        if (i) require(h[i].get<double>() < h[i - 1].get<double>(), "semiclassical.hbar must decrease");
    }
    require(pow2(c["semiclassical"]["n_side"].get<long>()), "semiclassical.n_side must be a power of two >= 8");
    require(pow2(c["observables"]["decay_n_side"].get<long>()), "observables.decay_n_side must be a power of two >= 8");
    require(c["observables"]["decay_radii"].size() >= 3, "observables.decay_radii needs at least 3 radii");
    require(c["semiclassical"]["tol"].get<double>() > 0, "semiclassical.tol must be positive");
}

std::string sha256_hex(const std::string& text) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string run_hash(const std::string& subcommand, const json& cfg) {
    return sha256_hex(subcommand + "\n" + cfg.dump()).substr(0, 16);
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string to_csv(const Table& t) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) {
            if (ch == '"') q += '"';
            q += ch;
        }
        return q + "\"";
    };
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
        for (size_t i = 0; i < r.size(); ++i) {
            if (i) out += ',';
            out += quote(r[i]);
        }
        out += "\r\n";
    };
    line(t.cols);
    for (auto& r : t.rows) line(r);
    return out;
}

bool Outcome::passed() const {
    for (auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string write_outputs(const std::string& root, const std::string& subcommand, const json& cfg,
                          const Outcome& out, const std::string& started) {
    namespace fs = std::filesystem;
    fs::path dir = fs::path(root) / run_hash(subcommand, cfg);
    fs::create_directories(dir);
    json tables = json::array();
    for (auto& t : out.tables) {
        std::ofstream f(dir / (t.name + ".csv"), std::ios::binary);
        f << to_csv(t);
        tables.push_back(t.name + ".csv");
    }
    json checks = json::array();
    for (auto& c : out.checks)
        checks.push_back({{"criterion", c.criterion}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    auto now = std::chrono::system_clock::now();
    json rec = {{"subcommand", subcommand},
                {"config", cfg},
                {"config_hash", sha256_hex(cfg.dump())},
                {"run_hash", run_hash(subcommand, cfg)},
                {"version", SG_VERSION},
                {"started", started},
                {"finished", std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
                                 now.time_since_epoch()).count())},
                {"tables", tables},
                {"checks", checks},
                {"passed", out.passed()}};
    std::ofstream f(dir / "run.json", std::ios::binary);
    f << rec.dump(2) << "\n";
    return dir.string();
}

}  // namespace sgx
