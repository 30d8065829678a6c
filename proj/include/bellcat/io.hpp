#pragma once

// Config serialization and the flat-text result files. Every file carries
// '#' header lines with the resolved config and a git-style blob hash of the
// body, and is written to a temporary file first, then renamed.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include <openssl/evp.h>

#include "bellcat/config.hpp"
#include "bellcat/tomography.hpp"

namespace bellcat::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace detail {

/// Reads fields from one JSON object and rejects keys nobody asked for.
class StrictObject {
public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InvalidArgument("config: " + path_ + " must be an object");
    }

    template <class T>
    void read(const char* key, T& field) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            field = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw InvalidArgument("config: bad value for " + path_ + key);
        }
    }

    void read(const char* key, std::optional<double>& field) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (v.is_null()) {
            field.reset();
        } else if (v.is_number()) {
            field = v.get<double>();
        } else {
            throw InvalidArgument("config: bad value for " + path_ + key);
        }
    }

    StrictObject child(const char* key) {
        seen_.insert(key);
        static const json empty = json::object();
        return StrictObject(j_.contains(key) ? j_.at(key) : empty, path_ + key + ".");
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw InvalidArgument("config: unknown key " + path_ + k);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
    const auto& h = c.hamiltonian;
    const auto& n = c.noise;
    const auto& f = n.flags;
    json j;
    j["hamiltonian"] = {
        {"chi_qs_over_2pi_mhz", h.chi_qs_over_2pi_mhz}, {"omega_q_over_2pi_ghz", h.omega_q_over_2pi_ghz},
        {"omega_s_over_2pi_ghz", h.omega_s_over_2pi_ghz}, {"omega_r_over_2pi_ghz", h.omega_r_over_2pi_ghz},
        {"k_q_over_2pi_mhz", h.k_q_over_2pi_mhz},       {"k_s_over_2pi_khz", h.k_s_over_2pi_khz},
        {"k_r_over_2pi_khz", h.k_r_over_2pi_khz},       {"chi_qr_over_2pi_mhz", h.chi_qr_over_2pi_mhz},
        {"chi_rs_over_2pi_khz", h.chi_rs_over_2pi_khz}};
    j["noise"] = {{"enabled", n.enabled},
                  {"tau_s_us", n.tau_s_us},
                  {"t1_us", n.t1_us},
                  {"t2_us", n.t2_us},
                  {"p_gg", n.p_gg},
                  {"p_ee", n.p_ee},
                  {"f_c", n.f_c},
                  {"p_c", n.p_c ? json(*n.p_c) : json(nullptr)},
                  {"tau_wait_ns", n.tau_wait_ns},
                  {"t_eff_us", n.t_eff_us},
                  {"init_success", n.init_success},
                  {"rotation_error", n.rotation_error}};
    j["noise"]["flags"] = {{"cavity_damping", f.cavity_damping}, {"qubit_decay", f.qubit_decay},
                           {"detector_flips", f.detector_flips}, {"reset_decay", f.reset_decay},
                           {"init_failure", f.init_failure},     {"rotation_error", f.rotation_error},
                           {"dephasing", f.dephasing},           {"photon_dependent_fc", f.photon_dependent_fc}};
    j["grid"] = {{"alpha_max", c.grid.alpha_max}, {"alpha_step", c.grid.alpha_step}};
    j["truncation"] = {{"n_sim", c.truncation.n_sim}, {"n_pad", c.truncation.n_pad}, {"n_mle", c.truncation.n_mle}};
    j["mle"] = {{"max_iterations", c.mle.max_iterations},
                {"tolerance", c.mle.tolerance},
                {"fit_visibility", c.mle.fit_visibility},
                {"bootstrap_resamples", c.mle.bootstrap_resamples}};
    const auto& t = c.tolerances;
    j["tolerances"] = {{"leakage", t.leakage},         {"unitarity", t.unitarity},
                       {"state_norm", t.state_norm},   {"hermiticity", t.hermiticity},
                       {"min_eigenvalue", t.min_eigenvalue}, {"grid_slack", t.grid_slack}};
    j["shots"] = c.shots;
    j["master_seed"] = c.master_seed;
    return j;
}

/// Missing keys keep their paper-preset defaults; unknown keys throw.
inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    detail::StrictObject root(j, "");
    {
        auto o = root.child("hamiltonian");
        auto& h = c.hamiltonian;
        o.read("chi_qs_over_2pi_mhz", h.chi_qs_over_2pi_mhz);
        o.read("omega_q_over_2pi_ghz", h.omega_q_over_2pi_ghz);
        o.read("omega_s_over_2pi_ghz", h.omega_s_over_2pi_ghz);
        o.read("omega_r_over_2pi_ghz", h.omega_r_over_2pi_ghz);
        o.read("k_q_over_2pi_mhz", h.k_q_over_2pi_mhz);
        o.read("k_s_over_2pi_khz", h.k_s_over_2pi_khz);
        o.read("k_r_over_2pi_khz", h.k_r_over_2pi_khz);
        o.read("chi_qr_over_2pi_mhz", h.chi_qr_over_2pi_mhz);
        o.read("chi_rs_over_2pi_khz", h.chi_rs_over_2pi_khz);
        o.finish();
    }
    {
        auto o = root.child("noise");
        auto& n = c.noise;
        o.read("enabled", n.enabled);
        o.read("tau_s_us", n.tau_s_us);
        o.read("t1_us", n.t1_us);
        o.read("t2_us", n.t2_us);
        o.read("p_gg", n.p_gg);
        o.read("p_ee", n.p_ee);
        o.read("f_c", n.f_c);
        o.read("p_c", n.p_c);
        o.read("tau_wait_ns", n.tau_wait_ns);
        o.read("t_eff_us", n.t_eff_us);
        o.read("init_success", n.init_success);
        o.read("rotation_error", n.rotation_error);
        auto fl = o.child("flags");
        auto& f = n.flags;
        fl.read("cavity_damping", f.cavity_damping);
        fl.read("qubit_decay", f.qubit_decay);
        fl.read("detector_flips", f.detector_flips);
        fl.read("reset_decay", f.reset_decay);
        fl.read("init_failure", f.init_failure);
        fl.read("rotation_error", f.rotation_error);
        fl.read("dephasing", f.dephasing);
        fl.read("photon_dependent_fc", f.photon_dependent_fc);
        fl.finish();
        o.finish();
    }
    {
        auto o = root.child("grid");
        o.read("alpha_max", c.grid.alpha_max);
        o.read("alpha_step", c.grid.alpha_step);
        o.finish();
    }
    {
        auto o = root.child("truncation");
        o.read("n_sim", c.truncation.n_sim);
        o.read("n_pad", c.truncation.n_pad);
        o.read("n_mle", c.truncation.n_mle);
        o.finish();
    }
    {
        auto o = root.child("mle");
        o.read("max_iterations", c.mle.max_iterations);
        o.read("tolerance", c.mle.tolerance);
        o.read("fit_visibility", c.mle.fit_visibility);
        o.read("bootstrap_resamples", c.mle.bootstrap_resamples);
        o.finish();
    }
    {
        auto o = root.child("tolerances");
        auto& t = c.tolerances;
        o.read("leakage", t.leakage);
        o.read("unitarity", t.unitarity);
        o.read("state_norm", t.state_norm);
        o.read("hermiticity", t.hermiticity);
        o.read("min_eigenvalue", t.min_eigenvalue);
        o.read("grid_slack", t.grid_slack);
        o.finish();
    }
    root.read("shots", c.shots);
    root.read("master_seed", c.master_seed);
    root.finish();
    c.validate();
    return c;
}

inline std::string serialize_config(const ExperimentConfig& c, int indent = 2) { return to_json(c).dump(indent); }

inline ExperimentConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

/// Reads a config file; "paper", "paper-pc06" and "noiseless" name presets.
inline ExperimentConfig load_config(const std::string& path_or_preset) {
    if (path_or_preset == "paper") return paper_preset();
    if (path_or_preset == "paper-pc06") return paper_pc06_preset();
    if (path_or_preset == "noiseless") return noiseless_preset();
    std::ifstream in(path_or_preset);
    if (!in) throw InvalidArgument("config: cannot open " + path_or_preset);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Numbers, hashing, atomic writes

/// Shortest representation that round-trips.
inline std::string fmt(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw InvalidArgument("parse: not a number: " + std::string(s));
    return x;
}

/// SHA-1 of "blob <size>\0<content>", as git computes object ids.
inline std::string git_blob_hash(std::string_view content) {
    std::string data = "blob " + std::to_string(content.size());
    data.push_back('\0');
    data.append(content);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw NumericalError("sha1 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidArgument("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw InvalidArgument("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Tables

/// A result table: header metadata plus whitespace-free CSV body.
struct Table {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> meta;  // extra "# key: value" lines
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> r) {
        require(r.size() == columns.size(), "Table: row width does not match columns");
        rows.push_back(std::move(r));
    }

    std::string body() const {
        std::string s;
        for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
        s += '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
            s += '\n';
        }
        return s;
    }

    /// Header: kind, metadata, compact config and the body hash.
    std::string render(const ExperimentConfig& cfg) const {
        const std::string b = body();
        std::string s = "# bellcat " + kind + "\n";
        for (const auto& [k, v] : meta) s += "# " + k + ": " + v + "\n";
        s += "# config: " + to_json(cfg).dump() + "\n";
        s += "# content_sha1: " + git_blob_hash(b) + "\n";
        return s + b;
    }
};

/// Parsed form of a file written by Table::render.
struct ParsedTable {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> meta;
    std::optional<ExperimentConfig> config;
    std::string content_sha1;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    bool hash_ok = false;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw InvalidArgument("table: missing column " + name);
    }
    std::optional<std::string> get_meta(const std::string& key) const {
        for (const auto& [k, v] : meta)
            if (k == key) return v;
        return std::nullopt;
    }
};

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = line.find(',', start);
        out.push_back(line.substr(start, p == std::string::npos ? std::string::npos : p - start));
        if (p == std::string::npos) break;
        start = p + 1;
    }
    return out;
}

inline ParsedTable parse_table(const std::string& text) {
    ParsedTable t;
    std::istringstream in(text);
    std::string line;
    std::string body;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            const std::string h = line.substr(2);
            if (h.rfind("bellcat ", 0) == 0) {
                t.kind = h.substr(8);
                continue;
            }
            const auto colon = h.find(": ");
            if (colon == std::string::npos) continue;
            const std::string key = h.substr(0, colon), val = h.substr(colon + 2);
            if (key == "config")
                t.config = parse_config(val);
            else if (key == "content_sha1")
                t.content_sha1 = val;
            else
                t.meta.emplace_back(key, val);
            continue;
        }
        body += line + "\n";
        if (line.empty()) continue;
        if (t.columns.empty())
            t.columns = split_csv(line);
        else
            t.rows.push_back(split_csv(line));
    }
    t.hash_ok = !t.content_sha1.empty() && git_blob_hash(body) == t.content_sha1;
    return t;
}

inline ParsedTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_table(ss.str());
}

// ---------------------------------------------------------------------------
// Wigner grid files: one row per grid point, all four channels.

inline Table wigner_table(const tomography::WignerGrid& g, const std::string& state_spec) {
    Table t;
    t.kind = "wigner";
    t.meta = {{"state", state_spec},
              {"shots_per_point", std::to_string(g.shots_per_point)},
              {"points_per_axis", std::to_string(g.size())}};
    for (const auto& w : g.warnings) t.meta.emplace_back("warning", w);
    t.columns = {"re_alpha", "im_alpha", "W_I", "W_X", "W_Y", "W_Z"};
    const int n = g.size();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const cplx a = g.alpha(i, j);
            t.add_row({fmt(a.real()), fmt(a.imag()), fmt(g.w[0](i, j)), fmt(g.w[1](i, j)), fmt(g.w[2](i, j)),
                       fmt(g.w[3](i, j))});
        }
    return t;
}

inline tomography::WignerGrid wigner_from_table(const ParsedTable& t) {
    require(t.kind == "wigner", "wigner file: wrong kind '" + t.kind + "'");
    require(t.config.has_value(), "wigner file: missing config header");
    auto g = tomography::WignerGrid::zeros(t.config->grid);
    const int n = g.size();
    require(static_cast<int>(t.rows.size()) == n * n, "wigner file: row count does not match grid");
    if (auto s = t.get_meta("shots_per_point")) g.shots_per_point = std::stoi(*s);
    for (const auto& [k, v] : t.meta)
        if (k == "warning") g.warnings.push_back(v);
    const int c0 = t.column("W_I");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const auto& r = t.rows[static_cast<std::size_t>(i * n + j)];
            for (int c = 0; c < 4; ++c) g.w[c](i, j) = parse_double(r[c0 + c]);
        }
    return g;
}

}  // namespace bellcat::io
