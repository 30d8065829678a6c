// Command-line driver: emits grids, sweeps and model tables as flat text.
//
// Exit codes: 0 success, 1 usage or config error, 2 numerical failure. On
// 1 and 2 a one-line JSON error record goes to stderr.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bellcat/bell.hpp"
#include "bellcat/io.hpp"
#include "bellcat/logical.hpp"
#include "bellcat/protocol.hpp"
#include "bellcat/tomography.hpp"

using namespace bellcat;
using hilbert::JointState;
using hilbert::Pauli;
using nlohmann::json;

namespace {

struct Common {
    std::string config = "paper";
    std::optional<std::uint64_t> seed;
    std::optional<int> shots;
    bool exact = false;
    std::string out;
};

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = io::load_config(c.config);
    if (c.seed) cfg.master_seed = *c.seed;
    if (c.shots) cfg.shots = *c.shots;
    cfg.validate();
    return cfg;
}

void emit(const Common& c, const std::string& text) {
    if (c.out.empty() || c.out == "-")
        std::cout << text;
    else
        io::write_atomic(c.out, text);
}

/// "a,b,c" or "start:stop:step" (inclusive of stop within half a step).
std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    if (s.find(':') != std::string::npos) {
        std::vector<double> p;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ':')) p.push_back(io::parse_double(tok));
        require(p.size() == 3 && p[2] > 0 && p[1] >= p[0], "range must be start:stop:step with step > 0");
        const auto n = static_cast<int>(std::floor((p[1] - p[0]) / p[2] + 0.5));
        for (int i = 0; i <= n; ++i) out.push_back(p[0] + i * p[2]);
        return out;
    }
    for (const auto& tok : io::split_csv(s)) out.push_back(io::parse_double(tok));
    require(!out.empty(), "empty list");
    return out;
}

Pauli parse_axis(const std::string& a) {
    if (a == "X" || a == "x") return Pauli::X;
    if (a == "Y" || a == "y") return Pauli::Y;
    if (a == "Z" || a == "z") return Pauli::Z;
    throw InvalidArgument("axis must be X, Y or Z");
}

struct StateSpec {
    std::string kind = "bell-cat";  // bell-cat, coherent, fock-entangled
    double beta = std::sqrt(3.0);
    int m = 3;
    std::string project;  // "", or AXIS:+1 / AXIS:-1

    std::string describe() const {
        std::string s = kind + "(beta=" + io::fmt(beta);
        if (kind == "fock-entangled") s += ",m=" + std::to_string(m);
        s += ")";
        if (!project.empty()) s += "|" + project;
        return s;
    }
};

/// Builds the named state. Bell-cats carry preparation noise unless `ideal`.
JointState build_state(const StateSpec& spec, const ExperimentConfig& cfg, bool ideal) {
    const int n = cfg.truncation.n_sim;
    std::optional<JointState> st;
    if (spec.kind == "bell-cat") {
        st = ideal ? protocol::prepare_bell_cat(spec.beta, cfg) : protocol::detection_state(spec.beta, cfg);
    } else if (spec.kind == "coherent") {
        st = JointState::product(hilbert::qubit_ground(), hilbert::coherent_state(spec.beta, n).normalized());
    } else if (spec.kind == "fock-entangled") {
        st = protocol::prepare_fock_entangled(spec.beta, spec.m, n);
    } else {
        throw InvalidArgument("unknown state kind '" + spec.kind + "'");
    }
    if (!spec.project.empty()) {
        const auto colon = spec.project.find(':');
        require(colon != std::string::npos, "--project must be AXIS:+1 or AXIS:-1");
        const Pauli axis = parse_axis(spec.project.substr(0, colon));
        const int outcome = std::stoi(spec.project.substr(colon + 1));
        auto pr = protocol::project_qubit(*st, axis, outcome);
        if (!pr.state) throw NumericalError("projection outcome has zero probability", pr.probability);
        st = pr.state;
    }
    return *st;
}

tomography::WignerGrid wigner_for(const JointState& st, const ExperimentConfig& cfg, bool exact, bool expected) {
    if (exact) return tomography::joint_wigner_exact(st, cfg.grid);
    if (expected) return tomography::joint_wigner_expected(st, cfg);
    return tomography::joint_wigner_sampled(st, cfg, cfg.shots, cfg.master_seed);
}

// ---------------------------------------------------------------------------

int run_wigner(const Common& c, const StateSpec& spec, bool expected) {
    const auto cfg = resolve(c);
    const JointState st = build_state(spec, cfg, c.exact);
    const auto grid = wigner_for(st, cfg, c.exact, expected);
    auto t = io::wigner_table(grid, spec.describe());
    t.meta.emplace_back("mode", c.exact ? "exact" : expected ? "expected" : "sampled");
    emit(c, t.render(cfg));
    return 0;
}

int run_bell(const Common& c, int test_id, const std::string& betas, const std::string& params) {
    const auto cfg = resolve(c);
    const auto beta_list = parse_list(betas);
    const double v = noise::visibility_predicted(cfg.noise.f_q(), cfg.noise.f_c, cfg.noise.reset_decay_probability());
    const double gamma = cfg.noise.t_eff_us / cfg.noise.tau_s_us;

    io::Table t;
    t.kind = "bell";
    t.meta = {{"test", std::to_string(test_id)}, {"shots_per_permutation", std::to_string(cfg.shots)}};
    t.columns = {"beta", "param", "O", "sigma", "C_AA", "C_AB", "C_BA", "C_BB", "O_pred"};
    for (int p = 0; p < 4; ++p) {
        t.columns.push_back("O_perm" + std::to_string(p));
        t.columns.push_back("sigma_perm" + std::to_string(p));
    }
    std::uint64_t cell = 0;
    for (double b : beta_list) {
        std::vector<double> plist;
        if (!params.empty()) {
            plist = parse_list(params);
        } else {
            plist = {test_id == 1 ? -kPi / 4 : (b > 0.0 ? bell::optimal_displacement(b) : 0.0)};
        }
        double o_pred = std::nan("");
        if (test_id == 1) o_pred = bell::model_curves_test1(b, v, gamma).o_pred;
        if (test_id == 2 && b > 0.0) o_pred = bell::model_curves_test2(b, v, gamma).o_pred;
        for (double p : plist) {
            const auto r = bell::bell_cell(test_id, b, p, cfg, cfg.shots, cfg.master_seed, cell++);
            std::vector<std::string> row = {io::fmt(b),         io::fmt(p),         io::fmt(r.o),
                                            io::fmt(r.sigma),   io::fmt(r.corr[0]), io::fmt(r.corr[1]),
                                            io::fmt(r.corr[2]), io::fmt(r.corr[3]), io::fmt(o_pred)};
            for (const auto& s : r.per_setting) {
                row.push_back(io::fmt(s.o));
                row.push_back(io::fmt(s.sigma));
            }
            t.add_row(std::move(row));
        }
    }
    emit(c, t.render(cfg));
    return 0;
}

int run_reconstruct(const Common& c, const std::string& in, std::optional<double> beta, int n_max) {
    const auto parsed = io::read_table(in);
    if (!parsed.hash_ok) throw InvalidArgument("grid file content hash mismatch: " + in);
    const auto grid = io::wigner_from_table(parsed);
    ExperimentConfig cfg = *parsed.config;
    if (n_max > 0) cfg.truncation.n_mle = n_max;
    const int n = cfg.truncation.n_mle;
    const auto fit = tomography::mle_reconstruct(grid, n, cfg.mle);

    json report = {{"n_max", n},
                   {"visibility_scale", fit.scale[0]},
                   {"residual_mean", fit.residual_mean},
                   {"residual_std", fit.residual_std},
                   {"objective", fit.objective},
                   {"iterations", fit.iterations},
                   {"converged", fit.converged},
                   {"purity", hilbert::purity(fit.rho)}};
    if (beta) {
        const Vector full = protocol::bell_cat_vector(*beta, cfg.truncation.n_sim);
        const Vector g = hilbert::resize_cavity(full.head(cfg.truncation.n_sim), n);
        const Vector e = hilbert::resize_cavity(full.tail(cfg.truncation.n_sim), n);
        Vector psi(2 * n);
        psi << g, e;
        report["fidelity_bell_cat"] = hilbert::fidelity(fit.rho, psi);
        const auto ps = logical::pauli_set_16(fit.state(), *beta);
        report["dfe"] = logical::dfe(logical::diagonal(ps));
    }

    io::Table t;
    t.kind = "density";
    t.meta = {{"source", in}, {"source_sha1", parsed.content_sha1}, {"report", report.dump()}};
    t.columns = {"row", "col", "re", "im"};
    for (int i = 0; i < fit.rho.rows(); ++i)
        for (int j = 0; j < fit.rho.cols(); ++j)
            t.add_row({std::to_string(i), std::to_string(j), io::fmt(fit.rho(i, j).real()),
                       io::fmt(fit.rho(i, j).imag())});
    emit(c, t.render(cfg));
    if (!c.out.empty() && c.out != "-") std::cout << report.dump() << "\n";
    if (!fit.converged) throw NumericalError("reconstruction did not converge", fit.objective);
    return 0;
}

int run_entropy(const Common& c, const std::string& betas) {
    const auto cfg = resolve(c);
    io::Table t;
    t.kind = "entropy";
    t.columns = {"beta", "entropy_bits", "overlap"};
    for (double b : parse_list(betas))
        t.add_row({io::fmt(b), io::fmt(logical::encoded_entropy(b)), io::fmt(std::exp(-2.0 * b * b))});
    emit(c, t.render(cfg));
    return 0;
}

int run_backaction(const Common& c, StateSpec spec, const std::string& axis, bool expected) {
    const auto cfg = resolve(c);
    require(!c.out.empty() && c.out != "-", "backaction writes two files; --out is a required path prefix");
    json summary = json::array();
    for (int outcome : {1, -1}) {
        spec.project = axis + ":" + (outcome > 0 ? "+1" : "-1");
        const JointState base = build_state(StateSpec{spec.kind, spec.beta, spec.m, ""}, cfg, c.exact);
        const auto pr = protocol::project_qubit(base, parse_axis(axis), outcome);
        json rec = {{"outcome", outcome}, {"probability", pr.probability}};
        if (pr.state) {
            const auto grid = wigner_for(*pr.state, cfg, c.exact, expected);
            auto t = io::wigner_table(grid, spec.describe());
            t.meta.emplace_back("probability", io::fmt(pr.probability));
            const std::string path = c.out + (outcome > 0 ? "_plus.csv" : "_minus.csv");
            io::write_atomic(path, t.render(cfg));
            rec["file"] = path;
        }
        summary.push_back(rec);
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_models(const Common& c, const std::string& betas, std::optional<double> visibility) {
    const auto cfg = resolve(c);
    const double v = visibility.value_or(0.85);
    const double gamma = cfg.noise.t_eff_us / cfg.noise.tau_s_us;
    io::Table t;
    t.kind = "models";
    t.meta = {{"visibility", io::fmt(v)}, {"gamma", io::fmt(gamma)}};
    t.columns = {"beta", "O1_ideal", "O1_vis", "O1_loss", "O1_pred", "alpha0", "O2_ideal", "O2_pred"};
    for (double b : parse_list(betas)) {
        const auto m1 = bell::model_curves_test1(b, v, gamma);
        std::vector<std::string> row = {io::fmt(b), io::fmt(m1.o_ideal), io::fmt(m1.o_vis), io::fmt(m1.o_loss),
                                        io::fmt(m1.o_pred)};
        if (b > 0.0) {
            const auto m2 = bell::model_curves_test2(b, v, gamma);
            row.insert(row.end(), {io::fmt(m2.alpha0), io::fmt(m2.o_ideal), io::fmt(m2.o_pred)});
        } else {
            row.insert(row.end(), 3, "nan");
        }
        t.add_row(std::move(row));
    }
    emit(c, t.render(cfg));
    return 0;
}

int run_selftest() {
    int failed = 0;
    auto check = [&](const char* name, bool ok) {
        std::printf("%s %s\n", ok ? "PASS" : "FAIL", name);
        if (!ok) ++failed;
    };
    const auto cfg = noiseless_preset();
    const double beta = std::sqrt(3.0);
    const auto st = protocol::prepare_bell_cat(beta, cfg);
    const Vector target = protocol::bell_cat_vector(beta, cfg.truncation.n_sim);
    check("noiseless preparation fidelity", hilbert::fidelity(st, target) >= 1.0 - 1e-6);

    const cplx alpha{0.7, -0.4};
    const auto probe = JointState::product(hilbert::qubit_ground(),
                                           hilbert::coherent_state({0.5, 0.3}, cfg.truncation.n_sim).normalized());
    const auto pm = protocol::parity_map_circuit(probe, alpha, 1, cfg.hamiltonian.chi(), cfg.truncation.n_pad);
    const double par = hilbert::expectation(probe, hilbert::identity(2),
                                            hilbert::displaced_parity_analytic(alpha, cfg.truncation.n_sim)).real();
    check("parity map circuit", std::abs(pm.probability[0] - 0.5 * (1.0 + par)) < 1e-8);

    check("optimal displacement", std::abs(bell::optimal_displacement(1.0) - 0.15) < 0.01);
    check("config round trip", io::parse_config(io::serialize_config(paper_preset())) == paper_preset());
    check("blob hash", io::git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    return failed ? 2 : 0;
}

void error_record(const char* kind, const std::string& msg, std::optional<double> metric = std::nullopt) {
    json e = {{"error", kind}, {"message", msg}};
    if (metric) e["metric"] = *metric;
    std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bell-cat qubit-cavity simulator"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", common.config, "config file, or preset: paper, paper-pc06, noiseless");
        s->add_option("--seed", common.seed, "master seed");
        s->add_option("--shots", common.shots, "shots per point or per detector permutation");
        s->add_flag("--exact", common.exact, "noiseless exact values instead of sampling");
        s->add_option("--out", common.out, "output path (default stdout)");
    };

    StateSpec spec;
    bool expected = false;
    auto* wig = app.add_subcommand("wigner", "joint Wigner grid of a named state");
    add_common(wig);
    wig->add_option("--state", spec.kind, "bell-cat, coherent or fock-entangled");
    wig->add_option("--beta", spec.beta, "cat amplitude");
    wig->add_option("--m", spec.m, "Fock level for fock-entangled");
    wig->add_option("--project", spec.project, "qubit projection AXIS:+1 or AXIS:-1 before tomography");
    wig->add_flag("--expected", expected, "infinite-shot detector-level grid");

    int test_id = 1;
    std::string betas = "1";
    std::string params;
    auto* bel = app.add_subcommand("bell", "CHSH Monte Carlo sweep");
    add_common(bel);
    bel->add_option("--test", test_id, "1 or 2")->check(CLI::IsMember({1, 2}));
    bel->add_option("--beta", betas, "list a,b,c or range start:stop:step");
    bel->add_option("--param", params, "theta (test 1) or alpha (test 2); default optimal");

    std::string in;
    std::optional<double> rbeta;
    int n_max = 0;
    auto* rec = app.add_subcommand("reconstruct", "maximum-likelihood density matrix from a grid file");
    add_common(rec);
    rec->add_option("--in", in, "grid file written by 'wigner'")->required();
    rec->add_option("--beta", rbeta, "report fidelity to the Bell-cat with this amplitude");
    rec->add_option("--n-max", n_max, "cavity truncation (default from config)");

    std::string ebetas = "0:2:0.04";
    auto* ent = app.add_subcommand("entropy", "code-space entropy versus amplitude");
    add_common(ent);
    ent->add_option("--beta", ebetas, "list or range");

    std::string axis = "X";
    auto* back = app.add_subcommand("backaction", "Wigner grids of qubit-projected states");
    add_common(back);
    back->add_option("--state", spec.kind, "bell-cat or fock-entangled");
    back->add_option("--beta", spec.beta, "cat amplitude");
    back->add_option("--m", spec.m, "Fock level for fock-entangled");
    back->add_option("--axis", axis, "X, Y or Z");
    back->add_flag("--expected", expected, "infinite-shot detector-level grid");

    std::string mbetas = "0:2:0.125";
    std::optional<double> visibility;
    auto* mod = app.add_subcommand("models", "analytic CHSH model curves");
    add_common(mod);
    mod->add_option("--beta", mbetas, "list or range");
    mod->add_option("--visibility", visibility, "visibility V (default 0.85)");

    auto* self = app.add_subcommand("selftest", "quick internal consistency checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_record("usage", e.what());
        return 1;
    }

    try {
        if (*wig) return run_wigner(common, spec, expected);
        if (*bel) return run_bell(common, test_id, betas, params);
        if (*rec) return run_reconstruct(common, in, rbeta, n_max);
        if (*ent) return run_entropy(common, ebetas);
        if (*back) return run_backaction(common, spec, axis, expected);
        if (*mod) return run_models(common, mbetas, visibility);
        if (*self) return run_selftest();
    } catch (const NumericalError& e) {
        error_record("numerical", e.what(), e.metric());
        return 2;
    } catch (const InvalidArgument& e) {
        error_record("config", e.what());
        return 1;
    } catch (const std::exception& e) {
        error_record("config", e.what());
        return 1;
    }
    return 1;
}
