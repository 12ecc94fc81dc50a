// Command-line front end: config ingestion, the verify / compose / bound /
// simulate pipeline, and the adaptive-cruise-control case-study generator.
//
// Exit codes: 0 success or consistent, 1 verification/validation failure,
// 2 usage or configuration error.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "posafe/acc_fixture.hpp"
#include "posafe/bounds.hpp"
#include "posafe/certificate.hpp"
#include "posafe/composition.hpp"
#include "posafe/config.hpp"
#include "posafe/montecarlo.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> resolution;
    std::string csv;
};

posafe::ProjectConfig load(const std::string& path, const Overrides& ov) {
    posafe::ProjectConfig cfg = posafe::load_config(path);
    if (ov.seed) cfg.sim.master_seed = *ov.seed;
    if (ov.workers) {
        cfg.sim.workers = *ov.workers;
        cfg.verification.workers = *ov.workers;
    }
    if (ov.resolution) cfg.verification.resolution = *ov.resolution;
    return cfg;
}

void print_provenance(const posafe::ProjectConfig& cfg) {
    const std::string h = cfg.source_hash.empty()
                              ? posafe::config_hash(posafe::config_to_json(cfg))
                              : cfg.source_hash;
    std::cout << "tool posafe " << kVersion << ", config_hash " << h << ", seed "
              << cfg.sim.master_seed << "\n";
}

// Representative block index of each group of identical blocks.
std::vector<int> block_groups(const posafe::ProjectConfig& cfg) {
    std::vector<int> reps;
    int pos = 0;
    if (!cfg.replicate_runs.empty()) {
        for (int r : cfg.replicate_runs) {
            reps.push_back(pos);
            pos += r;
        }
    } else {
        for (int i = 0; i < int(cfg.network.blocks.size()); ++i) reps.push_back(i);
    }
    return reps;
}

std::vector<posafe::BarrierCertificate> per_block_certs(const posafe::ProjectConfig& cfg) {
    if (!cfg.barrier) throw posafe::ConfigError("config declares no barrier certificate");
    return std::vector<posafe::BarrierCertificate>(cfg.network.blocks.size(), *cfg.barrier);
}

int cmd_verify(const posafe::ProjectConfig& cfg) {
    print_provenance(cfg);
    posafe::VerifyOptions vopts;
    vopts.scan.point_cap = cfg.verification.point_cap;
    vopts.scan.workers = cfg.verification.workers;
    vopts.lipschitz = cfg.verification.lipschitz;
    bool all_pass = true;
    bool ran_any = false;
    for (int rep : block_groups(cfg)) {
        const posafe::Block& b = cfg.network.blocks[rep];
        if (cfg.barrier) {
            ran_any = true;
            posafe::VerificationReport r =
                cfg.barrier->flavor == posafe::CertFlavor::Augmented
                    ? posafe::verify_lcbf_augmented(*cfg.barrier, b.sub, b.est, b.ctrl,
                                                    cfg.verification.resolution, vopts)
                    : posafe::verify_lcbf_estimator(*cfg.barrier, b.sub, b.est, b.ctrl,
                                                    cfg.verification.accuracy_eps,
                                                    cfg.verification.resolution, vopts);
            std::cout << "barrier certificate, block " << rep << ":\n" << r.render();
            all_pass = all_pass && r.pass();
        }
        if (cfg.simulation) {
            ran_any = true;
            if (!cfg.simulation->M.empty() && b.est.has_matrices()) {
                posafe::MatrixSsfResult m = posafe::verify_matrix_ssf(
                    cfg.simulation->M, b.est.A, b.est.K, b.est.C2, cfg.verification.pi_tilde,
                    cfg.simulation->mu_bar);
                std::cout << "simulation certificate (matrix fast path), block " << rep
                          << ": margin " << posafe::PolynomialExpr::format_double(m.margin)
                          << " tol " << posafe::PolynomialExpr::format_double(m.tol) << " -> "
                          << (m.pass ? "pass" : "FAIL") << "\n";
                all_pass = all_pass && m.pass;
            } else {
                posafe::VerificationReport r = posafe::verify_spsf(
                    *cfg.simulation, b.sub, b.est, b.ctrl, cfg.verification.resolution, vopts);
                std::cout << "simulation certificate, block " << rep << ":\n" << r.render();
                all_pass = all_pass && r.pass();
            }
        }
    }
    if (!ran_any) {
        std::cerr << "error: config declares no certificates to verify\n";
        return 2;
    }
    std::cout << (all_pass ? "verify: pass\n" : "verify: FAIL\n");
    return all_pass ? 0 : 1;
}

int cmd_compose(const posafe::ProjectConfig& cfg) {
    print_provenance(cfg);
    posafe::Topology topo = posafe::Topology::of(cfg.network);
    auto certs = per_block_certs(cfg);
    posafe::GainMatrix G = posafe::build_gain_matrix(certs, topo);
    posafe::SmallGainResult sg = posafe::check_small_gain(G);
    std::cout << "small-gain: " << (sg.pass ? "pass" : "FAIL") << " (" << sg.message << ")\n";
    if (!sg.pass) {
        if (!sg.witness_cycle.empty()) {
            std::cout << "witness cycle:";
            for (int v : sg.witness_cycle) std::cout << " " << v;
            std::cout << "\n";
        }
        return 1;
    }
    posafe::ScalingSet sc = posafe::find_scalings(G);
    bool all_identity = true;
    for (const auto& s : sc.sigma) all_identity = all_identity && s.a == 1.0;
    if (all_identity) {
        std::cout << "scalings: identity for all " << topo.n << " blocks\n";
    } else {
        std::cout << "scalings:";
        for (const auto& s : sc.sigma) std::cout << " " << s.str();
        std::cout << "\n";
    }
    posafe::ComposedCbf c = posafe::compose_cbf(certs, sc, topo);
    std::cout << "composed barrier constants: gamma "
              << posafe::PolynomialExpr::format_double(c.gamma) << ", lambda "
              << posafe::PolynomialExpr::format_double(c.lambda) << ", kappa "
              << posafe::PolynomialExpr::format_double(c.kappa) << ", psi "
              << posafe::PolynomialExpr::format_double(c.psi) << "\n";
    if (cfg.simulation) {
        std::vector<posafe::SimulationCertificate> scerts(cfg.network.blocks.size(),
                                                          *cfg.simulation);
        posafe::GainMatrix Gm = posafe::build_mu_gain_matrix(scerts, topo);
        posafe::SmallGainResult sgm = posafe::check_small_gain(Gm);
        std::cout << "simulation small-gain: " << (sgm.pass ? "pass" : "FAIL") << "\n";
        if (!sgm.pass) return 1;
        posafe::ComposedSsf s = posafe::compose_ssf(scerts, posafe::find_scalings(Gm), topo);
        std::cout << "composed simulation constants: mu "
                  << posafe::PolynomialExpr::format_double(s.mu) << ", c "
                  << posafe::PolynomialExpr::format_double(s.c) << ", eps " << s.eps.str()
                  << "\n";
    }
    return 0;
}

void print_bound(const char* name, const posafe::BoundResult& r) {
    std::cout << name << " = " << posafe::PolynomialExpr::format_double(r.value) << " (branch "
              << r.branch << ", safety >= "
              << posafe::PolynomialExpr::format_double(100.0 * (1.0 - r.value)) << "%)\n";
    for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
}

struct BoundFlags {
    double gamma = -1, lambda = -1, kappa = -1, psi = -1;
    double phi0 = 0, eps_a = -1, eps_p = 1, eps = -1, mu = -1, c = -1;
    double delta = -1, theta = -1;
    long horizon = 10;
};

int cmd_bound(const std::optional<posafe::ProjectConfig>& cfg, const BoundFlags& f) {
    std::optional<double> delta, theta;
    if (f.delta >= 0) delta = f.delta;
    if (f.theta >= 0) theta = f.theta;
    if (f.gamma >= 0 || f.lambda >= 0 || f.kappa >= 0 || f.psi >= 0) {
        posafe::BoundResult d =
            posafe::exit_probability_delta(f.gamma, f.lambda, f.kappa, f.psi, f.horizon);
        print_bound("delta", d);
        delta = d.value;
    }
    if (f.mu >= 0 || f.c >= 0 || f.eps_a >= 0) {
        posafe::BoundResult t = posafe::estimation_accuracy_theta(
            f.phi0, posafe::GainFn(f.eps_a, f.eps_p), f.eps, f.mu, f.c, f.horizon);
        print_bound("theta", t);
        theta = t.value;
    }
    if (cfg && !delta) {
        posafe::Topology topo = posafe::Topology::of(cfg->network);
        auto certs = per_block_certs(*cfg);
        posafe::ComposedCbf c =
            posafe::compose_cbf(certs, posafe::find_scalings(posafe::build_gain_matrix(certs, topo)),
                                topo);
        posafe::BoundResult d =
            posafe::exit_probability_delta(c.gamma, c.lambda, c.kappa, c.psi, cfg->bound.horizon);
        print_bound("delta", d);
        delta = d.value;
        if (cfg->simulation && !theta) {
            std::vector<posafe::SimulationCertificate> scerts(cfg->network.blocks.size(),
                                                              *cfg->simulation);
            posafe::GainMatrix Gm = posafe::build_mu_gain_matrix(scerts, topo);
            posafe::ComposedSsf s =
                posafe::compose_ssf(scerts, posafe::find_scalings(Gm), topo);
            posafe::BoundResult t = posafe::estimation_accuracy_theta(
                cfg->bound.phi0, s.eps, cfg->bound.eps, s.mu, s.c, cfg->bound.horizon);
            print_bound("theta", t);
            theta = t.value;
        }
    }
    if (delta && theta) {
        double both = posafe::combined_bound(*delta, *theta);
        std::cout << "delta+theta = " << posafe::PolynomialExpr::format_double(both)
                  << " (safety >= "
                  << posafe::PolynomialExpr::format_double(100.0 * (1.0 - both)) << "%)\n";
    }
    if (!delta && !theta) {
        std::cerr << "error: no bound inputs given (flags or config with certificates)\n";
        return 2;
    }
    return 0;
}

int cmd_simulate(const posafe::ProjectConfig& cfg, const Overrides& ov, bool accuracy_mode) {
    print_provenance(cfg);
    double certified = 1.0;
    if (!accuracy_mode && cfg.barrier) {
        try {
            posafe::Topology topo = posafe::Topology::of(cfg.network);
            auto certs = per_block_certs(cfg);
            posafe::ComposedCbf c = posafe::compose_cbf(
                certs, posafe::find_scalings(posafe::build_gain_matrix(certs, topo)), topo);
            certified = posafe::exit_probability_delta(c.gamma, c.lambda, c.kappa, c.psi,
                                                       cfg.sim.horizon)
                            .value;
        } catch (const posafe::Error& e) {
            std::cerr << "note: composition failed (" << e.what() << "); using bound 1\n";
        }
    } else if (accuracy_mode && cfg.simulation) {
        try {
            posafe::Topology topo = posafe::Topology::of(cfg.network);
            std::vector<posafe::SimulationCertificate> scerts(cfg.network.blocks.size(),
                                                              *cfg.simulation);
            posafe::GainMatrix Gm = posafe::build_mu_gain_matrix(scerts, topo);
            posafe::ComposedSsf s =
                posafe::compose_ssf(scerts, posafe::find_scalings(Gm), topo);
            certified = posafe::estimation_accuracy_theta(cfg.bound.phi0, s.eps, cfg.bound.eps,
                                                          s.mu, s.c, cfg.sim.horizon)
                            .value;
        } catch (const posafe::Error& e) {
            std::cerr << "note: composition failed (" << e.what() << "); using bound 1\n";
        }
    }
    std::ofstream csv;
    std::ostream* csv_ptr = nullptr;
    if (!ov.csv.empty()) {
        csv.open(ov.csv);
        if (!csv) {
            std::cerr << "error: cannot open CSV path '" << ov.csv << "'\n";
            return 2;
        }
        csv << "trial,k,block,d,v,d_hat,v_hat,u\n";
        csv_ptr = &csv;
    }
    posafe::SafetyReport report =
        accuracy_mode
            ? posafe::estimate_estimation_accuracy(cfg.network, cfg.bound.eps, cfg.sim,
                                                   certified, csv_ptr)
            : posafe::estimate_exit_probability(cfg.network, cfg.sim, certified, csv_ptr);
    std::cout << report.render();
    std::cerr << "runtime " << report.runtime_seconds << " s\n";
    return report.verdict == "consistent" ? 0 : 1;
}

int cmd_acc(int n, double tau, int variant, const std::string& out_path, bool reference,
            double sigma1, double sigma2, std::uint64_t seed) {
    posafe::NetworkSpec net = posafe::acc_platoon(
        n, tau, {1.7, -0.72}, sigma1, sigma2,
        variant == 1 ? posafe::AccController::Augmented : posafe::AccController::Estimator);
    posafe::ProjectConfig cfg;
    cfg.network = std::move(net);
    cfg.replicate_runs = {n};
    if (n > 1) cfg.chain_template = posafe::Edge{0, 0, 0, 1, 1};
    cfg.barrier = reference ? posafe::acc_reference_barrier() : posafe::acc_fixture_barrier();
    cfg.simulation = posafe::acc_reference_ssf();
    cfg.sim.trials = 10000;
    cfg.sim.horizon = 10;
    cfg.sim.master_seed = seed;
    cfg.sim.init_policy = posafe::InitPolicy::GridXa;
    cfg.sim.grid_points_per_dim = 3;
    cfg.bound.horizon = 10;
    cfg.bound.eps = 0.01;
    nlohmann::json j = posafe::config_to_json(cfg);
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot open output path '" << out_path << "'\n";
        return 2;
    }
    out << j.dump(2) << "\n";
    out.close();
    posafe::load_config(out_path);  // round-trip sanity
    std::cout << "wrote " << out_path << " (N=" << n << ", controller variant " << variant
              << ", config_hash " << posafe::config_hash(j) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositional safety verification for interconnected stochastic systems "
                 "with estimators"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path;
    app.add_option("--config", config_path, "project configuration file (JSON)");
    app.add_option("--seed", ov.seed, "override the master seed");
    app.add_option("--workers", ov.workers, "override the worker count (0 = hardware)");
    app.add_option("--resolution", ov.resolution, "override the verification grid resolution");
    app.add_option("--csv", ov.csv, "trajectory CSV output path (simulate)");

    CLI::App* verify = app.add_subcommand("verify", "verify declared certificates");
    CLI::App* compose = app.add_subcommand("compose", "small-gain composition");
    CLI::App* bound = app.add_subcommand("bound", "closed-form probability bounds");
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo validation");
    CLI::App* acc = app.add_subcommand("acc", "generate the cruise-control case-study config");

    BoundFlags bf;
    bound->add_option("--gamma", bf.gamma, "initial-set level");
    bound->add_option("--lambda", bf.lambda, "unsafe-set level");
    bound->add_option("--kappa", bf.kappa, "contraction constant in (0,1)");
    bound->add_option("--psi", bf.psi, "drift offset");
    bound->add_option("--horizon", bf.horizon, "time horizon in steps");
    bound->add_option("--phi0", bf.phi0, "initial simulation-function value");
    bound->add_option("--eps-a", bf.eps_a, "eps gain coefficient");
    bound->add_option("--eps-p", bf.eps_p, "eps gain exponent");
    bound->add_option("--eps", bf.eps, "accuracy radius");
    bound->add_option("--mu", bf.mu, "simulation contraction in (0,1)");
    bound->add_option("--c", bf.c, "simulation drift offset");
    bound->add_option("--delta", bf.delta, "precomputed exit bound (for the combined bound)");
    bound->add_option("--theta", bf.theta, "precomputed accuracy bound (for the combined bound)");

    bool accuracy_mode = false;
    simulate->add_flag("--accuracy", accuracy_mode,
                       "estimate estimation-accuracy exceedance instead of exit probability");

    int acc_n = 1000, acc_variant = 1;
    double acc_tau = 0.01, acc_sigma1 = 0.01, acc_sigma2 = 0.01;
    std::uint64_t acc_seed = 42;
    std::string acc_out = "acc.json";
    bool acc_reference = false;
    acc->add_option("--n", acc_n, "number of vehicles")->check(CLI::PositiveNumber);
    acc->add_option("--tau", acc_tau, "interconnection degree");
    acc->add_option("--variant", acc_variant, "controller variant (1 or 2)")
        ->check(CLI::Range(1, 2));
    acc->add_option("--output", acc_out, "output config path");
    acc->add_flag("--reference-constants", acc_reference,
                  "emit the reference certificate constants instead of the calibrated fixture");
    acc->add_option("--sigma1", acc_sigma1, "process noise std");
    acc->add_option("--sigma2", acc_sigma2, "measurement noise std");
    acc->add_option("--gen-seed", acc_seed, "master seed written into the config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (acc->parsed()) {
            return cmd_acc(acc_n, acc_tau, acc_variant, acc_out, acc_reference, acc_sigma1,
                           acc_sigma2, acc_seed);
        }
        if (bound->parsed()) {
            std::optional<posafe::ProjectConfig> cfg;
            if (!config_path.empty()) cfg = load(config_path, ov);
            return cmd_bound(cfg, bf);
        }
        if (config_path.empty()) {
            std::cerr << "error: --config is required for this subcommand\n";
            return 2;
        }
        posafe::ProjectConfig cfg = load(config_path, ov);
        if (verify->parsed()) return cmd_verify(cfg);
        if (compose->parsed()) return cmd_compose(cfg);
        if (simulate->parsed()) return cmd_simulate(cfg, ov, accuracy_mode);
    } catch (const posafe::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const posafe::CompositionError& e) {
        std::cerr << "composition failure: " << e.what() << "\n";
        return 1;
    } catch (const posafe::InvalidParameterError& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return 2;
    } catch (const posafe::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
