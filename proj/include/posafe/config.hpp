#pragma once

// Structured project configuration: one JSON document describing the network,
// certificates, verification settings, simulation settings, and bound inputs.
// Schema-validated with unknown-key rejection; identical repeated blocks can
// be written once with a "replicate" count; emission is canonical so a config
// hash is stable across load/emit round trips.

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "posafe/certificate.hpp"
#include "posafe/common.hpp"
#include "posafe/montecarlo.hpp"
#include "posafe/system.hpp"

namespace posafe {

struct ConfigError : Error {
    using Error::Error;
};

struct VerificationSection {
    int resolution = 21;
    std::uint64_t point_cap = 250'000'000;
    int workers = 0;
    double lipschitz = 0.0;    // 0 disables rigorous mode
    double accuracy_eps = 0.01;  // estimator-flavor inflation / accuracy radius
    double pi_tilde = 1.0;
};

struct BoundSection {
    long horizon = 10;
    double eps = 0.01;
    double phi0 = 0.0;
};

struct ProjectConfig {
    int schema_version = 1;
    NetworkSpec network;
    std::optional<Edge> chain_template;  // compact chain topology, if used
    std::vector<int> replicate_runs;     // run-length of identical block groups
    std::optional<BarrierCertificate> barrier;        // applied to every block
    std::optional<SimulationCertificate> simulation;  // applied to every block
    VerificationSection verification;
    SimConfig sim;
    BoundSection bound;
    // Hash of the source document as loaded (before any CLI overrides);
    // empty for configs built programmatically.
    std::string source_hash;
};

namespace cfg_detail {

using nlohmann::json;

inline void expect_keys(const json& j, const std::vector<std::string>& allowed,
                        const std::string& path) {
    if (!j.is_object()) throw ConfigError("config: '" + path + "' must be an object");
    for (const auto& [k, v] : j.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError("config: unknown key '" + path + "." + k + "'");
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("config: missing key '" + path + "." + key + "'");
    return *it;
}

template <class T>
inline T get(const json& j, const std::string& key, const std::string& path) {
    try {
        return need(j, key, path).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value at '" + path + "." + key + "': " + e.what());
    }
}

template <class T>
inline T get_or(const json& j, const std::string& key, const std::string& path, T dflt) {
    if (!j.contains(key)) return dflt;
    return get<T>(j, key, path);
}

inline PolynomialExpr poly_from(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError("config: '" + path + "' must be an array of term strings");
    std::string text;
    for (const auto& line : j) {
        if (!line.is_string()) throw ConfigError("config: '" + path + "' entries must be strings");
        text += line.get<std::string>() + "\n";
    }
    try {
        return PolynomialExpr::from_text(text);
    } catch (const Error& e) {
        throw ConfigError("config: bad polynomial at '" + path + "': " + e.what());
    }
}

inline json poly_to(const PolynomialExpr& p) {
    json out = json::array();
    std::istringstream in(p.to_text());
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

inline std::vector<PolynomialExpr> polys_from(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError("config: '" + path + "' must be an array");
    std::vector<PolynomialExpr> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(poly_from(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline json polys_to(const std::vector<PolynomialExpr>& ps) {
    json out = json::array();
    for (const auto& p : ps) out.push_back(poly_to(p));
    return out;
}

inline BoxRegion box_from(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError("config: '" + path + "' must be a list of [lo, hi] pairs");
    std::vector<std::pair<double, double>> iv;
    for (const auto& pair : j) {
        if (!pair.is_array() || pair.size() != 2)
            throw ConfigError("config: '" + path + "' entries must be [lo, hi]");
        iv.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    try {
        return BoxRegion(std::move(iv));
    } catch (const Error& e) {
        throw ConfigError("config: bad region at '" + path + "': " + e.what());
    }
}

inline json box_to(const BoxRegion& b) {
    json out = json::array();
    for (const auto& [lo, hi] : b.iv) out.push_back(json::array({lo, hi}));
    return out;
}

inline RegionSpec region_union_from(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty())
        throw ConfigError("config: '" + path + "' must be a nonempty list of boxes");
    std::vector<BoxRegion> boxes;
    for (std::size_t i = 0; i < j.size(); ++i)
        boxes.push_back(box_from(j[i], path + "[" + std::to_string(i) + "]"));
    return RegionSpec(std::move(boxes));
}

inline json region_union_to(const RegionSpec& r) {
    json out = json::array();
    for (const auto& b : r.boxes) out.push_back(box_to(b));
    return out;
}

inline Matrix matrix_from(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError("config: '" + path + "' must be a nested array");
    Matrix m;
    for (const auto& row : j) {
        if (!row.is_array()) throw ConfigError("config: '" + path + "' rows must be arrays");
        m.push_back(row.get<std::vector<double>>());
    }
    return m;
}

inline json matrix_to(const Matrix& m) {
    json out = json::array();
    for (const auto& row : m) out.push_back(row);
    return out;
}

inline GainFn gain_from(const json& j, const std::string& path) {
    expect_keys(j, {"a", "p"}, path);
    try {
        return GainFn(get<double>(j, "a", path), get_or<double>(j, "p", path, 1.0));
    } catch (const Error& e) {
        throw ConfigError("config: bad gain at '" + path + "': " + e.what());
    }
}

inline json gain_to(const GainFn& g) { return json{{"a", g.a}, {"p", g.p}}; }

inline Block block_from(const json& j, const std::string& path) {
    expect_keys(j,
                {"replicate", "state_dim", "input_dim", "internal_input_dim",
                 "internal_output_dim", "output_dim", "f", "h1", "C2", "sigma1", "sigma2", "X",
                 "Xa", "Xb", "W", "Y2", "estimator", "controller"},
                path);
    Block b;
    b.sub.state_dim = get<int>(j, "state_dim", path);
    b.sub.input_dim = get<int>(j, "input_dim", path);
    b.sub.internal_input_dim = get<int>(j, "internal_input_dim", path);
    b.sub.internal_output_dim = get<int>(j, "internal_output_dim", path);
    b.sub.output_dim = get<int>(j, "output_dim", path);
    b.sub.f = polys_from(need(j, "f", path), path + ".f");
    b.sub.h1 = polys_from(need(j, "h1", path), path + ".h1");
    b.sub.C2 = matrix_from(need(j, "C2", path), path + ".C2");
    b.sub.sigma1 = get<std::vector<double>>(j, "sigma1", path);
    b.sub.sigma2 = get<std::vector<double>>(j, "sigma2", path);
    b.sub.X = RegionSpec(box_from(need(j, "X", path), path + ".X"));
    b.sub.Xa = RegionSpec(box_from(need(j, "Xa", path), path + ".Xa"));
    b.sub.Xb = region_union_from(need(j, "Xb", path), path + ".Xb");
    b.sub.W = box_from(need(j, "W", path), path + ".W");
    b.sub.Y2 = box_from(need(j, "Y2", path), path + ".Y2");

    const json& est = need(j, "estimator", path);
    expect_keys(est, {"A", "B", "Aw", "K", "C2", "fhat"}, path + ".estimator");
    if (est.contains("A")) {
        b.est.A = matrix_from(need(est, "A", path), path + ".estimator.A");
        b.est.B = matrix_from(need(est, "B", path), path + ".estimator.B");
        b.est.Aw = matrix_from(need(est, "Aw", path), path + ".estimator.Aw");
        b.est.K = matrix_from(need(est, "K", path), path + ".estimator.K");
        b.est.C2 = matrix_from(need(est, "C2", path), path + ".estimator.C2");
    }
    if (est.contains("fhat")) b.est.fhat = polys_from(est["fhat"], path + ".estimator.fhat");
    if (!est.contains("A") && !est.contains("fhat"))
        throw ConfigError("config: '" + path + ".estimator' needs matrices or 'fhat'");

    const json& ctrl = need(j, "controller", path);
    expect_keys(ctrl, {"laws", "saturation"}, path + ".controller");
    b.ctrl.laws = polys_from(need(ctrl, "laws", path), path + ".controller.laws");
    for (const auto& s : need(ctrl, "saturation", path)) {
        if (!s.is_array() || s.size() != 2)
            throw ConfigError("config: '" + path + ".controller.saturation' entries must be [lo, hi]");
        b.ctrl.saturation.emplace_back(s[0].get<double>(), s[1].get<double>());
    }
    try {
        b.sub.validate();
        b.est.validate(b.sub);
        b.ctrl.validate(b.sub);
    } catch (const Error& e) {
        throw ConfigError("config: invalid block at '" + path + "': " + e.what());
    }
    return b;
}

inline json block_to(const Block& b) {
    json j;
    j["state_dim"] = b.sub.state_dim;
    j["input_dim"] = b.sub.input_dim;
    j["internal_input_dim"] = b.sub.internal_input_dim;
    j["internal_output_dim"] = b.sub.internal_output_dim;
    j["output_dim"] = b.sub.output_dim;
    j["f"] = polys_to(b.sub.f);
    j["h1"] = polys_to(b.sub.h1);
    j["C2"] = matrix_to(b.sub.C2);
    j["sigma1"] = b.sub.sigma1;
    j["sigma2"] = b.sub.sigma2;
    j["X"] = box_to(b.sub.X.boxes.front());
    j["Xa"] = box_to(b.sub.Xa.boxes.front());
    j["Xb"] = region_union_to(b.sub.Xb);
    j["W"] = box_to(b.sub.W);
    j["Y2"] = box_to(b.sub.Y2);
    json est;
    if (b.est.has_matrices()) {
        est["A"] = matrix_to(b.est.A);
        est["B"] = matrix_to(b.est.B);
        est["Aw"] = matrix_to(b.est.Aw);
        est["K"] = matrix_to(b.est.K);
        est["C2"] = matrix_to(b.est.C2);
    }
    if (!b.est.fhat.empty()) est["fhat"] = polys_to(b.est.fhat);
    j["estimator"] = std::move(est);
    json ctrl;
    ctrl["laws"] = polys_to(b.ctrl.laws);
    json sat = json::array();
    for (const auto& [lo, hi] : b.ctrl.saturation) sat.push_back(json::array({lo, hi}));
    ctrl["saturation"] = std::move(sat);
    j["controller"] = std::move(ctrl);
    return j;
}

inline BarrierCertificate barrier_from(const json& j, const std::string& path) {
    expect_keys(j, {"type", "flavor", "B", "alpha", "rho", "kappa_bar", "psi_bar", "gamma_bar",
                    "lambda_bar"},
                path);
    BarrierCertificate c;
    const std::string flavor = get_or<std::string>(j, "flavor", path, "augmented");
    if (flavor == "augmented")
        c.flavor = CertFlavor::Augmented;
    else if (flavor == "estimator")
        c.flavor = CertFlavor::Estimator;
    else
        throw ConfigError("config: '" + path + ".flavor' must be 'augmented' or 'estimator'");
    c.B = poly_from(need(j, "B", path), path + ".B");
    c.alpha = gain_from(need(j, "alpha", path), path + ".alpha");
    if (j.contains("rho")) c.rho = gain_from(j["rho"], path + ".rho");
    c.kappa_bar = get<double>(j, "kappa_bar", path);
    c.psi_bar = get<double>(j, "psi_bar", path);
    c.gamma_bar = get<double>(j, "gamma_bar", path);
    c.lambda_bar = get<double>(j, "lambda_bar", path);
    try {
        c.validate();
    } catch (const Error& e) {
        throw ConfigError("config: invalid certificate at '" + path + "': " + e.what());
    }
    return c;
}

inline json barrier_to(const BarrierCertificate& c) {
    json j;
    j["type"] = "barrier";
    j["flavor"] = c.flavor == CertFlavor::Augmented ? "augmented" : "estimator";
    j["B"] = poly_to(c.B);
    j["alpha"] = gain_to(c.alpha);
    if (!c.rho.is_zero()) j["rho"] = gain_to(c.rho);
    j["kappa_bar"] = c.kappa_bar;
    j["psi_bar"] = c.psi_bar;
    j["gamma_bar"] = c.gamma_bar;
    j["lambda_bar"] = c.lambda_bar;
    return j;
}

inline SimulationCertificate simulation_from(const json& j, const std::string& path) {
    expect_keys(j, {"type", "M", "phi", "eps", "varrho", "mu_bar", "c_bar"}, path);
    SimulationCertificate c;
    if (j.contains("M")) c.M = matrix_from(j["M"], path + ".M");
    if (j.contains("phi")) c.phi = poly_from(j["phi"], path + ".phi");
    if (!j.contains("M") && !j.contains("phi"))
        throw ConfigError("config: '" + path + "' needs 'M' or 'phi'");
    c.eps = gain_from(need(j, "eps", path), path + ".eps");
    if (j.contains("varrho")) c.varrho = gain_from(j["varrho"], path + ".varrho");
    c.mu_bar = get<double>(j, "mu_bar", path);
    c.c_bar = get<double>(j, "c_bar", path);
    try {
        c.validate();
    } catch (const Error& e) {
        throw ConfigError("config: invalid certificate at '" + path + "': " + e.what());
    }
    return c;
}

inline json simulation_to(const SimulationCertificate& c) {
    json j;
    j["type"] = "simulation";
    if (!c.M.empty())
        j["M"] = matrix_to(c.M);
    else
        j["phi"] = poly_to(c.phi);
    j["eps"] = gain_to(c.eps);
    if (!c.varrho.is_zero()) j["varrho"] = gain_to(c.varrho);
    j["mu_bar"] = c.mu_bar;
    j["c_bar"] = c.c_bar;
    return j;
}

}  // namespace cfg_detail

inline ProjectConfig config_from_json(const nlohmann::json& root) {
    using namespace cfg_detail;
    expect_keys(root, {"schema_version", "system", "certificates", "verification", "simulation",
                       "bound"},
                "$");
    ProjectConfig cfg;
    cfg.schema_version = get<int>(root, "schema_version", "$");
    if (cfg.schema_version != 1)
        throw ConfigError("config: unsupported schema_version " +
                          std::to_string(cfg.schema_version));

    const json& sys = need(root, "system", "$");
    expect_keys(sys, {"blocks", "edges", "chain"}, "$.system");
    std::vector<Block> blocks;
    const json& jb = need(sys, "blocks", "$.system");
    if (!jb.is_array() || jb.empty())
        throw ConfigError("config: '$.system.blocks' must be a nonempty array");
    for (std::size_t i = 0; i < jb.size(); ++i) {
        const std::string path = "$.system.blocks[" + std::to_string(i) + "]";
        const int rep = get_or<int>(jb[i], "replicate", path, 1);
        if (rep < 1) throw ConfigError("config: '" + path + ".replicate' must be >= 1");
        Block b = block_from(jb[i], path);
        cfg.replicate_runs.push_back(rep);
        for (int r = 0; r < rep; ++r) blocks.push_back(b);
    }
    std::vector<Edge> edges;
    if (sys.contains("chain")) {
        if (sys.contains("edges"))
            throw ConfigError("config: '$.system' may declare 'edges' or 'chain', not both");
        const json& ch = sys["chain"];
        expect_keys(ch, {"src_offset", "dst_offset", "width"}, "$.system.chain");
        Edge t;
        t.src_offset = get<int>(ch, "src_offset", "$.system.chain");
        t.dst_offset = get<int>(ch, "dst_offset", "$.system.chain");
        t.width = get<int>(ch, "width", "$.system.chain");
        cfg.chain_template = t;
        for (int i = 1; i < int(blocks.size()); ++i)
            edges.push_back(Edge{i - 1, i, t.src_offset, t.dst_offset, t.width});
    } else if (sys.contains("edges")) {
        for (std::size_t i = 0; i < sys["edges"].size(); ++i) {
            const json& je = sys["edges"][i];
            const std::string path = "$.system.edges[" + std::to_string(i) + "]";
            expect_keys(je, {"from", "to", "src_offset", "dst_offset", "width"}, path);
            edges.push_back(Edge{get<int>(je, "from", path), get<int>(je, "to", path),
                                 get_or<int>(je, "src_offset", path, 0),
                                 get_or<int>(je, "dst_offset", path, 0),
                                 get_or<int>(je, "width", path, 1)});
        }
    }
    try {
        cfg.network = build_interconnection(std::move(blocks), std::move(edges));
    } catch (const Error& e) {
        throw ConfigError("config: invalid interconnection: " + std::string(e.what()));
    }

    if (root.contains("certificates")) {
        const json& jc = root["certificates"];
        if (!jc.is_array()) throw ConfigError("config: '$.certificates' must be an array");
        for (std::size_t i = 0; i < jc.size(); ++i) {
            const std::string path = "$.certificates[" + std::to_string(i) + "]";
            const std::string type = get<std::string>(jc[i], "type", path);
            if (type == "barrier") {
                if (cfg.barrier) throw ConfigError("config: multiple barrier certificates");
                cfg.barrier = barrier_from(jc[i], path);
            } else if (type == "simulation") {
                if (cfg.simulation) throw ConfigError("config: multiple simulation certificates");
                cfg.simulation = simulation_from(jc[i], path);
            } else {
                throw ConfigError("config: '" + path + ".type' must be 'barrier' or 'simulation'");
            }
        }
    }

    if (root.contains("verification")) {
        const json& jv = root["verification"];
        expect_keys(jv, {"resolution", "point_cap", "workers", "lipschitz", "accuracy_eps",
                         "pi_tilde"},
                    "$.verification");
        cfg.verification.resolution = get_or<int>(jv, "resolution", "$.verification", 21);
        cfg.verification.point_cap =
            get_or<std::uint64_t>(jv, "point_cap", "$.verification", 250'000'000ull);
        cfg.verification.workers = get_or<int>(jv, "workers", "$.verification", 0);
        cfg.verification.lipschitz = get_or<double>(jv, "lipschitz", "$.verification", 0.0);
        cfg.verification.accuracy_eps = get_or<double>(jv, "accuracy_eps", "$.verification", 0.01);
        cfg.verification.pi_tilde = get_or<double>(jv, "pi_tilde", "$.verification", 1.0);
        if (cfg.verification.resolution < 2)
            throw ConfigError("config: '$.verification.resolution' must be >= 2");
    }

    if (root.contains("simulation")) {
        const json& js = root["simulation"];
        expect_keys(js, {"trials", "horizon", "seed", "init_policy", "grid_points_per_dim",
                         "fixed_point", "estimator_init", "estimator_offset", "unsafe_mode",
                         "workers", "left_domain_is_exit"},
                    "$.simulation");
        cfg.sim.trials = get_or<long>(js, "trials", "$.simulation", 1000);
        cfg.sim.horizon = get_or<long>(js, "horizon", "$.simulation", 10);
        cfg.sim.master_seed = get_or<std::uint64_t>(js, "seed", "$.simulation", 0);
        const std::string ip = get_or<std::string>(js, "init_policy", "$.simulation", "grid");
        if (ip == "fixed")
            cfg.sim.init_policy = InitPolicy::FixedPoint;
        else if (ip == "grid")
            cfg.sim.init_policy = InitPolicy::GridXa;
        else if (ip == "uniform")
            cfg.sim.init_policy = InitPolicy::UniformXa;
        else
            throw ConfigError("config: '$.simulation.init_policy' must be fixed|grid|uniform");
        cfg.sim.grid_points_per_dim =
            get_or<int>(js, "grid_points_per_dim", "$.simulation", 3);
        cfg.sim.fixed_point =
            get_or<std::vector<double>>(js, "fixed_point", "$.simulation", {});
        const std::string ei = get_or<std::string>(js, "estimator_init", "$.simulation", "equal");
        if (ei == "equal")
            cfg.sim.estimator_init = EstimatorInit::EqualToState;
        else if (ei == "offset")
            cfg.sim.estimator_init = EstimatorInit::FixedOffset;
        else if (ei == "uniform")
            cfg.sim.estimator_init = EstimatorInit::UniformXa;
        else
            throw ConfigError("config: '$.simulation.estimator_init' must be equal|offset|uniform");
        cfg.sim.estimator_offset =
            get_or<std::vector<double>>(js, "estimator_offset", "$.simulation", {});
        const std::string um = get_or<std::string>(js, "unsafe_mode", "$.simulation", "product");
        if (um == "product")
            cfg.sim.unsafe_mode = UnsafeMode::Product;
        else if (um == "any")
            cfg.sim.unsafe_mode = UnsafeMode::AnyBlock;
        else
            throw ConfigError("config: '$.simulation.unsafe_mode' must be product|any");
        cfg.sim.workers = get_or<int>(js, "workers", "$.simulation", 0);
        cfg.sim.left_domain_is_exit =
            get_or<bool>(js, "left_domain_is_exit", "$.simulation", true);
        try {
            cfg.sim.validate();
        } catch (const Error& e) {
            throw ConfigError("config: invalid simulation section: " + std::string(e.what()));
        }
    }

    if (root.contains("bound")) {
        const json& jb2 = root["bound"];
        expect_keys(jb2, {"horizon", "eps", "phi0"}, "$.bound");
        cfg.bound.horizon = get_or<long>(jb2, "horizon", "$.bound", 10);
        cfg.bound.eps = get_or<double>(jb2, "eps", "$.bound", 0.01);
        cfg.bound.phi0 = get_or<double>(jb2, "phi0", "$.bound", 0.0);
        if (cfg.bound.horizon < 0) throw ConfigError("config: '$.bound.horizon' must be >= 0");
    }
    return cfg;
}

inline nlohmann::json config_to_json(const ProjectConfig& cfg) {
    using namespace cfg_detail;
    json root;
    root["schema_version"] = cfg.schema_version;
    // Re-compress identical consecutive blocks with replicate counts.
    json jblocks = json::array();
    std::size_t pos = 0;
    std::vector<int> runs = cfg.replicate_runs;
    if (runs.empty()) {
        int i = 0;
        while (i < int(cfg.network.blocks.size())) {
            int r = 1;
            json me = block_to(cfg.network.blocks[i]);
            while (i + r < int(cfg.network.blocks.size()) &&
                   block_to(cfg.network.blocks[i + r]) == me)
                ++r;
            runs.push_back(r);
            i += r;
        }
    }
    for (int r : runs) {
        json jb = block_to(cfg.network.blocks[pos]);
        if (r > 1) jb["replicate"] = r;
        jblocks.push_back(std::move(jb));
        pos += r;
    }
    json sys;
    sys["blocks"] = std::move(jblocks);
    if (cfg.chain_template) {
        sys["chain"] = json{{"src_offset", cfg.chain_template->src_offset},
                            {"dst_offset", cfg.chain_template->dst_offset},
                            {"width", cfg.chain_template->width}};
    } else if (!cfg.network.edges.empty()) {
        json je = json::array();
        for (const auto& e : cfg.network.edges)
            je.push_back(json{{"from", e.from},
                              {"to", e.to},
                              {"src_offset", e.src_offset},
                              {"dst_offset", e.dst_offset},
                              {"width", e.width}});
        sys["edges"] = std::move(je);
    }
    root["system"] = std::move(sys);
    json certs = json::array();
    if (cfg.barrier) certs.push_back(barrier_to(*cfg.barrier));
    if (cfg.simulation) certs.push_back(simulation_to(*cfg.simulation));
    if (!certs.empty()) root["certificates"] = std::move(certs);
    root["verification"] = json{{"resolution", cfg.verification.resolution},
                                {"point_cap", cfg.verification.point_cap},
                                {"workers", cfg.verification.workers},
                                {"lipschitz", cfg.verification.lipschitz},
                                {"accuracy_eps", cfg.verification.accuracy_eps},
                                {"pi_tilde", cfg.verification.pi_tilde}};
    json js;
    js["trials"] = cfg.sim.trials;
    js["horizon"] = cfg.sim.horizon;
    js["seed"] = cfg.sim.master_seed;
    js["init_policy"] = cfg.sim.init_policy == InitPolicy::FixedPoint   ? "fixed"
                        : cfg.sim.init_policy == InitPolicy::GridXa     ? "grid"
                                                                        : "uniform";
    js["grid_points_per_dim"] = cfg.sim.grid_points_per_dim;
    if (!cfg.sim.fixed_point.empty()) js["fixed_point"] = cfg.sim.fixed_point;
    js["estimator_init"] = cfg.sim.estimator_init == EstimatorInit::EqualToState ? "equal"
                           : cfg.sim.estimator_init == EstimatorInit::FixedOffset ? "offset"
                                                                                  : "uniform";
    if (!cfg.sim.estimator_offset.empty()) js["estimator_offset"] = cfg.sim.estimator_offset;
    js["unsafe_mode"] = cfg.sim.unsafe_mode == UnsafeMode::Product ? "product" : "any";
    js["workers"] = cfg.sim.workers;
    js["left_domain_is_exit"] = cfg.sim.left_domain_is_exit;
    root["simulation"] = std::move(js);
    root["bound"] = json{{"horizon", cfg.bound.horizon},
                         {"eps", cfg.bound.eps},
                         {"phi0", cfg.bound.phi0}};
    return root;
}

inline std::string config_hash(const nlohmann::json& j);

inline ProjectConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse error in '" + path + "': " + e.what());
    }
    ProjectConfig cfg = config_from_json(root);
    cfg.source_hash = config_hash(root);
    return cfg;
}

// Stable 64-bit FNV-1a over the canonical (sorted-key) dump.
inline std::string config_hash(const nlohmann::json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace posafe
