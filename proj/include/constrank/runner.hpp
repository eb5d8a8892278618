#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include "constrank/reports.hpp"

namespace constrank {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config parsing helpers
// ---------------------------------------------------------------------------

inline GridSpec grid_from_json(const json& j) {
    GridSpec g;
    g.dim_n = j.at("dim_n").get<int>();
    g.points_per_axis = j.at("points_per_axis").get<int>();
    g.period = j.value("period", 1.0);
    g.validate();
    return g;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

inline Integrand integrand_from_json(const json& j) {
    std::string family = j.at("family").get<std::string>();
    int fiber = j.at("fiber").get<int>();
    double ell = j.value("ell", 1.0);
    if (family == "ellE") return make_ell_e(ell, fiber);
    if (family == "perturbed") return make_perturbed(ell, j.value("mu", 0.1), fiber);
    if (family == "xdep") return make_xdep(ell, j.value("amp", 0.3), fiber);
    if (family == "offset") {
        Integrand base = integrand_from_json(j.at("base"));
        double amp = j.value("amp", 0.2);
        int fib = base.fiber_dim;
        auto s = [amp, fib](const Eigen::VectorXd& x) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(fib);
            for (int c = 0; c < fib; ++c)
                v[c] = amp * std::sin(2 * std::numbers::pi * (x[c % x.size()] + 0.25 * c));
            return v;
        };
        return make_offset(base, s, amp * std::sqrt(double(fib)));
    }
    throw ConfigError("unknown integrand family: " + family);
}

/// Field construction from config: seeded band-limited noise, constants,
/// two-phase splits, file dumps, or B-images of seeded potentials.
inline PeriodicField field_from_json(const json& j, const GridSpec& grid, uint64_t seed) {
    std::string source = j.at("source").get<std::string>();
    if (source == "seeded") {
        return seeded_trig_field(grid, j.at("fiber").get<int>(), j.value("max_freq", 4),
                                 j.value("amplitude", 1.0), j.value("seed", seed));
    }
    if (source == "constant") return PeriodicField::constant(grid, vector_from_json(j.at("value")));
    if (source == "two_phase")
        return two_phase_field(grid, vector_from_json(j.at("a")), vector_from_json(j.at("b")),
                               j.value("axis", 0));
    if (source == "file") return load_field(j.at("path").get<std::string>());
    if (source == "b_image") {
        DiffOperator op = operator_from_json(j.at("operator"), grid.dim_n);
        PeriodicField pot = seeded_trig_field(grid, op.dim_from, j.value("max_freq", 4),
                                              j.value("amplitude", 1.0), j.value("seed", seed));
        return apply_operator(op, pot);
    }
    throw ConfigError("unknown field source: " + source);
}

// ---------------------------------------------------------------------------
// Run record
// ---------------------------------------------------------------------------

struct RunRecord {
    json body;    // deterministic given (config, seed)
    json meta;    // wall time; excluded from determinism
    bool pass = false;

    json full() const {
        json j = body;
        j["meta"] = meta;
        return j;
    }
};

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string config_hash(const json& config) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config.dump())));
    return buf;
}

namespace detail {

inline DiffOperator operator_arg(const json& config, const char* key, int dim_n) {
    return operator_from_json(config.at(key), dim_n);
}

inline json run_rank_check(const json& config, uint64_t seed) {
    int dim = config.value("dim_n", 3);
    DiffOperator op = operator_arg(config, "operator", dim);
    RankReport r = check_constant_rank(op, config.value("samples", 200), seed);
    json rep = to_json(r);
    rep["operator"] = op.name.empty() ? "custom" : op.name;
    rep["pass"] = true;  // informational command; failures are exceptions
    return rep;
}

inline json run_potential(const json& config, uint64_t seed) {
    int dim = config.value("dim_n", 3);
    DiffOperator op = operator_arg(config, "operator", dim);
    RankReport rr = check_constant_rank(op, config.value("samples", 200), seed);
    if (!rr.is_constant_rank) throw NotConstantRank("operator fails the constant rank test");
    auto [cs, cop] = build_potential(op, rr.rank);
    PolyMatrix comp = symbol_of(op).mat * cs.mat;
    json rep;
    rep["rank"] = rr.rank;
    rep["potential_order"] = cs.homogeneity_degree;
    rep["potential_is_zero"] = cs.mat.is_zero();
    rep["composition_vanishes"] = comp.is_zero();
    if (!cs.mat.is_zero()) rep["potential_operator"] = operator_to_json(cop);
    rep["pass"] = comp.is_zero();
    return rep;
}

inline json run_project(const json& config, uint64_t seed) {
    GridSpec grid = grid_from_json(config.at("grid"));
    auto opA = OperatorCalculus::make(operator_arg(config, "operator_a", grid.dim_n));
    PeriodicField f = field_from_json(config.at("field"), grid, seed);
    PeriodicField p = project_afree(opA, f);
    PeriodicField pp = project_afree(opA, p);
    json rep;
    rep["residual_sup"] = apply_operator(opA.op, p).sup_norm();
    rep["idempotence_err"] =
        (pp - p).l2_norm() / std::max(1e-30, p.l2_norm());
    rep["energy_split_err"] = std::abs(f.l2_norm() * f.l2_norm() -
                                       p.l2_norm() * p.l2_norm() -
                                       (f - p).l2_norm() * (f - p).l2_norm()) /
                              std::max(1e-30, f.l2_norm() * f.l2_norm());
    rep["pass"] = rep["residual_sup"].get<double>() < config.value("tol", 1e-10);
    if (config.contains("dump")) save_field(p, config.at("dump").get<std::string>());
    return rep;
}

inline json run_decompose(const json& config, uint64_t seed) {
    GridSpec grid = grid_from_json(config.at("grid"));
    auto opA = OperatorCalculus::make(operator_arg(config, "operator_a", grid.dim_n));
    auto opB = OperatorCalculus::make(operator_arg(config, "operator_b", grid.dim_n));
    PeriodicField f = field_from_json(config.at("field"), grid, seed);
    if (config.value("project_first", false)) f = project_afree(opA, f);
    Decomposition d = decompose(opA, opB, f, config.value("tol", 1e-8));
    PeriodicField recon = apply_operator(opB.op, d.u) + d.s;
    Eigen::VectorXd mean = f.mean();
    json rep;
    rep["reconstruction_err"] = (recon - f).sup_norm();
    rep["s_nonconstant_part"] =
        (d.s - PeriodicField::constant(grid, d.s.mean())).sup_norm();
    rep["u_mean_norm"] = d.u.mean().norm();
    auto m = json::array();
    for (int i = 0; i < mean.size(); ++i) m.push_back(mean[i]);
    rep["field_mean"] = m;
    rep["pass"] = rep["reconstruction_err"].get<double>() < 1e-9;
    return rep;
}

inline json run_minimize(const json& config, uint64_t seed) {
    MinimizeProblem p;
    p.grid = grid_from_json(config.at("grid"));
    p.integrand = integrand_from_json(config.at("integrand"));
    std::string branch = config.value("branch", "afree");
    p.kind = branch == "potential" ? MinimizeProblem::Kind::potential
                                   : MinimizeProblem::Kind::afree;
    p.constraint_op = operator_arg(config, "operator", p.grid.dim_n);
    p.mean = vector_from_json(config.at("mean"));
    if (config.contains("init")) p.init = field_from_json(config.at("init"), p.grid, seed);
    MinimizeOptions opts;
    opts.tol = config.value("tol", 1e-8);
    opts.max_iter = config.value("max_iter", 20000);
    MinimizerResult r = minimize(p, opts);
    json rep = to_json(r, config.value("with_history", false));
    rep["pass"] = r.converged;
    if (config.contains("dump")) save_field(r.field, config.at("dump").get<std::string>());
    return rep;
}

inline json run_verify_poincare(const json& config, uint64_t seed, bool korn) {
    GridSpec grid = grid_from_json(config.at("grid"));
    auto opB = OperatorCalculus::make(operator_arg(config, "operator_b", grid.dim_n));
    std::optional<DiffOperator> opC;
    if (config.contains("operator_c")) {
        if (config.at("operator_c").is_string() &&
            config.at("operator_c").get<std::string>() == "auto") {
            auto [cs, cop] = build_potential(opB.op, opB.rank);
            if (!cs.mat.is_zero()) opC = cop;
        } else {
            opC = operator_arg(config, "operator_c", grid.dim_n);
        }
    }
    PeriodicField u = field_from_json(config.at("field"), grid, seed);
    if (config.value("project_cstar", false)) {
        SpectralProjector star(row_space_projector(opB.op, opB.dagger), grid,
                               opB.op.dim_from, SpectralProjector::ZeroMode::identity);
        u = star.apply(u);
    }
    Eigen::VectorXd x0 = vector_from_json(config.at("center"));
    double radius = config.at("radius").get<double>();
    double theta = config.value("theta", 0.5);
    PoincareOptions opts;
    opts.cap = config.value("cap", 1e6);
    if (config.contains("kernel_degree")) opts.kernel_degree = config.at("kernel_degree");
    InequalityReport rep =
        korn ? verify_korn_vp(u, opB, opC ? &*opC : nullptr, x0, radius, theta,
                              config.value("p", 2.0), opts)
             : verify_poincare_modular(u, opB, opC ? &*opC : nullptr, x0, radius, theta,
                                       config.value("q", 1.2), opts);
    json j = to_json(rep);
    j["pass"] = rep.pass;
    return j;
}

inline json run_verify_caccioppoli(const json& config, uint64_t seed) {
    GridSpec grid = grid_from_json(config.at("grid"));
    auto opB = OperatorCalculus::make(operator_arg(config, "operator_b", grid.dim_n));
    Integrand f = integrand_from_json(config.at("integrand"));
    Eigen::VectorXd x0 = vector_from_json(config.at("center"));
    double radius = config.at("radius").get<double>();

    PeriodicField u = PeriodicField::zero(grid, opB.op.dim_from);
    PolyField tail = PolyField::zero(grid.dim_n, opB.op.dim_from, x0);
    if (config.contains("minimize")) {
        const json& mc = config.at("minimize");
        MinimizeProblem p;
        p.grid = grid;
        p.integrand = f;
        p.kind = MinimizeProblem::Kind::potential;
        p.constraint_op = opB.op;
        p.mean = vector_from_json(mc.at("mean"));
        if (mc.contains("init")) p.init = field_from_json(mc.at("init"), grid, seed);
        MinimizeOptions opts;
        opts.tol = mc.value("tol", 1e-8);
        opts.max_iter = mc.value("max_iter", 20000);
        MinimizerResult r = minimize(p, opts);
        PeriodicField osc = r.field - PeriodicField::constant(grid, p.mean);
        u = apply_dagger(opB.op, opB.dagger, osc);
        tail = fit_polynomial(p.mean, opB.op, x0);
    } else {
        u = field_from_json(config.at("field"), grid, seed);
        if (config.contains("tail_average"))
            tail = fit_polynomial(vector_from_json(config.at("tail_average")), opB.op, x0);
    }
    CaccioppoliOptions opts;
    opts.cap = config.value("cap", 1e6);
    opts.extremality_tol = config.value("extremality_tol", 1e-4);
    InequalityReport rep = verify_caccioppoli(u, tail, f, opB, x0, radius, opts);
    json j = to_json(rep);
    j["pass"] = rep.pass;
    return j;
}

inline json run_excess_scan(const json& config, uint64_t seed) {
    GridSpec grid = grid_from_json(config.at("grid"));
    PeriodicField w = field_from_json(config.at("field"), grid, seed);
    double r0 = config.at("r0").get<double>();
    double tau = config.value("tau", 1.0 / 20.0);
    int depth = config.value("depth", 1);
    double alpha = config.value("alpha", 0.3);
    double smallness = config.value("smallness", std::pow(r0, 2 * alpha) + 0.2);
    json reports = json::array();
    bool all_regular = true;
    for (const auto& c : config.at("centers")) {
        ExcessReport rep =
            excess_scan(w, vector_from_json(c), r0, tau, depth, alpha, smallness);
        all_regular = all_regular && rep.regular_regime;
        reports.push_back(to_json(rep));
    }
    json j;
    j["centers"] = reports;
    j["all_regular"] = all_regular;
    j["pass"] = config.value("expect_regular", true) ? all_regular : !all_regular;
    return j;
}

inline json run_harmonic_approx(const json& config, uint64_t seed) {
    GridSpec grid = grid_from_json(config.at("grid"));
    auto opB = OperatorCalculus::make(operator_arg(config, "operator_b", grid.dim_n));
    DiffOperator opC;
    if (config.value("operator_c", std::string("auto")) == "auto") {
        auto [cs, cop] = build_potential(opB.op, opB.rank);
        if (!cs.mat.is_zero()) opC = cop;
    }
    WaveConeReport cone =
        wave_cone_sample(operator_arg(config, "operator_a", grid.dim_n), 40, seed);
    Eigen::MatrixXd a = config.contains("form")
                            ? [&] {
                                  const auto& rows = config.at("form");
                                  Eigen::MatrixXd m(rows.size(), rows[0].size());
                                  for (size_t i = 0; i < rows.size(); ++i)
                                      for (size_t jj = 0; jj < rows[i].size(); ++jj)
                                          m(static_cast<int>(i), static_cast<int>(jj)) =
                                              rows[i][jj].get<double>();
                                  return m;
                              }()
                            : Eigen::MatrixXd::Identity(opB.op.dim_to, opB.op.dim_to).eval();
    BilinearFormA form = BilinearFormA::make(a, cone);
    PeriodicField w = field_from_json(config.at("field"), grid, seed);
    if (config.value("project_cstar", true)) {
        SpectralProjector star(row_space_projector(opB.op, opB.dagger), grid,
                               opB.op.dim_from, SpectralProjector::ZeroMode::identity);
        w = star.apply(w);
    }
    HarmonicApproxConfig cfg;
    cfg.cutoff = config.value("cutoff", 3);
    cfg.dirs_per_scale = config.value("dirs_per_scale", 10);
    cfg.k_bound = config.value("k_bound", 100.0);
    cfg.seed = seed;
    HarmonicApproxReport rep = harmonic_approx_experiment(
        w, form, opB, opC, vector_from_json(config.at("center")),
        config.at("radius").get<double>(), config.value("gamma", 1.0), cfg);
    json j = to_json(rep);
    j["pass"] = rep.h_energy <= rep.k_bound;
    return j;
}

}  // namespace detail

/// Dispatch one configuration; the returned record body is deterministic
/// for a fixed (config, seed) pair.
inline RunRecord run(const json& config) {
    auto t0 = std::chrono::steady_clock::now();
    if (!config.contains("command")) throw ConfigError("config is missing 'command'");
    std::string command = config.at("command").get<std::string>();
    uint64_t seed = config.value("seed", uint64_t(0));

    json report;
    if (command == "rank-check")
        report = detail::run_rank_check(config, seed);
    else if (command == "potential")
        report = detail::run_potential(config, seed);
    else if (command == "project")
        report = detail::run_project(config, seed);
    else if (command == "decompose")
        report = detail::run_decompose(config, seed);
    else if (command == "minimize")
        report = detail::run_minimize(config, seed);
    else if (command == "verify-poincare")
        report = detail::run_verify_poincare(config, seed, false);
    else if (command == "verify-korn")
        report = detail::run_verify_poincare(config, seed, true);
    else if (command == "verify-caccioppoli")
        report = detail::run_verify_caccioppoli(config, seed);
    else if (command == "excess-scan")
        report = detail::run_excess_scan(config, seed);
    else if (command == "harmonic-approx")
        report = detail::run_harmonic_approx(config, seed);
    else
        throw ConfigError("unknown command: " + command);

    RunRecord record;
    record.pass = report.value("pass", true);
    record.body["command"] = command;
    record.body["config_hash"] = config_hash(config);
    record.body["version"] = kVersion;
    record.body["seed"] = seed;
    record.body["report"] = report;
    record.body["pass"] = record.pass;
    auto t1 = std::chrono::steady_clock::now();
    record.meta["wall_time_s"] = std::chrono::duration<double>(t1 - t0).count();
    return record;
}

struct BatchSummary {
    std::vector<RunRecord> records;
    int pass_count = 0;
    bool pass = false;

    json body() const {
        json j;
        j["command"] = "batch";
        auto arr = json::array();
        for (const auto& r : records) arr.push_back(r.body);
        j["runs"] = arr;
        j["pass_count"] = pass_count;
        j["total"] = records.size();
        j["pass"] = pass;
        return j;
    }
};

inline BatchSummary batch(const json& manifest) {
    const json& runs = manifest.contains("runs") ? manifest.at("runs") : manifest;
    if (!runs.is_array() || runs.empty())
        throw ConfigError("batch manifest must contain a nonempty 'runs' array");
    BatchSummary summary;
    for (const auto& c : runs) {
        summary.records.push_back(run(c));
        if (summary.records.back().pass) ++summary.pass_count;
    }
    summary.pass = summary.pass_count == static_cast<int>(summary.records.size());
    return summary;
}

/// CSV matrix: one row per run, columns are the union of numeric metrics
/// appearing in the reports.
inline std::string batch_csv(const BatchSummary& summary) {
    std::set<std::string> columns;
    for (const auto& r : summary.records)
        for (const auto& [key, value] : r.body.at("report").items())
            if ((value.is_number() || value.is_boolean()) && key != "pass")
                columns.insert(key);
    std::string out = "run,command,pass";
    for (const auto& c : columns) out += "," + c;
    out += "\n";
    for (size_t i = 0; i < summary.records.size(); ++i) {
        const auto& r = summary.records[i];
        out += std::to_string(i) + "," + r.body.at("command").get<std::string>() + "," +
               (r.pass ? "1" : "0");
        for (const auto& c : columns) {
            out += ",";
            const auto& rep = r.body.at("report");
            if (rep.contains(c) && (rep.at(c).is_number() || rep.at(c).is_boolean()))
                out += rep.at(c).dump();
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Minimal structural schema validation (type / required / properties /
// items / enum), enough for the shipped record schema.
// ---------------------------------------------------------------------------

inline bool validate_against_schema(const json& doc, const json& schema, std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (schema.contains("type")) {
        std::string t = schema.at("type").get<std::string>();
        bool ok = (t == "object" && doc.is_object()) || (t == "array" && doc.is_array()) ||
                  (t == "string" && doc.is_string()) || (t == "number" && doc.is_number()) ||
                  (t == "integer" && doc.is_number_integer()) ||
                  (t == "boolean" && doc.is_boolean());
        if (!ok) return fail("type mismatch: expected " + t);
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& v : schema.at("enum")) ok = ok || v == doc;
        if (!ok) return fail("value not in enum");
    }
    if (schema.contains("required"))
        for (const auto& k : schema.at("required"))
            if (!doc.contains(k.get<std::string>()))
                return fail("missing required key: " + k.get<std::string>());
    if (schema.contains("properties") && doc.is_object())
        for (const auto& [k, sub] : schema.at("properties").items())
            if (doc.contains(k) && !validate_against_schema(doc.at(k), sub, why)) return false;
    if (schema.contains("items") && doc.is_array())
        for (const auto& item : doc)
            if (!validate_against_schema(item, schema.at("items"), why)) return false;
    return true;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << text;
}

}  // namespace constrank
