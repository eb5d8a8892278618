#pragma once

#include <json.hpp>

#include "constrank/regularity.hpp"

namespace constrank {

using nlohmann::json;

inline json to_json(const RankReport& r) {
    json j;
    j["is_constant_rank"] = r.is_constant_rank;
    j["rank"] = r.rank;
    j["samples_checked"] = r.samples.size();
    if (r.witness) {
        auto w = json::array();
        for (int i = 0; i < r.witness->size(); ++i) w.push_back((*r.witness)[i]);
        j["witness"] = w;
    }
    return j;
}

inline json to_json(const MinimizerResult& r, bool with_history = false) {
    json j;
    j["energy"] = r.energy;
    j["el_residual"] = r.el_residual;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    if (with_history) {
        auto h = json::array();
        for (const auto& e : r.history)
            h.push_back({{"energy", e.energy}, {"residual", e.residual}, {"step", e.step}});
        j["history"] = h;
    }
    return j;
}

inline json to_json(const InequalityReport& r) {
    json j;
    j["name"] = r.name;
    j["lhs"] = r.lhs;
    j["rhs"] = r.rhs;
    j["ratio"] = r.ratio;
    j["pass"] = r.pass;
    j["cap"] = r.cap;
    j["radius"] = r.radius;
    if (r.theta > 0) j["theta"] = r.theta;
    if (r.q > 0) j["q"] = r.q;
    if (r.p > 0) j["p"] = r.p;
    j["pi_info"] = r.pi_info;
    return j;
}

inline json to_json(const ExcessReport& r) {
    json j;
    auto c = json::array();
    for (int i = 0; i < r.center.size(); ++i) c.push_back(r.center[i]);
    j["center"] = c;
    j["alpha"] = r.alpha;
    j["tau"] = r.tau;
    auto scan = json::array();
    for (const auto& e : r.scan) scan.push_back({{"radius", e.radius}, {"excess", e.value}});
    j["scan"] = scan;
    j["fitted_exponent"] = r.fitted_exponent;
    j["step_decay_ok"] = r.step_decay_ok;
    j["smallness_ok"] = r.smallness_ok;
    j["regular_regime"] = r.regular_regime;
    return j;
}

inline json to_json(const HarmonicApproxReport& r) {
    json j;
    j["gamma"] = r.gamma;
    j["delta"] = r.delta_measured;
    j["modular_distance"] = r.modular_distance;
    j["h_energy"] = r.h_energy;
    j["k_bound"] = r.k_bound;
    j["hypotheses_hold"] = r.hypotheses_hold;
    return j;
}

inline json to_json(const MeanBound& r) {
    return json{{"lhs", r.lhs}, {"rhs", r.rhs}, {"e", r.e}};
}

/// One integrand-probe outcome, e.g. a derivative-consistency or
/// quasiconvexity margin measurement.
struct ProbeRecord {
    std::string probe;
    double value = 0;
    double tolerance = 0;
    bool pass = false;
};

inline json to_json(const ProbeRecord& r) {
    return json{{"probe", r.probe}, {"value", r.value}, {"tolerance", r.tolerance},
                {"pass", r.pass}};
}

}  // namespace constrank
