#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopsafe/common.hpp"
#include "koopsafe/control.hpp"
#include "koopsafe/observables.hpp"
#include "koopsafe/plant.hpp"
#include "koopsafe/safety.hpp"

namespace koopsafe {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object())
        throw ConfigError(format_msg("config section '", where,
                                     "' must be an object"));
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError(format_msg("unknown key '", key, "' in ", where));
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key))
        throw ConfigError(format_msg("missing key '", key, "' in ", where));
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(format_msg("bad value for '", key, "' in ", where,
                                     ": ", e.what()));
    }
}

}  // namespace detail

struct BasisConfig {
    std::string family = "sinusoid";  // sinusoid | monomial
    std::vector<int> harmonics = {1, 2};
    std::vector<int> states = {0, 1, 2, 3};
    bool include_constant = true;
    int degree = 2;  // monomial family only

    BasisSet build(int state_dim) const {
        if (family == "sinusoid")
            return BasisSet::sinusoids(
                std::set<int>(harmonics.begin(), harmonics.end()), states,
                state_dim, include_constant);
        if (family == "monomial")
            return BasisSet::monomials(state_dim, degree, states);
        throw ConfigError(format_msg("unknown basis family '", family, "'"));
    }
};

struct AdaptationConfig {
    double target_T = 0.12;  // settling time the gain is sized for (s)
    double a = 1.0;
    double b = 1.0;
    double w = 4.0;
    double s = 1.0;
    double nu_floor = kNuFloor;
    double refit_period = 0.5;  // batch baseline refit interval (s)
};

struct SafetyConfig {
    std::vector<ObstacleCbf> obstacles = {{-2.5, 0.0, 1.5}, {2.0, -1.0, 1.5}};
    double k1 = 1.0;
    double alpha_gain = 1.0;
    double omega = 1.0;  // Omega = omega * I
};

struct IntegrationConfig {
    double dt = 1e-3;
    double horizon = 20.0;
    IntegrationMethod method = IntegrationMethod::Rk4;
    int decimation = 10;  // CSV output keeps every decimation-th row
};

struct ScenarioConfig {
    int schema_version = kSchemaVersion;
    Vector z0 = (Vector(4) << 0.0, 0.0, 0.8 * kPi, 0.8 * kPi).finished();
    WindField wind;
    NoiseModel noise{0.005, 0.02, 1};
    BasisConfig basis;
    AdaptationConfig adaptation;
    SafetyConfig safety;
    ControllerConfig controller;
    Reference reference;
    IntegrationConfig integration;

    void validate() const {
        if (z0.size() != DoubleIntegrator::n)
            throw ConfigError("plant.z0 must have 4 entries");
        if (!(integration.dt > 0.0) || !(integration.horizon > 0.0))
            throw ConfigError("integration.dt and horizon must be positive");
        if (integration.decimation < 1)
            throw ConfigError("integration.decimation must be >= 1");
        if (safety.obstacles.empty())
            throw ConfigError("safety.obstacles must be nonempty");
        for (auto obs : safety.obstacles) {
            obs.k1 = safety.k1;
            obs.alpha_gain = safety.alpha_gain;
            obs.validate();
        }
        noise.validate();
    }

    // Obstacles with the section-level gains applied.
    std::vector<ObstacleCbf> obstacles() const {
        std::vector<ObstacleCbf> out = safety.obstacles;
        for (auto& o : out) {
            o.k1 = safety.k1;
            o.alpha_gain = safety.alpha_gain;
        }
        return out;
    }
};

inline json to_json(const ScenarioConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["plant"] = {{"z0", std::vector<double>(c.z0.data(),
                                             c.z0.data() + c.z0.size())}};
    j["wind"] = {{"amp_x", c.wind.amp_x},       {"amp_y", c.wind.amp_y},
                 {"k1", c.wind.k1},             {"k2", c.wind.k2},
                 {"k3", c.wind.k3},             {"k4", c.wind.k4},
                 {"mean_x", c.wind.mean_x},     {"mean_y", c.wind.mean_y},
                 {"drag_coeff", c.wind.drag_coeff}, {"D", c.wind.D}};
    j["noise"] = {{"sigma_x", c.noise.sigma_x},
                  {"sigma_xdot", c.noise.sigma_xdot},
                  {"seed", c.noise.seed}};
    json basis = {{"family", c.basis.family}, {"states", c.basis.states}};
    if (c.basis.family == "sinusoid") {
        basis["harmonics"] = c.basis.harmonics;
        basis["include_constant"] = c.basis.include_constant;
    } else {
        basis["degree"] = c.basis.degree;
    }
    j["basis"] = basis;
    j["adaptation"] = {{"target_T", c.adaptation.target_T},
                       {"a", c.adaptation.a},
                       {"b", c.adaptation.b},
                       {"w", c.adaptation.w},
                       {"s", c.adaptation.s},
                       {"nu_floor", c.adaptation.nu_floor},
                       {"refit_period", c.adaptation.refit_period}};
    json obstacles = json::array();
    for (const auto& o : c.safety.obstacles)
        obstacles.push_back(
            {{"cx", o.cx}, {"cy", o.cy}, {"radius", o.radius}});
    j["safety"] = {{"obstacles", obstacles},
                   {"k1", c.safety.k1},
                   {"alpha_gain", c.safety.alpha_gain},
                   {"omega", c.safety.omega}};
    json controller = {{"kp", c.controller.kp},
                       {"kd", c.controller.kd},
                       {"allow_slack", c.controller.allow_slack},
                       {"slack_weight", c.controller.slack_weight},
                       {"qp_max_iterations", c.controller.qp_max_iterations}};
    if (c.controller.u_max.has_value()) controller["u_max"] = *c.controller.u_max;
    j["controller"] = controller;
    j["reference"] = {{"amplitude", c.reference.amplitude},
                      {"omega", c.reference.omega}};
    j["integration"] = {
        {"dt", c.integration.dt},
        {"horizon", c.integration.horizon},
        {"method",
         c.integration.method == IntegrationMethod::Rk4 ? "rk4" : "euler"},
        {"decimation", c.integration.decimation}};
    return j;
}

inline ScenarioConfig parse_config(const json& j) {
    using detail::check_keys;
    using detail::require;

    check_keys(j,
               {"schema_version", "plant", "wind", "noise", "basis",
                "adaptation", "safety", "controller", "reference",
                "integration"},
               "config");
    ScenarioConfig c;
    c.schema_version = require<int>(j, "schema_version", "config");
    if (c.schema_version != kSchemaVersion)
        throw ConfigError(format_msg("unsupported schema_version ",
                                     c.schema_version, ", expected ",
                                     kSchemaVersion));

    const json& plant = j.at("plant");
    check_keys(plant, {"z0"}, "plant");
    auto z0 = require<std::vector<double>>(plant, "z0", "plant");
    c.z0 = Eigen::Map<Vector>(z0.data(), static_cast<Eigen::Index>(z0.size()));

    const json& wind = j.at("wind");
    check_keys(wind,
               {"amp_x", "amp_y", "k1", "k2", "k3", "k4", "mean_x", "mean_y",
                "drag_coeff", "D"},
               "wind");
    c.wind.amp_x = require<double>(wind, "amp_x", "wind");
    c.wind.amp_y = require<double>(wind, "amp_y", "wind");
    c.wind.k1 = require<double>(wind, "k1", "wind");
    c.wind.k2 = require<double>(wind, "k2", "wind");
    c.wind.k3 = require<double>(wind, "k3", "wind");
    c.wind.k4 = require<double>(wind, "k4", "wind");
    c.wind.mean_x = require<double>(wind, "mean_x", "wind");
    c.wind.mean_y = require<double>(wind, "mean_y", "wind");
    c.wind.drag_coeff = require<double>(wind, "drag_coeff", "wind");
    c.wind.D = require<double>(wind, "D", "wind");

    const json& noise = j.at("noise");
    check_keys(noise, {"sigma_x", "sigma_xdot", "seed"}, "noise");
    c.noise.sigma_x = require<double>(noise, "sigma_x", "noise");
    c.noise.sigma_xdot = require<double>(noise, "sigma_xdot", "noise");
    c.noise.seed = require<std::uint64_t>(noise, "seed", "noise");

    const json& basis = j.at("basis");
    check_keys(basis,
               {"family", "harmonics", "states", "include_constant", "degree"},
               "basis");
    c.basis.family = require<std::string>(basis, "family", "basis");
    c.basis.states = require<std::vector<int>>(basis, "states", "basis");
    if (c.basis.family == "sinusoid") {
        c.basis.harmonics =
            require<std::vector<int>>(basis, "harmonics", "basis");
        c.basis.include_constant =
            require<bool>(basis, "include_constant", "basis");
    } else if (c.basis.family == "monomial") {
        c.basis.degree = require<int>(basis, "degree", "basis");
    } else {
        throw ConfigError(format_msg("unknown basis family '", c.basis.family,
                                     "'"));
    }

    const json& adapt = j.at("adaptation");
    check_keys(adapt, {"target_T", "a", "b", "w", "s", "nu_floor",
                       "refit_period"},
               "adaptation");
    c.adaptation.target_T = require<double>(adapt, "target_T", "adaptation");
    c.adaptation.a = require<double>(adapt, "a", "adaptation");
    c.adaptation.b = require<double>(adapt, "b", "adaptation");
    c.adaptation.w = require<double>(adapt, "w", "adaptation");
    c.adaptation.s = require<double>(adapt, "s", "adaptation");
    c.adaptation.nu_floor = require<double>(adapt, "nu_floor", "adaptation");
    c.adaptation.refit_period =
        require<double>(adapt, "refit_period", "adaptation");

    const json& safety = j.at("safety");
    check_keys(safety, {"obstacles", "k1", "alpha_gain", "omega"}, "safety");
    c.safety.obstacles.clear();
    for (const json& o : safety.at("obstacles")) {
        check_keys(o, {"cx", "cy", "radius"}, "safety.obstacles");
        ObstacleCbf obs;
        obs.cx = require<double>(o, "cx", "obstacle");
        obs.cy = require<double>(o, "cy", "obstacle");
        obs.radius = require<double>(o, "radius", "obstacle");
        c.safety.obstacles.push_back(obs);
    }
    c.safety.k1 = require<double>(safety, "k1", "safety");
    c.safety.alpha_gain = require<double>(safety, "alpha_gain", "safety");
    c.safety.omega = require<double>(safety, "omega", "safety");

    const json& ctrl = j.at("controller");
    check_keys(ctrl,
               {"kp", "kd", "u_max", "allow_slack", "slack_weight",
                "qp_max_iterations"},
               "controller");
    c.controller.kp = require<double>(ctrl, "kp", "controller");
    c.controller.kd = require<double>(ctrl, "kd", "controller");
    if (ctrl.contains("u_max"))
        c.controller.u_max = require<double>(ctrl, "u_max", "controller");
    c.controller.allow_slack = require<bool>(ctrl, "allow_slack", "controller");
    c.controller.slack_weight =
        require<double>(ctrl, "slack_weight", "controller");
    c.controller.qp_max_iterations =
        require<int>(ctrl, "qp_max_iterations", "controller");

    const json& ref = j.at("reference");
    check_keys(ref, {"amplitude", "omega"}, "reference");
    c.reference.amplitude = require<double>(ref, "amplitude", "reference");
    c.reference.omega = require<double>(ref, "omega", "reference");

    const json& integ = j.at("integration");
    check_keys(integ, {"dt", "horizon", "method", "decimation"}, "integration");
    c.integration.dt = require<double>(integ, "dt", "integration");
    c.integration.horizon = require<double>(integ, "horizon", "integration");
    const auto method = require<std::string>(integ, "method", "integration");
    if (method == "rk4")
        c.integration.method = IntegrationMethod::Rk4;
    else if (method == "euler")
        c.integration.method = IntegrationMethod::Euler;
    else
        throw ConfigError(format_msg("unknown integration method '", method,
                                     "'"));
    c.integration.decimation = require<int>(integ, "decimation", "integration");

    c.validate();
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError(format_msg("cannot open config file '", path, "'"));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(format_msg("config '", path, "' is not valid JSON: ",
                                     e.what()));
    }
    return parse_config(j);
}

inline void save_config(const ScenarioConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError(format_msg("cannot write config file '", path, "'"));
    out << to_json(cfg).dump(2) << "\n";
}

}  // namespace koopsafe
