#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "macroqed/decay.hpp"
#include "macroqed/error.hpp"
#include "macroqed/fourport.hpp"
#include "macroqed/media.hpp"
#include "macroqed/qstate.hpp"
#include "macroqed/units.hpp"

namespace macroqed::cli {

using json = nlohmann::json;

inline constexpr const char* tool_version = "1.0.0";

struct Sweep {
    std::string variable;
    std::vector<double> values;
};

struct Scenario {
    std::string kind;
    LengthUnit length_unit = LengthUnit::c_over_omega_T;
    json params;   // validated, defaults filled in, lengths still in the user's unit
    Sweep sweep;   // empty variable: single evaluation
    json config;   // the document as given
};

struct ResultTable {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void validate() const {
        for (const auto& r : rows)
            if (r.size() != columns.size()) throw DomainError("result row length differs from the column count");
    }
};

// ---------------------------------------------------------------- parameter schema

enum class ParamType { number, integer, text, medium, vec3, window };
enum class Range { any, positive, nonnegative };

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::number;
    bool required = false;
    json fallback = nullptr;  // default when optional
    Range range = Range::any;
    bool length = false;      // converted through length_unit
    bool sweepable = false;
    std::vector<std::string> choices;
    std::string only_if;      // "key=value": accepted (and required, if `required`) only then
    std::string help;
};

struct ScenarioDef {
    std::string kind;
    std::string summary;
    std::vector<ParamSpec> params;
    std::string default_sweep;  // empty: sweeps are rejected
    std::string columns;        // documentation
};

inline const std::vector<ScenarioDef>& scenario_defs() {
    using T = ParamType;
    static const std::vector<ScenarioDef> defs = {
        {"decay-spectrum",
         "Gamma/Gamma_0 of an atom as a function of omega_A in a cavity, microsphere resonator or near a half-space",
         {{"medium", T::medium, true},
          {"geometry", T::text, true, nullptr, Range::any, false, false, {"real-cavity", "resonator", "half-space"}},
          {"omega_A", T::number, true, nullptr, Range::positive, false, true, {}, "", "transition frequency"},
          {"mode", T::text, false, "exact", Range::any, false, false, {"exact", "expansion", "asymptotic", "thick-wall"}},
          {"d_hat", T::vec3, false, json::array({0, 0, 1})},
          {"R", T::number, true, nullptr, Range::positive, true, true, {}, "geometry=real-cavity", "cavity radius"},
          {"R1", T::number, true, nullptr, Range::positive, true, true, {}, "geometry=resonator", "outer radius"},
          {"R2", T::number, true, nullptr, Range::positive, true, true, {}, "geometry=resonator", "inner radius"},
          {"z", T::number, true, nullptr, Range::positive, true, true, {}, "geometry=half-space", "height"}},
         "omega_A",
         "<sweep>, gamma_ratio"},
        {"decay-dynamics",
         "upper-state amplitude C_u(t) from the Volterra equation; time in 1/Gamma_0",
         {{"geometry", T::text, true, nullptr, Range::any, false, false, {"resonator", "single-resonance"}},
          {"omega_A", T::number, true, nullptr, Range::positive},
          {"gamma0_scale", T::number, false, 1e-6, Range::positive, false, false, {}, "", "Gamma_0 lambda_T / 2c"},
          {"t_max", T::number, true, nullptr, Range::positive},
          {"n_steps", T::integer, true, nullptr, Range::positive},
          {"medium", T::medium, true, nullptr, Range::any, false, false, {}, "geometry=resonator"},
          {"R1", T::number, true, nullptr, Range::positive, true, false, {}, "geometry=resonator"},
          {"R2", T::number, true, nullptr, Range::positive, true, false, {}, "geometry=resonator"},
          {"window", T::window, false, nullptr, Range::any, false, false, {}, "geometry=resonator",
           "spectral window [lo, hi] in omega_T"},
          {"gamma_C", T::number, true, nullptr, Range::positive, false, false, {}, "geometry=single-resonance",
           "peak rate in Gamma_0"},
          {"delta_C", T::number, true, nullptr, Range::positive, false, false, {}, "geometry=single-resonance",
           "line width in Gamma_0"},
          {"detuning", T::number, false, 0.0, Range::any, false, false, {}, "geometry=single-resonance",
           "omega_C - omega_A in Gamma_0"},
          {"method", T::text, false, "volterra", Range::any, false, false, {"volterra", "ode"},
           "geometry=single-resonance"}},
         "",
         "t, cu_re, cu_im, prob"},
        {"near-surface",
         "Gamma/Gamma_0 of an atom at height z above a dielectric half-space",
         {{"medium", T::medium, true},
          {"omega_A", T::number, true, nullptr, Range::positive},
          {"z", T::number, true, nullptr, Range::positive, true, true},
          {"mode", T::text, false, "exact", Range::any, false, false, {"exact", "asymptotic"}},
          {"d_hat", T::vec3, false, json::array({0, 0, 1})}},
         "z",
         "<sweep>, gamma_ratio, gamma_ratio_leading"},
        {"slab-matrices",
         "transformation and absorption matrices of a dielectric plate",
         {{"medium", T::medium, true},
          {"l", T::number, true, nullptr, Range::nonnegative, true, true, {}, "", "thickness"},
          {"omega", T::number, true, nullptr, Range::positive, false, true}},
         "omega",
         "<sweep>, T11..T22 and A11..A22 (_re/_im), unitarity_defect"},
        {"fock-loss",
         "photon-number distribution after an n-photon state passes a plate",
         {{"medium", T::medium, true},
          {"l", T::number, true, nullptr, Range::nonnegative, true, true},
          {"omega", T::number, true, nullptr, Range::positive, false, true},
          {"n_photons", T::integer, true, nullptr, Range::nonnegative},
          {"output_port", T::integer, false, 2, Range::positive}},
         "omega",
         "<sweep>, transmission_prob, p_0 .. p_n"},
        {"cat-decoherence",
         "even cat state (|g> + |-g>) after a plate",
         {{"medium", T::medium, true},
          {"l", T::number, true, nullptr, Range::nonnegative, true, true},
          {"omega", T::number, true, nullptr, Range::positive, false, true},
          {"cat_amplitude", T::number, true, nullptr, Range::positive, false, true},
          {"output_port", T::integer, false, 2, Range::positive}},
         "l",
         "<sweep>, transmission_prob, coherence_weight, purity, wigner_origin"},
        {"entanglement-degradation",
         "relative entropy of entanglement of Bell states sent through two fibres",
         {{"absorption_length", T::number, true, nullptr, Range::positive, true},
          {"l", T::number, true, nullptr, Range::nonnegative, true, true, {}, "", "fibre length"},
          {"n_R", T::number, false, 1.5, Range::positive},
          {"omega", T::number, false, 1.0, Range::positive},
          {"restarts", T::integer, false, 20, Range::positive},
          {"terms", T::integer, false, 8, Range::positive},
          {"seed", T::integer, false, 20240917, Range::nonnegative},
          {"tolerance", T::number, false, 1e-5, Range::positive},
          {"max_evaluations", T::integer, false, 60000, Range::positive, false, false, {}, "",
           "objective evaluations per polishing run"}},
         "l",
         "<sweep>, l_over_L, E_psi, E_phi, bound_psi, bound_phi"},
        {"kk-check",
         "Kramers-Kronig reconstruction of Re eps - 1 from Im eps",
         {{"medium", T::medium, true},
          {"omega", T::number, true, nullptr, Range::positive, false, true},
          {"cutoff", T::number, false, 1e3, Range::positive}},
         "omega",
         "<sweep>, eps_re, eps_re_kk, rel_err"},
    };
    return defs;
}

inline const ScenarioDef* find_def(const std::string& kind) {
    for (const auto& d : scenario_defs())
        if (d.kind == kind) return &d;
    return nullptr;
}

inline std::string list_scenarios() {
    std::ostringstream os;
    for (const auto& d : scenario_defs()) {
        os << d.kind << "\n  " << d.summary << "\n  columns: " << d.columns << "\n  params:";
        for (const auto& p : d.params) {
            os << "\n    " << p.name << (p.required ? " (required" : " (optional");
            if (!p.fallback.is_null()) os << ", default " << p.fallback.dump();
            if (p.length) os << ", length";
            if (p.sweepable) os << ", sweepable";
            if (!p.only_if.empty()) os << ", when " << p.only_if;
            os << ")";
            if (!p.choices.empty()) {
                os << " one of:";
                for (const auto& c : p.choices) os << " " << c;
            }
            if (!p.help.empty()) os << " " << p.help;
        }
        if (!d.default_sweep.empty()) os << "\n  default sweep variable: " << d.default_sweep;
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------- validation

namespace detail {

struct Errors {
    std::vector<std::string> items;
    void add(const std::string& path, const std::string& msg) { items.push_back(path + ": " + msg); }
};

inline bool is_real(const json& v) { return v.is_number() && std::isfinite(v.get<double>()); }

inline void check_range(const json& v, Range r, const std::string& path, Errors& e) {
    const double x = v.get<double>();
    if (r == Range::positive && !(x > 0)) e.add(path, "must be positive");
    if (r == Range::nonnegative && !(x >= 0)) e.add(path, "must be non-negative");
}

inline void check_resonance(const json& r, const std::string& path, Errors& e) {
    if (!r.is_object()) {
        e.add(path, "must be an object");
        return;
    }
    static const std::set<std::string> keys = {"omega_p", "gamma", "omega_t"};
    for (auto it = r.begin(); it != r.end(); ++it)
        if (!keys.count(it.key()) && it.key() != "model") e.add(path + "." + it.key(), "unknown key");
    for (const char* k : {"omega_p", "gamma"}) {
        if (!r.contains(k)) e.add(path + "." + k, "required field missing");
        else if (!is_real(r[k])) e.add(path + "." + k, "must be a finite number");
        else check_range(r[k], Range::nonnegative, path + "." + k, e);
    }
    if (r.contains("omega_t")) {
        if (!is_real(r["omega_t"])) e.add(path + ".omega_t", "must be a finite number");
        else check_range(r["omega_t"], Range::positive, path + ".omega_t", e);
    }
}

inline void check_medium(const json& m, const std::string& path, Errors& e) {
    if (!m.is_object()) {
        e.add(path, "must be an object");
        return;
    }
    if (!m.contains("model") || !m["model"].is_string()) {
        e.add(path + ".model", "required field missing (\"lorentz\" or \"multi-lorentz\")");
        return;
    }
    const std::string model = m["model"];
    if (model == "lorentz") {
        check_resonance(m, path, e);
    } else if (model == "multi-lorentz") {
        for (auto it = m.begin(); it != m.end(); ++it)
            if (it.key() != "model" && it.key() != "resonances") e.add(path + "." + it.key(), "unknown key");
        if (!m.contains("resonances") || !m["resonances"].is_array() || m["resonances"].empty())
            e.add(path + ".resonances", "must be a non-empty array");
        else
            for (std::size_t i = 0; i < m["resonances"].size(); ++i)
                check_resonance(m["resonances"][i], path + ".resonances[" + std::to_string(i) + "]", e);
    } else {
        e.add(path + ".model", "unknown model \"" + model + "\"");
    }
}

inline void check_value(const ParamSpec& p, const json& v, const std::string& path, Errors& e) {
    switch (p.type) {
        case ParamType::number:
            if (!is_real(v)) e.add(path, "must be a finite number");
            else check_range(v, p.range, path, e);
            break;
        case ParamType::integer:
            if (!v.is_number_integer()) e.add(path, "must be an integer");
            else check_range(v, p.range, path, e);
            break;
        case ParamType::text:
            if (!v.is_string()) e.add(path, "must be a string");
            else if (!p.choices.empty() &&
                     std::find(p.choices.begin(), p.choices.end(), v.get<std::string>()) == p.choices.end())
                e.add(path, "unknown value \"" + v.get<std::string>() + "\"");
            break;
        case ParamType::medium: check_medium(v, path, e); break;
        case ParamType::vec3:
            if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), is_real))
                e.add(path, "must be an array of three numbers");
            else if (std::hypot(v[0].get<double>(), v[1].get<double>(), v[2].get<double>()) == 0)
                e.add(path, "must be non-zero");
            break;
        case ParamType::window:
            if (!v.is_array() || v.size() != 2 || !std::all_of(v.begin(), v.end(), is_real))
                e.add(path, "must be an array [lo, hi]");
            else if (!(v[0].get<double>() > 0 && v[0].get<double>() < v[1].get<double>()))
                e.add(path, "must satisfy 0 < lo < hi");
            break;
    }
}

inline bool condition_holds(const std::string& cond, const json& params) {
    if (cond.empty()) return true;
    const auto eq = cond.find('=');
    const std::string key = cond.substr(0, eq), val = cond.substr(eq + 1);
    return params.contains(key) && params[key].is_string() && params[key].get<std::string>() == val;
}

inline std::vector<double> parse_sweep_values(const json& s, Errors& e) {
    std::vector<double> out;
    static const std::set<std::string> keys = {"variable", "values", "start", "stop", "points", "spacing"};
    for (auto it = s.begin(); it != s.end(); ++it)
        if (!keys.count(it.key())) e.add("sweep." + it.key(), "unknown key");
    if (s.contains("values")) {
        for (const char* k : {"start", "stop", "points", "spacing"})
            if (s.contains(k)) e.add(std::string("sweep.") + k, "cannot be combined with sweep.values");
        if (!s["values"].is_array() || s["values"].empty()) {
            e.add("sweep.values", "must be a non-empty array");
            return out;
        }
        for (const auto& v : s["values"]) {
            if (!is_real(v)) {
                e.add("sweep.values", "entries must be finite numbers");
                return {};
            }
            out.push_back(v.get<double>());
        }
    } else {
        bool ok = true;
        for (const char* k : {"start", "stop"})
            if (!s.contains(k) || !is_real(s[k])) {
                e.add(std::string("sweep.") + k, "required finite number (or give sweep.values)");
                ok = false;
            }
        if (!s.contains("points") || !s["points"].is_number_integer() || s["points"].get<long>() < 1) {
            e.add("sweep.points", "required positive integer");
            ok = false;
        }
        std::string spacing = "linear";
        if (s.contains("spacing")) {
            if (!s["spacing"].is_string() || (s["spacing"] != "linear" && s["spacing"] != "log")) {
                e.add("sweep.spacing", "must be \"linear\" or \"log\"");
                ok = false;
            } else {
                spacing = s["spacing"];
            }
        }
        if (!ok) return out;
        const double a = s["start"], b = s["stop"];
        const long n = s["points"];
        if (spacing == "log" && !(a > 0 && b > 0)) {
            e.add("sweep", "log spacing needs positive start and stop");
            return out;
        }
        for (long i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : double(i) / double(n - 1);
            out.push_back(spacing == "log" ? a * std::pow(b / a, f) : a + (b - a) * f);
        }
    }
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] > out[i - 1])) {
            e.add("sweep", "grid must be strictly increasing");
            break;
        }
    return out;
}

inline std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (const auto& it : items) s += (s.empty() ? "" : "\n") + it;
    return s;
}

}  // namespace detail

inline Scenario validate(const json& config) {
    detail::Errors e;
    if (!config.is_object()) throw ValidationError("config: top level must be an object");
    for (auto it = config.begin(); it != config.end(); ++it)
        if (it.key() != "scenario" && it.key() != "params" && it.key() != "length_unit" && it.key() != "sweep")
            e.add(it.key(), "unknown key");

    Scenario sc;
    sc.config = config;
    const ScenarioDef* def = nullptr;
    if (!config.contains("scenario") || !config["scenario"].is_string()) {
        e.add("scenario", "required string missing");
    } else {
        sc.kind = config["scenario"];
        def = find_def(sc.kind);
        if (!def) e.add("scenario", "unknown scenario \"" + sc.kind + "\" (see list-scenarios)");
    }
    if (!config.contains("length_unit") || !config["length_unit"].is_string()) {
        e.add("length_unit", "required string missing (c_over_omega_T, lambda_T or lambda_A)");
    } else if (auto u = parse_length_unit(config["length_unit"].get<std::string>())) {
        sc.length_unit = *u;
    } else {
        e.add("length_unit", "must be c_over_omega_T, lambda_T or lambda_A");
    }
    if (!config.contains("params") || !config["params"].is_object()) {
        e.add("params", "required object missing");
        throw ValidationError(detail::join(e.items));
    }
    if (!def) throw ValidationError(detail::join(e.items));

    const json& in = config["params"];
    if (config.contains("sweep")) {
        const json& s = config["sweep"];
        if (!s.is_object()) {
            e.add("sweep", "must be an object");
        } else {
            sc.sweep.variable = s.value("variable", def->default_sweep);
            if (def->default_sweep.empty()) e.add("sweep", "scenario " + sc.kind + " does not take a sweep");
            sc.sweep.values = detail::parse_sweep_values(s, e);
        }
    }
    json params = json::object();
    for (auto it = in.begin(); it != in.end(); ++it) {
        const auto p = std::find_if(def->params.begin(), def->params.end(),
                                    [&](const ParamSpec& ps) { return ps.name == it.key(); });
        if (p == def->params.end()) e.add("params." + it.key(), "unknown key");
    }
    for (const auto& p : def->params) {
        const std::string path = "params." + p.name;
        const bool active = detail::condition_holds(p.only_if, in);
        const bool swept = !sc.sweep.variable.empty() && sc.sweep.variable == p.name;
        if (swept) {
            if (!p.sweepable) e.add("sweep.variable", p.name + " cannot be swept");
            else if (!active) e.add("sweep.variable", p.name + " is only used when " + p.only_if);
            if (in.contains(p.name)) e.add(path, "also given as sweep variable");
            else if (p.range != Range::any) {
                for (double v : sc.sweep.values) detail::check_range(json(v), p.range, "sweep.values", e);
            }
            continue;
        }
        if (in.contains(p.name)) {
            if (!active) {
                e.add(path, "only used when " + p.only_if);
                continue;
            }
            detail::check_value(p, in[p.name], path, e);
            params[p.name] = in[p.name];
        } else if (active) {
            if (p.required) e.add(path, "required field missing");
            else if (!p.fallback.is_null()) params[p.name] = p.fallback;
        }
    }
    if (!sc.sweep.variable.empty() && def->default_sweep.size() &&
        std::none_of(def->params.begin(), def->params.end(),
                     [&](const ParamSpec& ps) { return ps.name == sc.sweep.variable; }))
        e.add("sweep.variable", "unknown parameter \"" + sc.sweep.variable + "\"");

    // Scenario-specific consistency.
    auto text = [&](const char* k) { return params.contains(k) && params[k].is_string() ? params[k].get<std::string>() : ""; };
    if (sc.kind == "decay-spectrum") {
        const std::string g = text("geometry"), m = text("mode");
        const std::map<std::string, std::set<std::string>> modes = {
            {"real-cavity", {"exact", "expansion"}}, {"resonator", {"exact", "thick-wall"}},
            {"half-space", {"exact", "asymptotic"}}};
        if (modes.count(g) && !m.empty() && !modes.at(g).count(m))
            e.add("params.mode", "\"" + m + "\" is not available for geometry " + g);
    }
    if (sc.kind == "decay-spectrum" || sc.kind == "decay-dynamics") {
        if (params.contains("R1") && params.contains("R2") && detail::is_real(params["R1"]) &&
            detail::is_real(params["R2"]) && !(params["R1"].get<double>() > params["R2"].get<double>()))
            e.add("params.R1", "outer radius must exceed R2");
    }
    if (sc.kind == "fock-loss" || sc.kind == "cat-decoherence") {
        if (params.contains("output_port") && params["output_port"].is_number_integer()) {
            const long port = params["output_port"];
            if (port != 1 && port != 2) e.add("params.output_port", "must be 1 or 2");
        }
    }
    if (sc.kind == "fock-loss" && params.contains("n_photons") && params["n_photons"].is_number_integer() &&
        params["n_photons"].get<long>() > 60)
        e.add("params.n_photons", "at most 60 photons are supported");
    if (sc.kind == "entanglement-degradation" && params.contains("terms") && params["terms"].is_number_integer() &&
        params["terms"].get<long>() < 4)
        e.add("params.terms", "at least 4 product terms are needed");
    if (sc.length_unit == LengthUnit::lambda_A) {
        const bool has_omega_A = std::any_of(def->params.begin(), def->params.end(),
                                             [](const ParamSpec& ps) { return ps.name == "omega_A"; });
        if (!has_omega_A) e.add("length_unit", "lambda_A needs a scenario with omega_A");
    }
    if (!e.items.empty()) throw ValidationError(detail::join(e.items));
    sc.params = std::move(params);
    return sc;
}

inline Scenario validate_text(const std::string& text) {
    json config;
    try {
        config = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ValidationError(std::string("config: ") + err.what());
    }
    return validate(config);
}

// ---------------------------------------------------------------- evaluation

namespace detail {

inline MultiLorentzMedium make_medium(const json& m) {
    auto one = [](const json& r) {
        LorentzMedium l;
        l.omega_P = r.at("omega_p");
        l.gamma = r.at("gamma");
        l.omega_T = r.value("omega_t", 1.0);
        return l;
    };
    MultiLorentzMedium out;
    if (m.at("model") == "lorentz") out.resonances.push_back(one(m));
    else
        for (const auto& r : m.at("resonances")) out.resonances.push_back(one(r));
    out.validate();
    return out;
}

inline Vec3 unit_vec(const json& v) {
    Vec3 d(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    return d / d.norm();
}

// Parameters at one sweep point, lengths converted to c/omega_T.
inline json point_params(const Scenario& sc, const ScenarioDef& def, std::size_t i) {
    json p = sc.params;
    if (!sc.sweep.variable.empty()) p[sc.sweep.variable] = sc.sweep.values[i];
    const double omega_A = p.contains("omega_A") ? p["omega_A"].get<double>() : 0.0;
    for (const auto& ps : def.params)
        if (ps.length && p.contains(ps.name))
            p[ps.name] = to_internal_length(p[ps.name].get<double>(), sc.length_unit, omega_A);
    return p;
}

// Runs f(i) for i < n on `threads` workers; results land at their index. The exception of
// the lowest failing index is rethrown so failures do not depend on scheduling.
template <class R>
std::vector<R> parallel_map(std::size_t n, int threads, const std::function<R(std::size_t)>& f) {
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errs(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                out[i] = f(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

struct Row {
    std::vector<double> values;
    std::vector<std::string> warnings;
};

inline void push_complex(std::vector<double>& v, cplx z) {
    v.push_back(z.real());
    v.push_back(z.imag());
}

inline FourPortMatrices plate(const json& p, Diagnostics* diag) {
    const auto medium = make_medium(p.at("medium"));
    const double omega = p.at("omega");
    const cplx n = refractive_index(medium.permittivity(omega), diag).value();
    return slab_matrices(p.at("l").get<double>(), omega, n, diag);
}

inline Row eval_point(const std::string& kind, const json& p) {
    Row row;
    Diagnostics diag;
    auto& v = row.values;
    if (kind == "decay-spectrum") {
        const auto medium = make_medium(p.at("medium"));
        Dipole dip;
        dip.omega_A = p.at("omega_A");
        dip.d_hat = unit_vec(p.at("d_hat"));
        const std::string g = p.at("geometry"), mode = p.at("mode");
        double rate = 0;
        if (g == "real-cavity") {
            SphericalCavity<MultiLorentzMedium> cav{p.at("R").get<double>(), medium};
            rate = gamma_real_cavity(dip, cav, mode == "exact" ? RateMode::exact : RateMode::expansion);
        } else if (g == "resonator") {
            SphericalResonator<MultiLorentzMedium> res{p.at("R1").get<double>(), p.at("R2").get<double>(), medium};
            rate = mode == "exact" ? gamma_resonator(dip, res, &diag)
                                   : gamma_resonator_thickwall(dip, res.R2, medium, &diag);
        } else {
            rate = gamma_near_surface(dip, p.at("z").get<double>(), medium,
                                      mode == "exact" ? RateMode::exact : RateMode::asymptotic);
        }
        v = {rate};
    } else if (kind == "near-surface") {
        const auto medium = make_medium(p.at("medium"));
        Dipole dip;
        dip.omega_A = p.at("omega_A");
        dip.d_hat = unit_vec(p.at("d_hat"));
        const double z = p.at("z");
        const double lead = gamma_near_surface(dip, z, medium, RateMode::asymptotic);
        const double rate = p.at("mode") == "exact" ? gamma_near_surface(dip, z, medium, RateMode::exact) : lead;
        v = {rate, lead};
    } else if (kind == "slab-matrices") {
        const auto fm = plate(p, &diag);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) push_complex(v, fm.T(i, j));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) push_complex(v, fm.A(i, j));
        v.push_back(fm.unitarity_defect());
    } else if (kind == "fock-loss") {
        const auto fm = plate(p, &diag);
        const int port = p.at("output_port").get<int>() - 1;
        const double t2 = std::norm(fm.T(port, 0));
        const auto rho = fock_loss(p.at("n_photons").get<int>(), t2);
        v.push_back(t2);
        for (int k = 0; k < rho.matrix.rows(); ++k) v.push_back(rho.matrix(k, k).real());
    } else if (kind == "cat-decoherence") {
        const auto fm = plate(p, &diag);
        const int port = p.at("output_port").get<int>() - 1;
        const cplx T = fm.T(port, 0);
        const double g = p.at("cat_amplitude");
        const auto rho = cat_output(g, T);
        v = {std::norm(T), cat_coherence_weight(g, T), rho.purity(), wigner_s(rho, 0.0, 0.0)};
    } else if (kind == "entanglement-degradation") {
        const double l = p.at("l"), L = p.at("absorption_length");
        const cplx T = fibre_transmission(l, L, p.at("n_R"), p.at("omega"));
        EntanglementOptions opt;
        opt.restarts = p.at("restarts");
        opt.terms = p.at("terms");
        opt.seed = p.at("seed").get<std::uint64_t>();
        opt.tolerance = p.at("tolerance");
        opt.max_evaluations = p.at("max_evaluations");
        const auto ep = entanglement_re(bell_output(BellKind::psi_plus, T, T), opt);
        const auto ef = entanglement_re(bell_output(BellKind::phi_plus, T, T), opt);
        for (const auto* r : {&ep, &ef})
            if (!r->converged)
                throw ConvergenceError("entanglement optimizer did not reach the requested tolerance at l = " +
                                           std::to_string(l),
                                       r->achieved_tolerance);
        v = {l / L, ep.value, ef.value, entanglement_bounds(BellKind::psi_plus, T),
             entanglement_bounds(BellKind::phi_plus, T)};
    } else if (kind == "kk-check") {
        const auto medium = make_medium(p.at("medium"));
        const double w = p.at("omega");
        const double exact = medium.permittivity(w).real() - 1;
        numerics::QuadratureConfig cfg;
        cfg.rel_tol = 1e-10;
        cfg.abs_tol = 1e-13;
        cfg.max_subdivisions = 20000;
        const double kk = kk_reconstruct(medium, w, cfg, p.at("cutoff").get<double>());
        v = {exact + 1, kk + 1, std::abs(kk - exact) / std::max(std::abs(exact), 1e-300)};
    }
    row.warnings = std::move(diag.warnings);
    return row;
}

inline std::vector<std::string> point_columns(const Scenario& sc) {
    const std::string& k = sc.kind;
    if (k == "decay-spectrum") return {"gamma_ratio"};
    if (k == "near-surface") return {"gamma_ratio", "gamma_ratio_leading"};
    if (k == "slab-matrices") {
        std::vector<std::string> c;
        for (const char* m : {"T", "A"})
            for (const char* ij : {"11", "12", "21", "22"})
                for (const char* part : {"_re", "_im"}) c.push_back(std::string(m) + ij + part);
        c.push_back("unitarity_defect");
        return c;
    }
    if (k == "fock-loss") {
        std::vector<std::string> c = {"transmission_prob"};
        for (int n = 0; n <= sc.params.at("n_photons").get<int>(); ++n) c.push_back("p_" + std::to_string(n));
        return c;
    }
    if (k == "cat-decoherence") return {"transmission_prob", "coherence_weight", "purity", "wigner_origin"};
    if (k == "entanglement-degradation") return {"l_over_L", "E_psi", "E_phi", "bound_psi", "bound_phi"};
    if (k == "kk-check") return {"eps_re", "eps_re_kk", "rel_err"};
    return {};
}

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline ResultTable run_dynamics(const Scenario& sc, std::vector<std::string>& warnings) {
    const json& p = sc.params;
    TimeGrid grid{p.at("t_max").get<double>(), p.at("n_steps").get<int>()};
    Dipole dip;
    dip.omega_A = p.at("omega_A");
    dip.gamma0_scale = p.at("gamma0_scale");
    DecayTrajectory traj;
    ResultTable t;
    if (p.at("geometry") == "single-resonance") {
        const double gC = p.at("gamma_C"), dC = p.at("delta_C"), det = p.at("detuning");
        if (p.at("method") == "ode") {
            traj = single_resonance_dynamics(gC, dC, det, grid);
        } else {
            std::vector<cplx> kbar(grid.n_steps + 1);
            for (int k = 0; k <= grid.n_steps; ++k) kbar[k] = single_resonance_kbar(gC, dC, det, grid.time(k));
            traj = numerics::solve_volterra2_sampled(kbar, grid);
        }
    } else {
        const double omega_A = dip.omega_A;
        const auto medium = make_medium(p.at("medium"));
        const double R1 = to_internal_length(p.at("R1").get<double>(), sc.length_unit, omega_A);
        const double R2 = to_internal_length(p.at("R2").get<double>(), sc.length_unit, omega_A);
        SphericalResonator<MultiLorentzMedium> res{R1, R2, medium};
        Diagnostics diag;
        FrequencyWindow window;
        if (p.contains("window")) {
            window = {p["window"][0].get<double>(), p["window"][1].get<double>()};
        } else {
            const double gC = gamma_resonator(dip, res, &diag);
            window = default_kernel_window(omega_A, resonance_width(R2, gC));
        }
        auto rate = [&](double w) {
            const double x = w / omega_A;
            return x * x * x * (1 + resonator_c1n(res, w, &diag).real());
        };
        traj = upper_state_dynamics(dip, rate, grid, window, &diag);
        warnings.insert(warnings.end(), diag.warnings.begin(), diag.warnings.end());
        t.metadata.push_back({"kernel_window", fmt(window.lo) + " " + fmt(window.hi)});
    }
    t.columns = {"t", "cu_re", "cu_im", "prob"};
    for (std::size_t k = 0; k < traj.size(); ++k)
        t.rows.push_back({traj.times[k], traj.amplitudes[k].real(), traj.amplitudes[k].imag(), traj.probability(k)});
    return t;
}

}  // namespace detail

inline ResultTable run(const Scenario& sc, int threads = 1) {
    const ScenarioDef* def = find_def(sc.kind);
    if (!def) throw ValidationError("scenario: unknown scenario \"" + sc.kind + "\"");
    ResultTable t;
    std::vector<std::string> warnings;
    if (sc.kind == "decay-dynamics") {
        t = detail::run_dynamics(sc, warnings);
    } else {
        const std::size_t n = sc.sweep.variable.empty() ? 1 : sc.sweep.values.size();
        auto rows = detail::parallel_map<detail::Row>(n, threads, [&](std::size_t i) {
            return detail::eval_point(sc.kind, detail::point_params(sc, *def, i));
        });
        const std::string var = sc.sweep.variable.empty() ? def->default_sweep : sc.sweep.variable;
        t.columns = {var};
        for (auto& c : detail::point_columns(sc)) t.columns.push_back(c);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> r = {sc.sweep.variable.empty() ? sc.params.at(var).get<double>() : sc.sweep.values[i]};
            r.insert(r.end(), rows[i].values.begin(), rows[i].values.end());
            t.rows.push_back(std::move(r));
            for (auto& w : rows[i].warnings) warnings.push_back(var + "=" + detail::fmt(t.rows.back()[0]) + ": " + w);
        }
    }
    std::vector<std::pair<std::string, std::string>> meta = {
        {"tool", std::string("macroqed ") + tool_version},
        {"scenario", sc.kind},
        {"length_unit", to_string(sc.length_unit)},
        {"units", "c = 1, omega_T = 1; rates in Gamma_0; dynamics time in 1/Gamma_0"},
        {"config", sc.config.dump()},
        {"resolved_params", sc.params.dump()},
    };
    if (sc.kind == "kk-check") meta.push_back({"quadrature_rel_tol", "1e-10"});
    if (sc.kind == "decay-spectrum" || sc.kind == "near-surface")
        meta.push_back({"quadrature_rel_tol", detail::fmt(numerics::QuadratureConfig{}.rel_tol)});
    if (sc.kind == "entanglement-degradation")
        meta.push_back({"optimizer", "Nelder-Mead, separable mixture of product states"});
    meta.insert(meta.end(), t.metadata.begin(), t.metadata.end());
    for (auto& w : warnings) meta.push_back({"warning", w});
    t.metadata = std::move(meta);
    t.validate();
    return t;
}

inline void write_csv(std::ostream& os, const ResultTable& t) {
    for (const auto& [k, v] : t.metadata) os << "# " << k << ": " << v << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << detail::fmt(r[i]);
        os << "\n";
    }
}

// Recovers the scenario embedded in a CSV produced by write_csv.
inline Scenario scenario_from_csv(std::istream& is) {
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("# config: ", 0) == 0) return validate_text(line.substr(10));
        if (line.empty() || line[0] != '#') break;
    }
    throw ValidationError("csv: no config line in the metadata header");
}

}  // namespace macroqed::cli
