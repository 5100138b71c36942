#pragma once

// JSON scenario documents. Every object rejects keys it does not know; errors
// carry a JSON pointer to the offending node.

#include "cfcoh/scenario.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace cfcoh {

using Json = nlohmann::ordered_json;

namespace io_detail {

inline std::string child(const std::string& path, std::string_view key) { return path + "/" + std::string(key); }
inline std::string child(const std::string& path, std::size_t index) { return path + "/" + std::to_string(index); }

inline void expect_object(const Json& j, const std::string& path)
{
    if (!j.is_object()) {
        throw ScenarioError(path, "expected an object");
    }
}

inline void expect_keys(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed)
{
    expect_object(j, path);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ScenarioError(child(path, key), "unknown key");
        }
    }
}

inline const Json& require(const Json& j, const std::string& path, std::string_view key)
{
    const auto it = j.find(std::string(key));
    if (it == j.end()) {
        throw ScenarioError(child(path, key), "missing required key");
    }
    return *it;
}

inline double as_number(const Json& j, const std::string& path)
{
    if (!j.is_number()) {
        throw ScenarioError(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw ScenarioError(path, "expected a finite number");
    }
    return v;
}

inline int as_index(const Json& j, const std::string& path)
{
    if (!j.is_number_integer()) {
        throw ScenarioError(path, "expected an integer");
    }
    return j.get<int>();
}

inline std::string as_string(const Json& j, const std::string& path)
{
    if (!j.is_string()) {
        throw ScenarioError(path, "expected a string");
    }
    return j.get<std::string>();
}

inline Complex as_complex(const Json& j, const std::string& path)
{
    if (!j.is_array() || j.size() != 2) {
        throw ScenarioError(path, "expected [real, imag]");
    }
    return {as_number(j[0], child(path, std::size_t{0})), as_number(j[1], child(path, std::size_t{1}))};
}

inline const Json& as_array(const Json& j, const std::string& path)
{
    if (!j.is_array()) {
        throw ScenarioError(path, "expected an array");
    }
    return j;
}

inline void number_field(const Json& j, const std::string& path, std::string_view key, double& out, bool required = false)
{
    const auto it = j.find(std::string(key));
    if (it == j.end()) {
        if (required) {
            throw ScenarioError(child(path, key), "missing required key");
        }
        return;
    }
    out = as_number(*it, child(path, key));
}

inline void complex_field(const Json& j, const std::string& path, std::string_view key, Complex& out)
{
    if (const auto it = j.find(std::string(key)); it != j.end()) {
        out = as_complex(*it, child(path, key));
    }
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline BusKind parse_bus_kind(const Json& j, const std::string& path)
{
    const auto s = as_string(j, path);
    if (s == "slack") {
        return BusKind::slack;
    }
    if (s == "generation" || s == "pv") {
        return BusKind::generation;
    }
    if (s == "load" || s == "pq") {
        return BusKind::load;
    }
    throw ScenarioError(path, "unknown bus kind '" + s + "'");
}

inline std::string bus_kind_name(BusKind k)
{
    switch (k) {
    case BusKind::slack:
        return "slack";
    case BusKind::generation:
        return "generation";
    default:
        return "load";
    }
}

inline IbrFilter parse_filter(const Json& j, const std::string& path)
{
    IbrFilter f;
    complex_field(j, path, "z_f", f.z_f);
    complex_field(j, path, "y_f", f.y_f);
    number_field(j, path, "v_dc0", f.v_dc0);
    return f;
}

inline DeviceModel parse_model(const std::string& type, const Json& j, const std::string& path)
{
    static constexpr std::string_view common[] = {"name", "type", "bus", "p_set"};
    auto keys = [&](std::initializer_list<std::string_view> own) {
        expect_object(j, path);
        for (const auto& [key, value] : j.items()) {
            const bool known = std::find(std::begin(common), std::end(common), key) != std::end(common) ||
                               std::find(own.begin(), own.end(), key) != own.end();
            if (!known) {
                throw ScenarioError(child(path, key), "unknown key for device type '" + type + "'");
            }
        }
    };
    if (type == "sm") {
        keys({"M", "D", "xd_prime", "p_m", "e_q_prime"});
        SynchronousMachine sm;
        number_field(j, path, "M", sm.inertia, true);
        number_field(j, path, "D", sm.damping);
        number_field(j, path, "xd_prime", sm.xd_prime, true);
        number_field(j, path, "p_m", sm.p_m);
        number_field(j, path, "e_q_prime", sm.e_q_prime);
        return sm;
    }
    if (type == "zload" || type == "sload") {
        keys({"p0", "q0", "v0"});
        ZipLoad load;
        number_field(j, path, "p0", load.p0, true);
        number_field(j, path, "q0", load.q0);
        number_field(j, path, "v0", load.v0);
        if (type == "sload") {
            load.k_zp = load.k_zq = 0.0;
            load.k_pp = load.k_pq = 1.0;
        }
        return load;
    }
    if (type == "zip") {
        keys({"p0", "q0", "k_pp", "k_ip", "k_zp", "k_pq", "k_iq", "k_zq", "v0"});
        ZipLoad load;
        number_field(j, path, "p0", load.p0, true);
        number_field(j, path, "q0", load.q0);
        number_field(j, path, "k_pp", load.k_pp);
        number_field(j, path, "k_ip", load.k_ip);
        number_field(j, path, "k_zp", load.k_zp);
        number_field(j, path, "k_pq", load.k_pq);
        number_field(j, path, "k_iq", load.k_iq);
        number_field(j, path, "k_zq", load.k_zq);
        number_field(j, path, "v0", load.v0);
        return load;
    }
    if (type == "gfl") {
        keys({"z_f", "y_f", "v_dc0", "K_p", "K_i", "T_m", "K_p_pll", "K_i_pll", "i_ref", "omega_ref"});
        GridFollowingConverter c;
        c.filter = parse_filter(j, path);
        number_field(j, path, "K_p", c.k_p);
        number_field(j, path, "K_i", c.k_i);
        number_field(j, path, "T_m", c.t_m);
        number_field(j, path, "K_p_pll", c.k_p_pll);
        number_field(j, path, "K_i_pll", c.k_i_pll);
        complex_field(j, path, "i_ref", c.i_ref);
        number_field(j, path, "omega_ref", c.omega_ref);
        return c;
    }
    if (type == "gfm") {
        keys({"z_f", "y_f", "v_dc0", "K_p", "K_i", "T_v", "T_p", "m_p", "p_ref", "v_ref"});
        GridFormingConverter c;
        c.filter = parse_filter(j, path);
        number_field(j, path, "K_p", c.k_p);
        number_field(j, path, "K_i", c.k_i);
        number_field(j, path, "T_v", c.t_v);
        number_field(j, path, "T_p", c.t_p);
        number_field(j, path, "m_p", c.m_p);
        number_field(j, path, "p_ref", c.p_ref);
        number_field(j, path, "v_ref", c.v_ref);
        return c;
    }
    throw ScenarioError(child(path, "type"), "unknown device type '" + type + "'");
}

inline Json model_json(const DeviceModel& model)
{
    return std::visit(
        detail::overloaded{
            [](const SynchronousMachine& sm) {
                return Json{{"type", "sm"},       {"M", sm.inertia},  {"D", sm.damping},
                            {"xd_prime", sm.xd_prime}, {"p_m", sm.p_m}, {"e_q_prime", sm.e_q_prime}};
            },
            [](const ZipLoad& l) {
                return Json{{"type", "zip"}, {"p0", l.p0},     {"q0", l.q0},     {"k_pp", l.k_pp},
                            {"k_ip", l.k_ip}, {"k_zp", l.k_zp}, {"k_pq", l.k_pq}, {"k_iq", l.k_iq},
                            {"k_zq", l.k_zq}, {"v0", l.v0}};
            },
            [](const GridFollowingConverter& c) {
                return Json{{"type", "gfl"},
                            {"z_f", complex_json(c.filter.z_f)},
                            {"y_f", complex_json(c.filter.y_f)},
                            {"v_dc0", c.filter.v_dc0},
                            {"K_p", c.k_p},
                            {"K_i", c.k_i},
                            {"T_m", c.t_m},
                            {"K_p_pll", c.k_p_pll},
                            {"K_i_pll", c.k_i_pll},
                            {"i_ref", complex_json(c.i_ref)},
                            {"omega_ref", c.omega_ref}};
            },
            [](const GridFormingConverter& c) {
                return Json{{"type", "gfm"},
                            {"z_f", complex_json(c.filter.z_f)},
                            {"y_f", complex_json(c.filter.y_f)},
                            {"v_dc0", c.filter.v_dc0},
                            {"K_p", c.k_p},
                            {"K_i", c.k_i},
                            {"T_v", c.t_v},
                            {"T_p", c.t_p},
                            {"m_p", c.m_p},
                            {"p_ref", c.p_ref},
                            {"v_ref", c.v_ref}};
            },
        },
        model);
}

inline Event parse_event(const Json& j, const std::string& path)
{
    expect_object(j, path);
    const auto type = as_string(require(j, path, "type"), child(path, "type"));
    Event ev;
    number_field(j, path, "time", ev.time, true);
    if (type == "load_scale") {
        expect_keys(j, path, {"type", "time", "bus", "factor"});
        LoadScale a;
        a.bus = as_index(require(j, path, "bus"), child(path, "bus"));
        number_field(j, path, "factor", a.factor, true);
        ev.action = a;
    } else if (type == "load_disconnect_mw") {
        expect_keys(j, path, {"type", "time", "bus", "amount_mw"});
        LoadDisconnect a;
        a.bus = as_index(require(j, path, "bus"), child(path, "bus"));
        number_field(j, path, "amount_mw", a.amount_mw, true);
        ev.action = a;
    } else if (type == "parameter_set") {
        expect_keys(j, path, {"type", "time", "device", "name", "value"});
        ParameterSet a;
        a.device = as_string(require(j, path, "device"), child(path, "device"));
        a.name = as_string(require(j, path, "name"), child(path, "name"));
        number_field(j, path, "value", a.value, true);
        ev.action = a;
    } else {
        throw ScenarioError(child(path, "type"), "unknown event type '" + type + "'");
    }
    return ev;
}

inline Json event_json(const Event& ev)
{
    return std::visit(detail::overloaded{
                          [&](const LoadScale& a) {
                              return Json{{"type", "load_scale"}, {"time", ev.time}, {"bus", a.bus}, {"factor", a.factor}};
                          },
                          [&](const LoadDisconnect& a) {
                              return Json{{"type", "load_disconnect_mw"},
                                          {"time", ev.time},
                                          {"bus", a.bus},
                                          {"amount_mw", a.amount_mw}};
                          },
                          [&](const ParameterSet& a) {
                              return Json{{"type", "parameter_set"},
                                          {"time", ev.time},
                                          {"device", a.device},
                                          {"name", a.name},
                                          {"value", a.value}};
                          },
                      },
                      ev.action);
}

} // namespace io_detail

/// Builds a Scenario from a parsed document; structure and types only (cross
/// references are checked by validate_scenario).
inline Scenario scenario_from_json(const Json& doc)
{
    using namespace io_detail;
    const std::string root;
    expect_keys(doc, root, {"description", "system", "buses", "branches", "shunts", "devices", "events", "simulation",
                            "analysis"});
    Scenario sc;
    if (const auto it = doc.find("description"); it != doc.end()) {
        sc.description = as_string(*it, "/description");
    }
    if (const auto it = doc.find("system"); it != doc.end()) {
        expect_keys(*it, "/system", {"f_nominal", "s_base"});
        number_field(*it, "/system", "f_nominal", sc.system.f_nominal);
        number_field(*it, "/system", "s_base", sc.system.s_base);
        if (!(sc.system.f_nominal > 0.0) || !(sc.system.s_base > 0.0)) {
            throw ScenarioError("/system", "f_nominal and s_base must be positive");
        }
    }

    const auto& buses = as_array(require(doc, root, "buses"), "/buses");
    for (std::size_t k = 0; k < buses.size(); ++k) {
        const auto path = child("/buses", k);
        expect_keys(buses[k], path, {"id", "name", "kind", "v_set", "angle", "nominal_kv"});
        Bus b;
        b.id = as_index(require(buses[k], path, "id"), child(path, "id"));
        if (const auto it = buses[k].find("name"); it != buses[k].end()) {
            b.name = as_string(*it, child(path, "name"));
        }
        if (const auto it = buses[k].find("kind"); it != buses[k].end()) {
            b.kind = parse_bus_kind(*it, child(path, "kind"));
        }
        number_field(buses[k], path, "v_set", b.v_set);
        number_field(buses[k], path, "angle", b.angle);
        number_field(buses[k], path, "nominal_kv", b.nominal_voltage);
        sc.network.buses.push_back(std::move(b));
    }

    if (const auto it = doc.find("branches"); it != doc.end()) {
        const auto& branches = as_array(*it, "/branches");
        for (std::size_t k = 0; k < branches.size(); ++k) {
            const auto path = child("/branches", k);
            expect_keys(branches[k], path, {"from", "to", "z", "y_shunt", "tap"});
            Branch br;
            br.from_bus = as_index(require(branches[k], path, "from"), child(path, "from"));
            br.to_bus = as_index(require(branches[k], path, "to"), child(path, "to"));
            br.series_impedance = as_complex(require(branches[k], path, "z"), child(path, "z"));
            complex_field(branches[k], path, "y_shunt", br.shunt_admittance_total);
            number_field(branches[k], path, "tap", br.tap_ratio);
            sc.network.branches.push_back(br);
        }
    }
    if (const auto it = doc.find("shunts"); it != doc.end()) {
        const auto& shunts = as_array(*it, "/shunts");
        for (std::size_t k = 0; k < shunts.size(); ++k) {
            const auto path = child("/shunts", k);
            expect_keys(shunts[k], path, {"bus", "y"});
            FixedShunt sh;
            sh.bus = as_index(require(shunts[k], path, "bus"), child(path, "bus"));
            sh.admittance = as_complex(require(shunts[k], path, "y"), child(path, "y"));
            sc.network.shunts.push_back(sh);
        }
    }

    const auto& devices = as_array(require(doc, root, "devices"), "/devices");
    for (std::size_t k = 0; k < devices.size(); ++k) {
        const auto path = child("/devices", k);
        expect_object(devices[k], path);
        Device d;
        d.name = as_string(require(devices[k], path, "name"), child(path, "name"));
        d.bus = as_index(require(devices[k], path, "bus"), child(path, "bus"));
        number_field(devices[k], path, "p_set", d.p_set);
        const auto type = as_string(require(devices[k], path, "type"), child(path, "type"));
        d.model = parse_model(type, devices[k], path);
        sc.devices.push_back(std::move(d));
    }

    if (const auto it = doc.find("events"); it != doc.end()) {
        const auto& events = as_array(*it, "/events");
        for (std::size_t k = 0; k < events.size(); ++k) {
            sc.events.push_back(parse_event(events[k], child("/events", k)));
        }
    }
    if (const auto it = doc.find("simulation"); it != doc.end()) {
        expect_keys(*it, "/simulation", {"t_end", "dt", "tolerance"});
        number_field(*it, "/simulation", "t_end", sc.simulation.t_end);
        number_field(*it, "/simulation", "dt", sc.simulation.dt);
        number_field(*it, "/simulation", "tolerance", sc.simulation.tolerance);
    }
    if (const auto it = doc.find("analysis"); it != doc.end()) {
        const std::string path = "/analysis";
        expect_keys(*it, path, {"window", "k_clusters", "observation_points", "devices"});
        if (const auto w = it->find("window"); w != it->end() && !w->is_null()) {
            if (!w->is_array() || w->size() != 2) {
                throw ScenarioError(child(path, "window"), "expected [start, end]");
            }
            sc.analysis.window = std::pair{as_number((*w)[0], "/analysis/window/0"),
                                           as_number((*w)[1], "/analysis/window/1")};
        }
        if (const auto k = it->find("k_clusters"); k != it->end()) {
            sc.analysis.k_clusters = as_index(*k, child(path, "k_clusters"));
        }
        if (const auto ops = it->find("observation_points"); ops != it->end()) {
            as_array(*ops, "/analysis/observation_points");
            for (std::size_t k = 0; k < ops->size(); ++k) {
                const auto opath = child("/analysis/observation_points", k);
                const auto& o = (*ops)[k];
                expect_keys(o, opath, {"bus", "to_bus", "device"});
                ObservationPoint op;
                op.bus = as_index(require(o, opath, "bus"), child(opath, "bus"));
                if (const auto t = o.find("to_bus"); t != o.end()) {
                    op.to_bus = as_index(*t, child(opath, "to_bus"));
                }
                if (const auto d = o.find("device"); d != o.end()) {
                    op.device = as_string(*d, child(opath, "device"));
                }
                sc.analysis.observation_points.push_back(op);
            }
        }
        if (const auto names = it->find("devices"); names != it->end()) {
            as_array(*names, "/analysis/devices");
            for (std::size_t k = 0; k < names->size(); ++k) {
                sc.analysis.devices.push_back(as_string((*names)[k], child("/analysis/devices", k)));
            }
        }
    }
    apply_system_base(sc);
    return sc;
}

inline Json scenario_to_json(const Scenario& sc)
{
    using namespace io_detail;
    Json doc;
    doc["description"] = sc.description;
    doc["system"] = {{"f_nominal", sc.system.f_nominal}, {"s_base", sc.system.s_base}};
    doc["buses"] = Json::array();
    for (const auto& b : sc.network.buses) {
        doc["buses"].push_back({{"id", b.id},
                                {"name", b.name},
                                {"kind", bus_kind_name(b.kind)},
                                {"v_set", b.v_set},
                                {"angle", b.angle},
                                {"nominal_kv", b.nominal_voltage}});
    }
    doc["branches"] = Json::array();
    for (const auto& br : sc.network.branches) {
        doc["branches"].push_back({{"from", br.from_bus},
                                   {"to", br.to_bus},
                                   {"z", complex_json(br.series_impedance)},
                                   {"y_shunt", complex_json(br.shunt_admittance_total)},
                                   {"tap", br.tap_ratio}});
    }
    doc["shunts"] = Json::array();
    for (const auto& sh : sc.network.shunts) {
        doc["shunts"].push_back({{"bus", sh.bus}, {"y", complex_json(sh.admittance)}});
    }
    doc["devices"] = Json::array();
    for (const auto& d : sc.devices) {
        Json j{{"name", d.name}, {"bus", d.bus}, {"p_set", d.p_set}};
        j.update(model_json(d.model));
        doc["devices"].push_back(std::move(j));
    }
    doc["events"] = Json::array();
    for (const auto& ev : sc.events) {
        doc["events"].push_back(event_json(ev));
    }
    doc["simulation"] = {{"t_end", sc.simulation.t_end}, {"dt", sc.simulation.dt},
                         {"tolerance", sc.simulation.tolerance}};
    Json analysis;
    if (sc.analysis.window) {
        analysis["window"] = Json::array({sc.analysis.window->first, sc.analysis.window->second});
    }
    analysis["k_clusters"] = sc.analysis.k_clusters;
    analysis["observation_points"] = Json::array();
    for (const auto& op : sc.analysis.observation_points) {
        Json o{{"bus", op.bus}};
        if (op.to_bus) {
            o["to_bus"] = *op.to_bus;
        }
        if (op.device) {
            o["device"] = *op.device;
        }
        analysis["observation_points"].push_back(std::move(o));
    }
    analysis["devices"] = sc.analysis.devices;
    doc["analysis"] = std::move(analysis);
    return doc;
}

inline Scenario parse_scenario(std::string_view text)
{
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw ScenarioError("", std::string("malformed JSON: ") + e.what());
    }
    return scenario_from_json(doc);
}

inline std::string serialize_scenario(const Scenario& sc) { return scenario_to_json(sc).dump(2) + "\n"; }

inline Scenario load_scenario(const std::string& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ScenarioError("", "cannot open " + file);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

} // namespace cfcoh
