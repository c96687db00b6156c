#include "ricci_mmp/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ricci_mmp {
namespace {

constexpr char kFieldMagic[8] = {'R', 'M', 'M', 'P', 'F', 'L', 'D', '1'};

std::string json_type_name(const Json& j) { return j.type_name(); }

[[noreturn]] void schema_fail(const std::string& where, const std::string& what) {
    throw SchemaError(where + ": " + what);
}

double number_at(const Json& j, const std::string& where) {
    if (!j.is_number()) schema_fail(where, "expected a number, got " + json_type_name(j));
    return j.get<double>();
}

long long integer_at(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) schema_fail(where, "expected an integer, got " + json_type_name(j));
    return j.get<long long>();
}

Rational rational_at(const Json& j, const std::string& where) {
    if (!j.is_string()) schema_fail(where, "rationals are \"p/q\" strings, got " + json_type_name(j));
    try {
        return parse_rational(j.get<std::string>());
    } catch (const std::domain_error& e) {
        schema_fail(where, e.what());
    }
}

}  // namespace

void require_keys(const Json& j, const std::vector<std::string>& required,
                  const std::vector<std::string>& optional, const std::string& where) {
    if (!j.is_object()) schema_fail(where, "expected an object, got " + json_type_name(j));
    for (const std::string& key : required)
        if (!j.contains(key)) schema_fail(where, "missing required field \"" + key + "\"");
    for (const auto& item : j.items()) {
        const std::string& key = item.key();
        bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                     std::find(optional.begin(), optional.end(), key) != optional.end();
        if (!known) schema_fail(where, "unknown field \"" + key + "\"");
    }
}

Json fan_to_json(const ToricSurfaceFan& fan) {
    Json rays = Json::array();
    for (const RayVector& r : fan.rays) rays.push_back(Json::array({r.x, r.y}));
    return Json{{"rays", rays}};
}

ToricSurfaceFan fan_from_json(const Json& j) {
    require_keys(j, {"rays"}, {}, "fan");
    const Json& rays = j.at("rays");
    if (!rays.is_array()) schema_fail("fan.rays", "expected an array");
    std::vector<RayVector> out;
    for (size_t i = 0; i < rays.size(); ++i) {
        const Json& r = rays[i];
        std::string where = "fan.rays[" + std::to_string(i) + "]";
        if (!r.is_array() || r.size() != 2) schema_fail(where, "expected [x, y]");
        out.push_back({integer_at(r[0], where), integer_at(r[1], where)});
    }
    try {
        return validate_fan(out);
    } catch (const ToricError& e) {
        schema_fail("fan", e.what());
    }
}

Json divisor_to_json(const WeilDivisor& d) {
    Json out = Json::array();
    for (const Rational& c : d.coeffs) out.push_back(format_rational(c));
    return out;
}

WeilDivisor divisor_from_json(const Json& j) {
    if (!j.is_array()) schema_fail("divisor", "expected an array of \"p/q\" strings");
    WeilDivisor d;
    for (size_t i = 0; i < j.size(); ++i)
        d.coeffs.push_back(rational_at(j[i], "divisor[" + std::to_string(i) + "]"));
    return d;
}

std::string contraction_type_name(ContractionType t) {
    switch (t) {
        case ContractionType::Divisorial: return "divisorial";
        case ContractionType::MoriFiber: return "mori_fiber";
        case ContractionType::PointContraction: return "point_contraction";
        case ContractionType::Flip: return "flip";
    }
    return "unknown";
}

std::string terminal_state_name(TerminalState t) {
    switch (t) {
        case TerminalState::MinimalModel: return "minimal_model";
        case TerminalState::MoriFiberSpace: return "mori_fiber_space";
        case TerminalState::Point: return "point";
        case TerminalState::NotGoodDivisor: return "not_good_divisor";
    }
    return "unknown";
}

Json trace_to_json(const MmpTrace& trace) {
    Json out;
    out["initial"] = {{"fan", fan_to_json(trace.initial.fan)},
                      {"h", divisor_to_json(trace.initial.h)}};
    Json steps = Json::array();
    for (const MmpStep& s : trace.steps) {
        Json step;
        step["lambda"] = format_rational(s.lambda);
        step["T"] = format_rational(s.T);
        step["kind"] = contraction_type_name(s.kind.type);
        step["contracted_rays"] = s.kind.rays;
        if (s.pair_after) {
            step["fan_after"] = fan_to_json(s.pair_after->fan);
            step["h_after"] = divisor_to_json(s.pair_after->h);
        }
        steps.push_back(std::move(step));
    }
    out["steps"] = std::move(steps);
    out["terminal"] = terminal_state_name(trace.terminal);
    if (trace.offending) {
        out["offending"] = {{"index", trace.offending->index},
                            {"lambda", format_rational(trace.offending->lambda)},
                            {"T", format_rational(trace.offending->T)},
                            {"extremal", trace.offending->extremal},
                            {"reason", trace.offending->reason}};
    }
    return out;
}

std::string render_trace_table(const MmpTrace& trace) {
    std::ostringstream os;
    os << "step  lambda      T           kind               contracted_rays\n";
    int i = 1;
    for (const MmpStep& s : trace.steps) {
        std::string rays = "[";
        for (size_t k = 0; k < s.kind.rays.size(); ++k) {
            if (k) rays += ",";
            rays += std::to_string(s.kind.rays[k]);
        }
        rays += "]";
        char line[160];
        std::snprintf(line, sizeof line, "%-5d %-11s %-11s %-18s %s\n", i++,
                      format_rational(s.lambda).c_str(), format_rational(s.T).c_str(),
                      contraction_type_name(s.kind.type).c_str(), rays.c_str());
        os << line;
    }
    os << "terminal: " << terminal_state_name(trace.terminal) << "\n";
    return os.str();
}

Json density_to_json(const DensitySpec& spec) {
    Json out;
    out["constant"] = spec.smooth.constant;
    Json modes = Json::array();
    for (const TrigMode& m : spec.smooth.modes)
        modes.push_back({{"kx", m.kx}, {"ky", m.ky}, {"cos", m.a_cos}, {"sin", m.a_sin}});
    out["modes"] = std::move(modes);
    Json zeros = Json::array();
    for (const ZeroFactor& z : spec.zeros)
        zeros.push_back({{"x", z.x}, {"y", z.y}, {"order", z.order}});
    out["zeros"] = std::move(zeros);
    Json poles = Json::array();
    for (const PoleFactor& p : spec.poles)
        poles.push_back({{"x", p.x}, {"y", p.y}, {"order", p.order}});
    out["poles"] = std::move(poles);
    return out;
}

DensitySpec density_from_json(const Json& j) {
    require_keys(j, {}, {"constant", "modes", "zeros", "poles"}, "density");
    DensitySpec spec;
    if (j.contains("constant")) spec.smooth.constant = number_at(j["constant"], "density.constant");
    if (j.contains("modes")) {
        if (!j["modes"].is_array()) schema_fail("density.modes", "expected an array");
        for (size_t i = 0; i < j["modes"].size(); ++i) {
            const Json& m = j["modes"][i];
            std::string where = "density.modes[" + std::to_string(i) + "]";
            require_keys(m, {"kx", "ky"}, {"cos", "sin"}, where);
            TrigMode tm;
            tm.kx = int(integer_at(m["kx"], where + ".kx"));
            tm.ky = int(integer_at(m["ky"], where + ".ky"));
            if (m.contains("cos")) tm.a_cos = number_at(m["cos"], where + ".cos");
            if (m.contains("sin")) tm.a_sin = number_at(m["sin"], where + ".sin");
            spec.smooth.modes.push_back(tm);
        }
    }
    auto read_points = [&](const char* key, auto push) {
        if (!j.contains(key)) return;
        const Json& arr = j[key];
        if (!arr.is_array()) schema_fail(std::string("density.") + key, "expected an array");
        for (size_t i = 0; i < arr.size(); ++i) {
            std::string where = std::string("density.") + key + "[" + std::to_string(i) + "]";
            require_keys(arr[i], {"x", "y", "order"}, {}, where);
            push(number_at(arr[i]["x"], where + ".x"), number_at(arr[i]["y"], where + ".y"),
                 number_at(arr[i]["order"], where + ".order"));
        }
    };
    read_points("zeros", [&](double x, double y, double o) { spec.zeros.push_back({x, y, o}); });
    read_points("poles", [&](double x, double y, double o) { spec.poles.push_back({x, y, o}); });
    try {
        validate_density_spec(spec);
    } catch (const DensityError& e) {
        schema_fail("density", e.what());
    }
    return spec;
}

void write_field(const std::string& path, const ScalarField& f) {
    std::string bytes;
    bytes.reserve(16 + f.values.size() * sizeof(double));
    bytes.append(kFieldMagic, sizeof kFieldMagic);
    uint32_t n = uint32_t(f.grid.n), reserved = 0;
    bytes.append(reinterpret_cast<const char*>(&n), sizeof n);
    bytes.append(reinterpret_cast<const char*>(&reserved), sizeof reserved);
    bytes.append(reinterpret_cast<const char*>(f.values.data()),
                 f.values.size() * sizeof(double));
    write_text_file(path, bytes);
}

ScalarField read_field(const std::string& path) {
    std::string bytes = read_text_file(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kFieldMagic, sizeof kFieldMagic) != 0)
        throw SchemaError(path + ": not a field snapshot (bad magic)");
    uint32_t n = 0;
    std::memcpy(&n, bytes.data() + 8, sizeof n);
    PeriodicGrid grid;
    try {
        grid = make_grid(int(n));
    } catch (const GridError& e) {
        throw SchemaError(path + ": " + e.what());
    }
    size_t expected = 16 + size_t(grid.points()) * sizeof(double);
    if (bytes.size() != expected)
        throw SchemaError(path + ": truncated field snapshot (" + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(expected) + ")");
    ScalarField f{grid, std::vector<double>(size_t(grid.points()))};
    std::memcpy(f.values.data(), bytes.data() + 16, f.values.size() * sizeof(double));
    return f;
}

std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ostringstream os;
    for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_full(row[i]);
        os << "\n";
    }
    return os.str();
}

std::string flow_monitor_csv(const MonitorLog& log) {
    std::vector<std::vector<double>> rows;
    rows.reserve(log.samples.size());
    for (const MonitorSample& s : log.samples)
        rows.push_back({s.t, s.volume_ratio_min, s.volume_ratio_max, s.class_mass, s.phi_inf_norm,
                        s.phi_dot_inf_norm, s.scalar_curvature_inf_norm, s.fixed_point_gap});
    return csv_table({"t", "volume_ratio_min", "volume_ratio_max", "class_mass", "phi_inf",
                      "phi_dot_inf", "scal_inf", "fixed_point_gap"},
                     rows);
}

std::string sphere_monitor_csv(const SphereMonitorLog& log) {
    std::vector<std::vector<double>> rows;
    rows.reserve(log.samples.size());
    for (const SphereMonitorSample& s : log.samples)
        rows.push_back({s.t, s.area, s.min_v, s.max_v, s.max_abs_k, s.gauss_bonnet_residual});
    return csv_table({"t", "A", "min_v", "max_v", "max_abs_K", "gauss_bonnet_residual"}, rows);
}

std::string stability_csv(const StabilityReport& report) {
    std::vector<std::vector<double>> rows;
    rows.reserve(report.pairs.size());
    for (const StabilityPairResult& p : report.pairs)
        rows.push_back({double(p.pair_id), p.l1, p.linf, p.ratio});
    return csv_table({"pair_id", "l1_distance", "linf_distance", "ratio"}, rows);
}

void write_text_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp~";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw SchemaError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), std::streamsize(content.size()));
        if (!out) throw SchemaError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw SchemaError("cannot move output into place at " + path + ": " + ec.message());
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Json load_json_file(const std::string& path) {
    std::string text = read_text_file(path);
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SchemaError(path + ": malformed JSON");
    return j;
}

void write_json_file(const std::string& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace ricci_mmp
