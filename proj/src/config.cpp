#include "lenstrace/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace lenstrace {

using nlohmann::json;

namespace {

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
    if (!doc.is_object()) throw std::invalid_argument(where + " must be an object");
    for (const auto& [key, value] : doc.items()) {
        if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
    }
}

Range range_from_json(const json& v, const std::string& name) {
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument(name + " must be [lo, hi]");
    Range r{v[0].get<double>(), v[1].get<double>()};
    if (r.lo < 0.0 || r.hi < r.lo) throw std::invalid_argument(name + " must satisfy 0 <= lo <= hi");
    return r;
}

}  // namespace

PsfGridSpec grid_spec_from_json(const json& doc, PsfGridSpec s) {
    check_keys(doc,
               {"rows", "cols", "wavelengths_nm", "pupil_samples", "oversample", "crop_energy", "max_kernel",
                "reference_wavelength_nm", "pupil_margin", "spot_margin", "obliquity", "threads"},
               "grid");
    if (doc.contains("rows")) s.rows = doc["rows"].get<int>();
    if (doc.contains("cols")) s.cols = doc["cols"].get<int>();
    if (doc.contains("wavelengths_nm")) s.wavelengths_nm = doc["wavelengths_nm"].get<std::vector<double>>();
    if (doc.contains("pupil_samples")) s.pupil_samples = doc["pupil_samples"].get<int>();
    if (doc.contains("oversample")) s.oversample = doc["oversample"].get<int>();
    if (doc.contains("crop_energy")) s.crop_energy = doc["crop_energy"].get<double>();
    if (doc.contains("max_kernel")) s.max_kernel = doc["max_kernel"].get<int>();
    if (doc.contains("reference_wavelength_nm")) s.reference_wavelength_nm = doc["reference_wavelength_nm"].get<double>();
    if (doc.contains("pupil_margin")) s.pupil_margin = doc["pupil_margin"].get<double>();
    if (doc.contains("spot_margin")) s.spot_margin = doc["spot_margin"].get<double>();
    if (doc.contains("threads")) s.threads = doc["threads"].get<int>();
    if (doc.contains("obliquity")) {
        std::string o = doc["obliquity"].get<std::string>();
        if (o == "inclination") s.obliquity = ObliquityPolicy::Inclination;
        else if (o == "literal") s.obliquity = ObliquityPolicy::Literal;
        else throw std::invalid_argument("obliquity must be 'inclination' or 'literal'");
    }
    if (s.rows <= 0 || s.cols <= 0 || s.pupil_samples <= 0 || s.oversample <= 0 || s.max_kernel < 1 ||
        s.max_kernel % 2 == 0 || !(s.crop_energy > 0.0 && s.crop_energy <= 1.0) || s.wavelengths_nm.empty()) {
        throw std::invalid_argument("invalid grid settings");
    }
    return s;
}

json to_json(const PsfGridSpec& s) {
    return {{"rows", s.rows},
            {"cols", s.cols},
            {"wavelengths_nm", s.wavelengths_nm},
            {"pupil_samples", s.pupil_samples},
            {"oversample", s.oversample},
            {"crop_energy", s.crop_energy},
            {"max_kernel", s.max_kernel},
            {"reference_wavelength_nm", s.reference_wavelength_nm},
            {"pupil_margin", s.pupil_margin},
            {"spot_margin", s.spot_margin},
            {"obliquity", s.obliquity == ObliquityPolicy::Literal ? "literal" : "inclination"},
            {"threads", s.threads}};
}

SimulationConfig simulation_from_json(const json& doc, SimulationConfig c) {
    check_keys(doc, {"color_temperatures", "shot", "read", "demosaic", "mosaic", "threads"}, "simulation");
    if (doc.contains("color_temperatures")) c.color_temperatures = doc["color_temperatures"].get<std::vector<int>>();
    if (doc.contains("shot")) c.shot = range_from_json(doc["shot"], "shot");
    if (doc.contains("read")) c.read = range_from_json(doc["read"], "read");
    if (doc.contains("demosaic")) c.demosaic = parse_demosaic(doc["demosaic"].get<std::string>());
    if (doc.contains("mosaic")) c.mosaic = doc["mosaic"].get<bool>();
    if (doc.contains("threads")) c.threads = doc["threads"].get<int>();
    return c;
}

json to_json(const SimulationConfig& c) {
    return {{"color_temperatures", c.color_temperatures},
            {"shot", {c.shot.lo, c.shot.hi}},
            {"read", {c.read.lo, c.read.hi}},
            {"demosaic", to_string(c.demosaic)},
            {"mosaic", c.mosaic},
            {"threads", c.threads}};
}

namespace {

std::vector<double> steps(double lo, double hi, double step) {
    std::vector<double> v;
    for (double x = lo; x <= hi + 1e-9; x += step) v.push_back(x);
    return v;
}

}  // namespace

Preset preset(const std::string& name) {
    if (name == "dslr") return {"dslr", 400, 600, steps(400, 700, 10), 1750.0, 256};
    if (name == "phone") return {"phone", 300, 400, steps(400, 730, 10), 600.0, 256};
    if (name == "desk") return {"desk", 6, 8, steps(400, 700, 50), 1750.0, 256};
    throw std::invalid_argument("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"dslr", "phone", "desk"}; }

PsfGridSpec apply_preset(const Preset& p, PsfGridSpec base) {
    base.rows = p.rows;
    base.cols = p.cols;
    base.wavelengths_nm = p.wavelengths_nm;
    return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config '" + path.string() + "'");
    json doc = json::parse(in);
    check_keys(doc, {"prescription", "grid", "simulation", "object_distance_mm", "preset"}, "config");
    RunConfig rc;
    if (doc.contains("preset")) {
        Preset p = preset(doc["preset"].get<std::string>());
        rc.grid = apply_preset(p, rc.grid);
        rc.object_distance_mm = p.object_distance_mm;
    }
    if (doc.contains("prescription")) {
        std::filesystem::path p = doc["prescription"].get<std::string>();
        rc.prescription = p.is_absolute() ? p : path.parent_path() / p;
    }
    if (doc.contains("grid")) rc.grid = grid_spec_from_json(doc["grid"], rc.grid);
    if (doc.contains("simulation")) rc.simulation = simulation_from_json(doc["simulation"], rc.simulation);
    if (doc.contains("object_distance_mm")) rc.object_distance_mm = doc["object_distance_mm"].get<double>();
    return rc;
}

}  // namespace lenstrace
