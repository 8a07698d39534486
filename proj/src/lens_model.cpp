#include "lenstrace/lens_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lenstrace {

using nlohmann::json;

namespace {

constexpr double kImageSurfaceTolerance = 1e-6;  // mm

[[noreturn]] void fail(const std::string& what) { throw SchemaError(what); }

template <class T>
T require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) fail(where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(where + ": bad value for '" + key + "': " + e.what());
    }
}

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.size() == 1) return ys.front();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    if (hi == 0) hi = 1;
    if (hi >= xs.size()) hi = xs.size() - 1;
    std::size_t lo = hi - 1;
    double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

Material parse_material(const json& j, const std::string& id) {
    const std::string where = "material '" + id + "'";
    if (j.contains("table")) {
        std::vector<double> wl, n;
        for (const auto& row : j.at("table")) {
            if (!row.is_array() || row.size() != 2) fail(where + ": table rows must be [nm, n]");
            wl.push_back(row[0].get<double>());
            n.push_back(row[1].get<double>());
        }
        try {
            return Material(std::move(wl), std::move(n));
        } catch (const std::invalid_argument& e) {
            fail(where + ": " + e.what());
        }
    }
    if (j.contains("sellmeier")) {
        const auto& s = j.at("sellmeier");
        auto b = require<std::vector<double>>(s, "B", where);
        auto c = require<std::vector<double>>(s, "C", where);
        auto range = require<std::vector<double>>(j, "range_nm", where);
        if (b.size() != c.size() || b.empty()) fail(where + ": sellmeier B and C sizes differ");
        if (range.size() != 2 || !(range[0] < range[1])) fail(where + ": bad range_nm");
        return Material::from_sellmeier(b, c, range[0], range[1]);
    }
    if (j.contains("constant")) {
        return Material::constant(j.at("constant").get<double>());
    }
    fail(where + ": expected 'table', 'sellmeier' or 'constant'");
}

Surface parse_surface(const json& j, std::size_t index) {
    const std::string where = "surface " + std::to_string(index);
    Surface s;
    s.curvature = require<double>(j, "curvature", where);
    s.semi_diameter = require<double>(j, "semi_diameter", where);
    s.thickness = require<double>(j, "thickness", where);
    s.material = j.value("material", std::string("air"));
    s.is_stop = j.value("is_stop", false);
    if (j.contains("coeffs")) {
        for (const auto& [key, value] : j.at("coeffs").items()) {
            int order = 0;
            std::size_t used = 0;
            try {
                order = std::stoi(key, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != key.size() || order < 2 || order > kMaxDeformationOrder || order % 2 != 0) {
                fail(where + ": deformation order '" + key + "' not an even power in 2..16");
            }
            s.deformation[order / 2 - 1] = value.get<double>();
        }
    }
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Material

Material::Material(std::vector<double> wavelengths_nm, std::vector<double> indices)
    : wavelengths_(std::move(wavelengths_nm)), indices_(std::move(indices)) {
    if (wavelengths_.empty() || wavelengths_.size() != indices_.size()) {
        throw std::invalid_argument("index table is empty or ragged");
    }
    for (std::size_t i = 1; i < wavelengths_.size(); ++i) {
        if (!(wavelengths_[i] > wavelengths_[i - 1])) {
            throw std::invalid_argument("index table wavelengths must increase");
        }
    }
}

Material Material::constant(double index, double lo_nm, double hi_nm) {
    return Material({lo_nm, hi_nm}, {index, index});
}

Material Material::from_sellmeier(const std::vector<double>& b, const std::vector<double>& c,
                                  double lo_nm, double hi_nm) {
    std::vector<double> wl, n;
    const auto steps = static_cast<int>(std::ceil(hi_nm - lo_nm));
    for (int i = 0; i <= steps; ++i) {
        double nm = std::min(lo_nm + i, hi_nm);
        double l2 = (nm * 1e-3) * (nm * 1e-3);
        double n2 = 1.0;
        for (std::size_t k = 0; k < b.size(); ++k) n2 += b[k] * l2 / (l2 - c[k]);
        wl.push_back(nm);
        n.push_back(std::sqrt(n2));
    }
    return Material(std::move(wl), std::move(n));
}

bool Material::covers(double wavelength_nm) const {
    return wavelength_nm >= wavelengths_.front() && wavelength_nm <= wavelengths_.back();
}

double Material::index(double wavelength_nm) const {
    if (!covers(wavelength_nm)) {
        std::ostringstream os;
        os << "wavelength " << wavelength_nm << " nm outside material range [" << wavelengths_.front()
           << ", " << wavelengths_.back() << "]";
        throw std::out_of_range(os.str());
    }
    return interp(wavelengths_, indices_, wavelength_nm);
}

// ---------------------------------------------------------------------------
// LensPrescription

std::vector<double> LensPrescription::vertex_z() const {
    std::vector<double> z(surfaces.size(), 0.0);
    for (std::size_t i = 1; i < surfaces.size(); ++i) z[i] = z[i - 1] + surfaces[i - 1].thickness;
    return z;
}

std::size_t LensPrescription::refracting_count() const {
    if (surfaces.size() < 2) return surfaces.size();
    const Surface& last = surfaces.back();
    bool flat = last.curvature == 0.0 &&
                std::all_of(last.deformation.begin(), last.deformation.end(),
                            [](double a) { return a == 0.0; });
    double z = vertex_z().back();
    if (flat && std::abs(z - image_plane_z) <= kImageSurfaceTolerance && !last.is_stop &&
        last.material == surfaces[surfaces.size() - 2].material) {
        return surfaces.size() - 1;
    }
    return surfaces.size();
}

std::size_t LensPrescription::stop_index() const {
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        if (surfaces[i].is_stop) return i;
    }
    throw SchemaError("prescription has no stop surface");
}

const Material& LensPrescription::material(const std::string& id) const {
    auto it = materials.find(id);
    if (it != materials.end()) return it->second;
    if (id == "air") {
        static const Material air = Material::constant(1.0);
        return air;
    }
    throw SchemaError("unknown material '" + id + "'");
}

double LensPrescription::index_before(std::size_t i, double wavelength_nm) const {
    const std::string& id = i == 0 ? object_material : surfaces[i - 1].material;
    return material(id).index(wavelength_nm);
}

// ---------------------------------------------------------------------------
// Bayer

std::string to_string(BayerPattern p) {
    switch (p) {
        case BayerPattern::RGGB: return "RGGB";
        case BayerPattern::BGGR: return "BGGR";
        case BayerPattern::GRBG: return "GRBG";
        case BayerPattern::GBRG: return "GBRG";
    }
    return "RGGB";
}

BayerPattern parse_bayer(const std::string& s) {
    if (s == "RGGB") return BayerPattern::RGGB;
    if (s == "BGGR") return BayerPattern::BGGR;
    if (s == "GRBG") return BayerPattern::GRBG;
    if (s == "GBRG") return BayerPattern::GBRG;
    fail("unknown bayer pattern '" + s + "'");
}

int bayer_channel(BayerPattern p, int row, int col) {
    const std::string name = to_string(p);
    char c = name[static_cast<std::size_t>((row & 1) * 2 + (col & 1))];
    return c == 'R' ? 0 : (c == 'G' ? 1 : 2);
}

// ---------------------------------------------------------------------------
// SensorSpec

double SensorSpec::half_diagonal_mm() const {
    return 0.5 * pitch_mm() * std::hypot(static_cast<double>(height), static_cast<double>(width));
}

double SensorSpec::response(int channel, double wavelength_nm) const {
    if (wavelengths_nm.empty() || wavelength_nm < wavelengths_nm.front() - 1e-9 ||
        wavelength_nm > wavelengths_nm.back() + 1e-9) {
        throw std::out_of_range("wavelength " + std::to_string(wavelength_nm) +
                                " nm outside the sensor response table");
    }
    return interp(wavelengths_nm, spectral_response[static_cast<std::size_t>(channel)],
                  std::clamp(wavelength_nm, wavelengths_nm.front(), wavelengths_nm.back()));
}

double SensorSpec::illumination(double fov, double wavelength_nm) const {
    if (!relative_illumination) return 1.0;
    const auto& ri = *relative_illumination;
    std::vector<double> at_wl(ri.fov.size());
    double wl = std::clamp(wavelength_nm, wavelengths_nm.front(), wavelengths_nm.back());
    for (std::size_t i = 0; i < ri.fov.size(); ++i) at_wl[i] = interp(wavelengths_nm, ri.values[i], wl);
    return interp(ri.fov, at_wl, std::clamp(fov, ri.fov.front(), ri.fov.back()));
}

// ---------------------------------------------------------------------------
// Sag

double sag_rho2(const Surface& s, double rho2) {
    const double c = s.curvature;
    double arg = 1.0 - c * c * rho2;
    double z = c * rho2 / (1.0 + std::sqrt(arg));
    double p = rho2;
    for (double a : s.deformation) {
        z += a * p;
        p *= rho2;
    }
    return z;
}

double sag_slope_factor(const Surface& s, double rho2) {
    const double c = s.curvature;
    double f = c / std::sqrt(1.0 - c * c * rho2);
    double p = 1.0;  // rho^(j-2)
    int j = 2;
    for (double a : s.deformation) {
        f += j * a * p;
        p *= rho2;
        j += 2;
    }
    return f;
}

double surface_sag(const Surface& s, double x, double y) {
    double rho2 = x * x + y * y;
    if (rho2 > s.semi_diameter * s.semi_diameter) {
        throw ApertureError("sag evaluated outside the clear aperture");
    }
    if (s.curvature * s.curvature * rho2 > 1.0) {
        throw ApertureError("sag is not real at this radius");
    }
    return sag_rho2(s, rho2);
}

// ---------------------------------------------------------------------------
// Linear algebra

std::array<std::array<double, 3>, 3> invert3x3(const std::array<std::array<double, 3>, 3>& m) {
    double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                 m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                 m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if (det == 0.0 || !std::isfinite(det)) throw SchemaError("matrix is singular");
    std::array<std::array<double, 3>, 3> r{};
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return r;
}

namespace {

double frobenius(const std::array<std::array<double, 3>, 3>& m) {
    double s = 0.0;
    for (const auto& row : m)
        for (double v : row) s += v * v;
    return std::sqrt(s);
}

void validate_lens(const LensPrescription& lens, const std::vector<double>& wavelengths) {
    if (lens.surfaces.empty()) fail("prescription has no surfaces");
    if (!(lens.object_distance > 0.0) || !std::isfinite(lens.object_distance)) {
        fail("object_distance_mm must be positive and finite");
    }
    if (!(lens.full_fov_deg > 0.0 && lens.full_fov_deg < 180.0)) fail("full_fov_deg must be in (0, 180)");

    int stops = 0;
    for (std::size_t i = 0; i < lens.surfaces.size(); ++i) {
        const Surface& s = lens.surfaces[i];
        const std::string where = "surface " + std::to_string(i);
        if (!(s.semi_diameter > 0.0)) fail(where + ": semi_diameter must be positive");
        if (!std::isfinite(s.thickness)) fail(where + ": thickness must be finite");
        if (s.curvature * s.curvature * s.semi_diameter * s.semi_diameter > 1.0) {
            fail(where + ": sag is not real over the clear aperture");
        }
        if (i + 1 < lens.surfaces.size() && !(s.thickness > 0.0)) {
            fail(where + ": surfaces must be strictly ordered along the axis");
        }
        if (s.is_stop) ++stops;
        (void)lens.material(s.material);
    }
    if (stops != 1) fail("exactly one surface must be the stop (found " + std::to_string(stops) + ")");

    const std::size_t n = lens.refracting_count();
    if (lens.stop_index() >= n) fail("the stop must be a traced surface");
    const auto z = lens.vertex_z();
    double rear = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Surface& s = lens.surfaces[i];
        for (int k = 0; k <= 32; ++k) {
            double rho = s.semi_diameter * k / 32.0;
            rear = std::max(rear, z[i] + sag_rho2(s, rho * rho));
        }
    }
    if (!(lens.exit_pupil_z > rear)) fail("exit_pupil_z_mm must lie after the last refracting surface");
    if (!(lens.image_plane_z > lens.exit_pupil_z)) fail("image_plane_z_mm must lie after exit_pupil_z_mm");

    std::vector<std::string> used{lens.object_material};
    for (const auto& s : lens.surfaces) used.push_back(s.material);
    for (const auto& id : used) {
        const Material& m = lens.material(id);
        for (double v : m.indices()) {
            if (!(v >= 1.0)) fail("material '" + id + "' has index below 1");
        }
        for (double wl : wavelengths) {
            if (!m.covers(wl)) {
                fail("material '" + id + "' does not cover " + std::to_string(wl) + " nm");
            }
        }
    }
}

void validate_sensor(const SensorSpec& s) {
    if (!(s.pitch_um > 0.0)) fail("sensor pitch_um must be positive");
    if (s.height <= 0 || s.width <= 0) fail("sensor resolution must be positive");
    if (s.wavelengths_nm.empty()) fail("sensor wavelengths_nm is empty");
    for (std::size_t i = 1; i < s.wavelengths_nm.size(); ++i) {
        if (!(s.wavelengths_nm[i] > s.wavelengths_nm[i - 1])) fail("sensor wavelengths_nm must increase");
    }
    const char* names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c) {
        const auto& r = s.spectral_response[static_cast<std::size_t>(c)];
        if (r.size() != s.wavelengths_nm.size()) {
            fail(std::string("spectral_response.") + names[c] + " must match wavelengths_nm");
        }
        double total = 0.0;
        for (double v : r) {
            if (!(v >= 0.0 && v <= 1.0)) fail(std::string("spectral_response.") + names[c] + " outside [0,1]");
            total += v;
        }
        if (!(total > 0.0)) fail(std::string("spectral_response.") + names[c] + " has zero total response");
    }
    if (s.white_balance.empty()) fail("sensor wb table is empty");
    for (const auto& [temp, gains] : s.white_balance) {
        for (double g : gains) {
            if (!(g > 0.0) || !std::isfinite(g)) fail("wb gains must be positive (" + std::to_string(temp) + " K)");
        }
    }
    std::array<std::array<double, 3>, 3> inv;
    try {
        inv = invert3x3(s.ccm);
    } catch (const SchemaError&) {
        fail("ccm is not invertible");
    }
    double cond = frobenius(s.ccm) * frobenius(inv);
    if (!std::isfinite(cond) || cond > 1e12) fail("ccm is ill-conditioned");

    if (s.relative_illumination) {
        const auto& ri = *s.relative_illumination;
        if (ri.fov.empty() || ri.fov.front() != 0.0) fail("relative_illumination.fov must start at 0");
        for (std::size_t i = 1; i < ri.fov.size(); ++i) {
            if (!(ri.fov[i] > ri.fov[i - 1])) fail("relative_illumination.fov must increase");
        }
        if (ri.values.size() != ri.fov.size()) fail("relative_illumination.values must have one row per fov");
        for (std::size_t i = 0; i < ri.values.size(); ++i) {
            if (ri.values[i].size() != s.wavelengths_nm.size()) {
                fail("relative_illumination rows must match wavelengths_nm");
            }
            for (double v : ri.values[i]) {
                if (!(v >= 0.0 && v <= 1.0)) fail("relative_illumination values must lie in [0,1]");
                if (i == 0 && std::abs(v - 1.0) > 1e-12) fail("relative_illumination at fov 0 must be 1");
            }
        }
    }
}

}  // namespace

void validate(const OpticalSystem& system) {
    validate_sensor(system.sensor);
    validate_lens(system.lens, system.sensor.wavelengths_nm);
}

// ---------------------------------------------------------------------------
// JSON

OpticalSystem parse_prescription(const json& doc) {
    if (!doc.is_object()) fail("prescription document must be a JSON object");
    OpticalSystem sys;
    LensPrescription& lens = sys.lens;

    if (!doc.contains("surfaces") || !doc.at("surfaces").is_array()) fail("missing 'surfaces' array");
    std::size_t i = 0;
    for (const auto& s : doc.at("surfaces")) lens.surfaces.push_back(parse_surface(s, i++));
    if (doc.contains("materials")) {
        for (const auto& [id, m] : doc.at("materials").items()) lens.materials[id] = parse_material(m, id);
    }
    lens.object_material = doc.value("object_material", std::string("air"));
    lens.object_distance = require<double>(doc, "object_distance_mm", "prescription");
    lens.exit_pupil_z = require<double>(doc, "exit_pupil_z_mm", "prescription");
    lens.image_plane_z = require<double>(doc, "image_plane_z_mm", "prescription");
    lens.full_fov_deg = require<double>(doc, "full_fov_deg", "prescription");

    if (!doc.contains("sensor")) fail("missing 'sensor'");
    const json& js = doc.at("sensor");
    SensorSpec& s = sys.sensor;
    s.pitch_um = require<double>(js, "pitch_um", "sensor");
    auto res = require<std::vector<int>>(js, "resolution", "sensor");
    if (res.size() != 2) fail("sensor.resolution must be [H, W]");
    s.height = res[0];
    s.width = res[1];
    s.bayer = parse_bayer(require<std::string>(js, "bayer", "sensor"));
    s.wavelengths_nm = require<std::vector<double>>(js, "wavelengths_nm", "sensor");
    if (!js.contains("spectral_response")) fail("sensor: missing 'spectral_response'");
    const json& sr = js.at("spectral_response");
    s.spectral_response[0] = require<std::vector<double>>(sr, "r", "spectral_response");
    s.spectral_response[1] = require<std::vector<double>>(sr, "g", "spectral_response");
    s.spectral_response[2] = require<std::vector<double>>(sr, "b", "spectral_response");
    if (!js.contains("wb")) fail("sensor: missing 'wb'");
    for (const auto& [key, gains] : js.at("wb").items()) {
        int temp = 0;
        try {
            temp = std::stoi(key);
        } catch (const std::exception&) {
            fail("sensor.wb keys must be color temperatures");
        }
        auto g = gains.get<std::vector<double>>();
        if (g.size() != 3) fail("sensor.wb entries must be [gr, gg, gb]");
        s.white_balance[temp] = {g[0], g[1], g[2]};
    }
    auto ccm = require<std::vector<std::vector<double>>>(js, "ccm", "sensor");
    if (ccm.size() != 3) fail("sensor.ccm must be 3x3");
    for (std::size_t r = 0; r < 3; ++r) {
        if (ccm[r].size() != 3) fail("sensor.ccm must be 3x3");
        for (std::size_t c = 0; c < 3; ++c) s.ccm[r][c] = ccm[r][c];
    }
    if (js.contains("relative_illumination") && !js.at("relative_illumination").is_null()) {
        const json& ri = js.at("relative_illumination");
        RelativeIllumination table;
        table.fov = require<std::vector<double>>(ri, "fov", "relative_illumination");
        table.values = require<std::vector<std::vector<double>>>(ri, "values", "relative_illumination");
        s.relative_illumination = std::move(table);
    }

    validate(sys);
    return sys;
}

OpticalSystem load_prescription(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open prescription '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("prescription '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_prescription(doc);
}

json to_json(const OpticalSystem& sys) {
    json doc;
    json surfaces = json::array();
    for (const auto& s : sys.lens.surfaces) {
        json js;
        js["curvature"] = s.curvature;
        json coeffs = json::object();
        for (int k = 0; k < kDeformationTerms; ++k) {
            if (s.deformation[static_cast<std::size_t>(k)] != 0.0) {
                coeffs[std::to_string(2 * (k + 1))] = s.deformation[static_cast<std::size_t>(k)];
            }
        }
        js["coeffs"] = coeffs;
        js["semi_diameter"] = s.semi_diameter;
        js["thickness"] = s.thickness;
        js["material"] = s.material;
        js["is_stop"] = s.is_stop;
        surfaces.push_back(js);
    }
    doc["surfaces"] = surfaces;
    json materials = json::object();
    for (const auto& [id, m] : sys.lens.materials) {
        json table = json::array();
        for (std::size_t i = 0; i < m.wavelengths().size(); ++i) {
            table.push_back({m.wavelengths()[i], m.indices()[i]});
        }
        materials[id] = {{"table", table}};
    }
    doc["materials"] = materials;
    doc["object_material"] = sys.lens.object_material;
    doc["object_distance_mm"] = sys.lens.object_distance;
    doc["exit_pupil_z_mm"] = sys.lens.exit_pupil_z;
    doc["image_plane_z_mm"] = sys.lens.image_plane_z;
    doc["full_fov_deg"] = sys.lens.full_fov_deg;

    const SensorSpec& s = sys.sensor;
    json js;
    js["pitch_um"] = s.pitch_um;
    js["resolution"] = {s.height, s.width};
    js["bayer"] = to_string(s.bayer);
    js["wavelengths_nm"] = s.wavelengths_nm;
    js["spectral_response"] = {{"r", s.spectral_response[0]},
                               {"g", s.spectral_response[1]},
                               {"b", s.spectral_response[2]}};
    json wb = json::object();
    for (const auto& [temp, g] : s.white_balance) wb[std::to_string(temp)] = {g[0], g[1], g[2]};
    js["wb"] = wb;
    json ccm = json::array();
    for (const auto& row : s.ccm) ccm.push_back({row[0], row[1], row[2]});
    js["ccm"] = ccm;
    if (s.relative_illumination) {
        js["relative_illumination"] = {{"fov", s.relative_illumination->fov},
                                       {"values", s.relative_illumination->values}};
    }
    doc["sensor"] = js;
    return doc;
}

void save_prescription(const OpticalSystem& system, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << to_json(system).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Paraxial helpers

namespace {

struct YNu {
    double y;
    double nu;
};

// Refract at surface i then transfer to surface i+1 (or stop after the last traced surface).
YNu paraxial_step(const LensPrescription& lens, std::size_t i, YNu r, double wl, bool transfer) {
    double n0 = lens.index_before(i, wl);
    double n1 = lens.index_before(i + 1, wl);
    double power = lens.surfaces[i].curvature * (n1 - n0);
    r.nu -= r.y * power;
    if (transfer) r.y += lens.surfaces[i].thickness * r.nu / n1;
    return r;
}

}  // namespace

double paraxial_focal_length(const LensPrescription& lens, double wl) {
    const std::size_t n = lens.refracting_count();
    YNu r{1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) r = paraxial_step(lens, i, r, wl, i + 1 < n);
    return -1.0 / r.nu;
}

double paraxial_image_distance(const LensPrescription& lens, double wl) {
    const std::size_t n = lens.refracting_count();
    double n_obj = lens.index_before(0, wl);
    YNu r{lens.object_distance / n_obj, 1.0};
    for (std::size_t i = 0; i < n; ++i) r = paraxial_step(lens, i, r, wl, i + 1 < n);
    return -r.y * lens.index_before(n, wl) / r.nu;
}

double estimate_exit_pupil_z(const LensPrescription& lens, double wl) {
    const std::size_t n = lens.refracting_count();
    const std::size_t stop = lens.stop_index();
    const auto z = lens.vertex_z();
    YNu r{0.0, 1.0};
    for (std::size_t i = stop; i < n; ++i) {
        if (i == stop) {
            // Chief ray leaves the stop center; refraction at y = 0 leaves nu unchanged.
            if (i + 1 < n) r.y += lens.surfaces[i].thickness * r.nu / lens.index_before(i + 1, wl);
            continue;
        }
        r = paraxial_step(lens, i, r, wl, i + 1 < n);
    }
    return z[n - 1] - r.y * lens.index_before(n, wl) / r.nu;
}

}  // namespace lenstrace
