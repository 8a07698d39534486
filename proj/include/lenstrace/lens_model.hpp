#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace lenstrace {

/// Raised for any prescription or sensor description that violates the schema
/// or one of the physical invariants checked at load time.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation of a surface outside its clear aperture.
class ApertureError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Even-order deformation terms A2, A4, ..., A16.
inline constexpr int kMaxDeformationOrder = 16;
inline constexpr int kDeformationTerms = kMaxDeformationOrder / 2;

struct Surface {
    double curvature = 0.0;                           // 1/mm
    std::array<double, kDeformationTerms> deformation{};  // A2 at [0], A4 at [1], ...
    double semi_diameter = 0.0;                       // mm
    double thickness = 0.0;                           // mm, vertex to next vertex
    std::string material = "air";                     // medium after this surface
    bool is_stop = false;

    double deformation_coeff(int order) const { return deformation[order / 2 - 1]; }
    bool operator==(const Surface&) const = default;
};

/// Refractive index table, linearly interpolated in wavelength.
class Material {
public:
    Material() = default;
    Material(std::vector<double> wavelengths_nm, std::vector<double> indices);

    static Material constant(double index, double lo_nm = 200.0, double hi_nm = 2500.0);
    /// Sellmeier model tabulated at 1 nm over [lo_nm, hi_nm].
    static Material from_sellmeier(const std::vector<double>& b, const std::vector<double>& c,
                                   double lo_nm, double hi_nm);

    double index(double wavelength_nm) const;
    bool covers(double wavelength_nm) const;
    double min_wavelength() const { return wavelengths_.front(); }
    double max_wavelength() const { return wavelengths_.back(); }
    const std::vector<double>& wavelengths() const { return wavelengths_; }
    const std::vector<double>& indices() const { return indices_; }

    bool operator==(const Material&) const = default;

private:
    std::vector<double> wavelengths_;
    std::vector<double> indices_;
};

struct LensPrescription {
    std::vector<Surface> surfaces;  // object space -> image space
    std::map<std::string, Material> materials;
    std::string object_material = "air";
    double object_distance = 0.0;   // mm in front of the first vertex
    double exit_pupil_z = 0.0;      // mm, axial position of the pupil sampling plane
    double image_plane_z = 0.0;     // mm
    double full_fov_deg = 0.0;

    /// Axial position of each surface vertex; the first vertex sits at z = 0.
    std::vector<double> vertex_z() const;
    /// Surfaces that are traced; a trailing flat surface sitting on the image
    /// plane is a reference only and is excluded.
    std::size_t refracting_count() const;
    std::size_t stop_index() const;
    double object_z() const { return -object_distance; }
    const Material& material(const std::string& id) const;
    /// Index of the medium in front of surface i (i == refracting_count() gives image space).
    double index_before(std::size_t i, double wavelength_nm) const;

    bool operator==(const LensPrescription&) const = default;
};

enum class BayerPattern { RGGB, BGGR, GRBG, GBRG };

std::string to_string(BayerPattern p);
BayerPattern parse_bayer(const std::string& s);
/// Color channel (0=R, 1=G, 2=B) at the given sensor site.
int bayer_channel(BayerPattern p, int row, int col);

struct RelativeIllumination {
    std::vector<double> fov;                  // normalized field, ascending, fov[0] == 0
    std::vector<std::vector<double>> values;  // [fov][wavelength], on the sensor wavelength set
    bool operator==(const RelativeIllumination&) const = default;
};

struct SensorSpec {
    double pitch_um = 0.0;
    int height = 0;
    int width = 0;
    BayerPattern bayer = BayerPattern::RGGB;
    std::vector<double> wavelengths_nm;
    std::array<std::vector<double>, 3> spectral_response;  // r, g, b on wavelengths_nm
    std::map<int, std::array<double, 3>> white_balance;     // color temperature K -> gains
    std::array<std::array<double, 3>, 3> ccm{};             // camera RGB -> linear sRGB
    std::optional<RelativeIllumination> relative_illumination;

    double pitch_mm() const { return pitch_um * 1e-3; }
    /// Distance from the sensor center to a corner, mm.
    double half_diagonal_mm() const;
    /// Linearly interpolated channel response; throws outside the sampled range.
    double response(int channel, double wavelength_nm) const;
    /// Relative illumination at normalized field and wavelength (1 when no table).
    double illumination(double fov, double wavelength_nm) const;

    bool operator==(const SensorSpec&) const = default;
};

struct OpticalSystem {
    LensPrescription lens;
    SensorSpec sensor;
    bool operator==(const OpticalSystem&) const = default;
};

OpticalSystem load_prescription(const std::filesystem::path& path);
OpticalSystem parse_prescription(const nlohmann::json& doc);
nlohmann::json to_json(const OpticalSystem& system);
void save_prescription(const OpticalSystem& system, const std::filesystem::path& path);

/// Checks every invariant; throws SchemaError describing the first violation.
void validate(const OpticalSystem& system);

/// Sag z = f(x, y) measured from the surface vertex. Throws ApertureError
/// outside the clear aperture or where the conic root is not real.
double surface_sag(const Surface& s, double x, double y);
/// Unchecked sag as a function of rho^2; NaN where c^2 rho^2 > 1.
double sag_rho2(const Surface& s, double rho2);
/// (1/rho) df/drho, so that df/dx = x * slope_factor and df/dy = y * slope_factor.
double sag_slope_factor(const Surface& s, double rho2);

std::array<std::array<double, 3>, 3> invert3x3(const std::array<std::array<double, 3>, 3>& m);

/// Paraxial (y-nu) trace helpers.
double paraxial_focal_length(const LensPrescription& lens, double wavelength_nm);
/// Distance behind the last refracting vertex at which the finite object comes to focus.
double paraxial_image_distance(const LensPrescription& lens, double wavelength_nm);
/// Axial position of the paraxial image of the stop through the surfaces behind it.
double estimate_exit_pupil_z(const LensPrescription& lens, double wavelength_nm);

}  // namespace lenstrace
