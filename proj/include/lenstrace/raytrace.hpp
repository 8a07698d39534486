#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "lenstrace/lens_model.hpp"
#include "lenstrace/vec3.hpp"

namespace lenstrace {

/// Outcome of a ray operation. Anything but Ok means the ray carries no energy.
enum class RayStatus { Ok, NoIntersection, Vignetted, TotalInternalReflection, NoConvergence };

const char* to_string(RayStatus s);

struct Ray {
    Vec3 origin;
    Vec3 direction;        // unit
    double opl = 0.0;      // accumulated optical path length, mm
    double wavelength_nm = 550.0;

    Vec3 at(double t) const { return origin + direction * t; }
};

struct SurfaceHit {
    Vec3 point;
    Vec3 normal;  // unit gradient of z - f(x, y), oriented toward +z
    double t = 0.0;
};

inline constexpr double kIntersectTolerance = 1e-10;  // mm
inline constexpr int kIntersectMaxIterations = 50;

/// Newton solve of the ray / sag system seeded from the sphere (or plane) closed form.
/// With clip == false the semi-diameter is ignored (used while aiming).
RayStatus intersect(const Ray& ray, const Surface& surface, double vertex_z, SurfaceHit& hit,
                    bool clip = true);

/// Vector Snell refraction. Either orientation of the normal is accepted.
RayStatus refract(const Vec3& d, const Vec3& normal, double eta1, double eta2, Vec3& out);

/// A traced pupil sample: the position on the pupil plane, the exit direction
/// and the optical path length from the source point.
struct TraceResult {
    Vec3 pupil_point;
    Vec3 direction;
    double opl = 0.0;
};

/// Per-wavelength view of a prescription with indices resolved once.
class TraceContext {
public:
    TraceContext(const LensPrescription& lens, double wavelength_nm);

    const LensPrescription& lens() const { return *lens_; }
    double wavelength_nm() const { return wavelength_nm_; }
    std::size_t surface_count() const { return vertex_z_.size(); }
    double vertex_z(std::size_t i) const { return vertex_z_[i]; }
    /// Index in front of surface i; i == surface_count() is image space.
    double index(std::size_t i) const { return index_[i]; }

    /// Traces a ray leaving the object point through (u, v) on the first vertex
    /// plane, through surfaces [0, last_surface). Returns the ray just after the
    /// last processed surface.
    RayStatus propagate(const Vec3& object_point, double u, double v, std::size_t last_surface,
                        bool clip, Ray& out) const;
    /// Hit on surface `index` (no refraction there) for the same launch.
    RayStatus hit_surface(const Vec3& object_point, double u, double v, std::size_t index, bool clip,
                          Vec3& out) const;
    /// Full trace to the plane z = plane_z behind the last surface.
    RayStatus to_plane(const Vec3& object_point, double u, double v, double plane_z, bool clip,
                       Ray& out) const;

private:
    const LensPrescription* lens_;
    double wavelength_nm_;
    std::vector<double> vertex_z_;
    std::vector<double> index_;
};

inline constexpr double kAimTolerance = 1e-10;  // mm
inline constexpr int kAimMaxIterations = 30;

/// Launch coordinates (u, v) on the first vertex plane.
struct Launch {
    double u = 0.0;
    double v = 0.0;
};

/// Newton aim: finds the launch whose ray reaches `target` (x, y) on the plane
/// z = plane_z (or on surface `surface` when set). Apertures are ignored while
/// iterating.
RayStatus aim_at_plane(const TraceContext& ctx, const Vec3& object_point, double target_x, double target_y,
                       double plane_z, Launch& launch);
RayStatus aim_at_surface(const TraceContext& ctx, const Vec3& object_point, double target_x,
                         double target_y, std::size_t surface, Launch& launch);

/// Ray from the object point that lands on (px, py) of the exit-pupil plane.
/// Vignetted (or TIR) rays are reported through the status; `out` is valid
/// only for RayStatus::Ok.
RayStatus trace(const TraceContext& ctx, const Vec3& object_point, double px, double py, TraceResult& out);
RayStatus trace(const LensPrescription& lens, const Vec3& object_point, double px, double py,
                double wavelength_nm, TraceResult& out);

class ChiefRayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChiefRay {
    Launch launch;
    Vec3 pupil_point;  // on the exit-pupil plane
    Vec3 image_point;  // on the image plane
};

/// Ray through the stop center, located to within kAimTolerance on the stop.
ChiefRay chief_ray(const TraceContext& ctx, const Vec3& object_point);
/// (x''_c, y''_c) of the chief ray on the image plane.
std::pair<double, double> chief_ray_center(const LensPrescription& lens, const Vec3& object_point,
                                           double wavelength_nm);

/// Object point whose chief ray lands at the given image-plane position,
/// placed on the object plane.
Vec3 object_point_for_image(const TraceContext& ctx, double image_x, double image_y);

/// Landing points of an unaimed launch grid over the first surface aperture
/// (only unvignetted rays).
struct BeamFootprint {
    std::vector<Vec3> pupil_points;
    std::vector<Vec3> image_points;
    std::size_t launched = 0;
};
BeamFootprint trace_footprint(const TraceContext& ctx, const Vec3& object_point, int grid = 41);

}  // namespace lenstrace
