#include "lenstrace/raytrace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lenstrace {

const char* to_string(RayStatus s) {
    switch (s) {
        case RayStatus::Ok: return "ok";
        case RayStatus::NoIntersection: return "no intersection";
        case RayStatus::Vignetted: return "vignetted";
        case RayStatus::TotalInternalReflection: return "total internal reflection";
        case RayStatus::NoConvergence: return "no convergence";
    }
    return "unknown";
}

RayStatus intersect(const Ray& ray, const Surface& s, double vertex_z, SurfaceHit& hit, bool clip) {
    const Vec3& d = ray.direction;
    Vec3 o{ray.origin.x, ray.origin.y, ray.origin.z - vertex_z};
    const double c = s.curvature;

    // Rebase onto the vertex plane so long object-space legs keep full precision.
    double t_base = 0.0;
    if (d.z != 0.0) {
        t_base = -o.z / d.z;
        o = o + d * t_base;
        o.z = 0.0;
    }

    // Seed: plane z = 0 or the base sphere c(x^2+y^2+z^2) - 2z = 0.
    double t;
    if (c == 0.0) {
        if (d.z == 0.0) return RayStatus::NoIntersection;
        t = -o.z / d.z;
    } else {
        double b = c * dot(o, d) - d.z;
        double cc = c * dot(o, o) - 2.0 * o.z;
        double disc = b * b - c * cc;
        if (disc >= 0.0) {
            double denom = -b - std::copysign(std::sqrt(disc), b);
            t = denom != 0.0 ? cc / denom : -o.z / d.z;
        } else {
            if (d.z == 0.0) return RayStatus::NoIntersection;
            t = -o.z / d.z;
        }
    }
    if (!std::isfinite(t)) return RayStatus::NoIntersection;

    bool converged = false;
    for (int it = 0; it < kIntersectMaxIterations; ++it) {
        Vec3 p = o + d * t;
        double rho2 = p.x * p.x + p.y * p.y;
        if (c * c * rho2 > 1.0) return RayStatus::NoIntersection;
        double g = p.z - sag_rho2(s, rho2);
        double k = sag_slope_factor(s, rho2);
        if (std::abs(g) <= kIntersectTolerance) {
            converged = true;
            break;
        }
        double dg = d.z - k * (p.x * d.x + p.y * d.y);
        if (dg == 0.0 || !std::isfinite(dg)) return RayStatus::NoIntersection;
        t -= g / dg;
        if (!std::isfinite(t)) return RayStatus::NoIntersection;
    }
    if (!converged) return RayStatus::NoIntersection;
    if (t_base + t < -kIntersectTolerance) return RayStatus::NoIntersection;

    Vec3 p = o + d * t;
    double rho2 = p.x * p.x + p.y * p.y;
    if (clip && rho2 > s.semi_diameter * s.semi_diameter) return RayStatus::Vignetted;
    double k = sag_slope_factor(s, rho2);
    hit.point = {p.x, p.y, p.z + vertex_z};
    hit.normal = normalize(Vec3{-k * p.x, -k * p.y, 1.0});
    hit.t = t_base + t;
    return RayStatus::Ok;
}

RayStatus refract(const Vec3& d, const Vec3& normal, double eta1, double eta2, Vec3& out) {
    // Orient the normal against the incident ray so cos_i > 0.
    Vec3 n = normal;
    double cos_i = -dot(n, d);
    if (cos_i < 0.0) {
        n = -n;
        cos_i = -cos_i;
    }
    double mu = eta1 / eta2;
    double sin2_t = mu * mu * (1.0 - cos_i * cos_i);
    if (sin2_t > 1.0) return RayStatus::TotalInternalReflection;
    double cos_t = std::sqrt(1.0 - sin2_t);
    out = d * mu + n * (mu * cos_i - cos_t);
    return RayStatus::Ok;
}

// ---------------------------------------------------------------------------

TraceContext::TraceContext(const LensPrescription& lens, double wavelength_nm)
    : lens_(&lens), wavelength_nm_(wavelength_nm) {
    const std::size_t n = lens.refracting_count();
    auto z = lens.vertex_z();
    vertex_z_.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
    index_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) index_[i] = lens.index_before(i, wavelength_nm);
}

RayStatus TraceContext::propagate(const Vec3& object_point, double u, double v, std::size_t last_surface,
                                  bool clip, Ray& ray) const {
    ray.origin = object_point;
    ray.direction = normalize(Vec3{u, v, 0.0} - object_point);
    ray.opl = 0.0;
    ray.wavelength_nm = wavelength_nm_;
    const auto& surfaces = lens_->surfaces;
    for (std::size_t i = 0; i < last_surface; ++i) {
        SurfaceHit hit;
        RayStatus st = intersect(ray, surfaces[i], vertex_z_[i], hit, clip);
        if (st != RayStatus::Ok) return st;
        ray.opl += index_[i] * hit.t;
        Vec3 refracted;
        st = refract(ray.direction, hit.normal, index_[i], index_[i + 1], refracted);
        if (st != RayStatus::Ok) return st;
        ray.origin = hit.point;
        ray.direction = refracted;
    }
    return RayStatus::Ok;
}

RayStatus TraceContext::hit_surface(const Vec3& object_point, double u, double v, std::size_t index,
                                    bool clip, Vec3& out) const {
    Ray ray;
    RayStatus st = propagate(object_point, u, v, index, clip, ray);
    if (st != RayStatus::Ok) return st;
    SurfaceHit hit;
    st = intersect(ray, lens_->surfaces[index], vertex_z_[index], hit, clip);
    if (st != RayStatus::Ok) return st;
    out = hit.point;
    return RayStatus::Ok;
}

RayStatus TraceContext::to_plane(const Vec3& object_point, double u, double v, double plane_z, bool clip,
                                 Ray& ray) const {
    RayStatus st = propagate(object_point, u, v, surface_count(), clip, ray);
    if (st != RayStatus::Ok) return st;
    if (ray.direction.z <= 0.0) return RayStatus::NoIntersection;
    double t = (plane_z - ray.origin.z) / ray.direction.z;
    if (t < 0.0) return RayStatus::NoIntersection;
    ray.opl += index_.back() * t;
    ray.origin = ray.at(t);
    return RayStatus::Ok;
}

// ---------------------------------------------------------------------------
// Aiming

namespace {

template <class Landing>
RayStatus newton_aim(Landing&& landing, double tx, double ty, Launch& launch) {
    constexpr double h = 1e-6;
    Launch cur = launch;
    double lx, ly;
    if (landing(cur.u, cur.v, lx, ly) != RayStatus::Ok) return RayStatus::NoConvergence;
    for (int it = 0; it < kAimMaxIterations; ++it) {
        double fx = lx - tx, fy = ly - ty;
        if (std::hypot(fx, fy) <= kAimTolerance) {
            launch = cur;
            return RayStatus::Ok;
        }
        double ax, ay, bx, by;
        if (landing(cur.u + h, cur.v, ax, ay) != RayStatus::Ok ||
            landing(cur.u, cur.v + h, bx, by) != RayStatus::Ok) {
            return RayStatus::NoConvergence;
        }
        double j00 = (ax - lx) / h, j10 = (ay - ly) / h;
        double j01 = (bx - lx) / h, j11 = (by - ly) / h;
        double det = j00 * j11 - j01 * j10;
        if (det == 0.0 || !std::isfinite(det)) return RayStatus::NoConvergence;
        double du = (j11 * fx - j01 * fy) / det;
        double dv = (-j10 * fx + j00 * fy) / det;
        // Damped step: back off while the trial ray is invalid.
        double scale = 1.0;
        bool stepped = false;
        for (int k = 0; k < 12; ++k) {
            Launch trial{cur.u - scale * du, cur.v - scale * dv};
            double nx, ny;
            if (landing(trial.u, trial.v, nx, ny) == RayStatus::Ok) {
                cur = trial;
                lx = nx;
                ly = ny;
                stepped = true;
                break;
            }
            scale *= 0.5;
        }
        if (!stepped) return RayStatus::NoConvergence;
    }
    if (std::hypot(lx - tx, ly - ty) <= kAimTolerance) {
        launch = cur;
        return RayStatus::Ok;
    }
    return RayStatus::NoConvergence;
}

}  // namespace

RayStatus aim_at_plane(const TraceContext& ctx, const Vec3& object_point, double tx, double ty, double plane_z,
                       Launch& launch) {
    auto landing = [&](double u, double v, double& x, double& y) {
        Ray ray;
        RayStatus st = ctx.to_plane(object_point, u, v, plane_z, false, ray);
        x = ray.origin.x;
        y = ray.origin.y;
        return st;
    };
    return newton_aim(landing, tx, ty, launch);
}

RayStatus aim_at_surface(const TraceContext& ctx, const Vec3& object_point, double tx, double ty,
                         std::size_t surface, Launch& launch) {
    auto landing = [&](double u, double v, double& x, double& y) {
        Vec3 p;
        RayStatus st = ctx.hit_surface(object_point, u, v, surface, false, p);
        x = p.x;
        y = p.y;
        return st;
    };
    return newton_aim(landing, tx, ty, launch);
}

RayStatus trace(const TraceContext& ctx, const Vec3& object_point, double px, double py, TraceResult& out) {
    Launch launch;
    const double pupil_z = ctx.lens().exit_pupil_z;
    if (aim_at_plane(ctx, object_point, px, py, pupil_z, launch) != RayStatus::Ok) {
        return RayStatus::Vignetted;
    }
    Ray ray;
    RayStatus st = ctx.to_plane(object_point, launch.u, launch.v, pupil_z, true, ray);
    if (st != RayStatus::Ok) return st == RayStatus::TotalInternalReflection ? st : RayStatus::Vignetted;
    out.pupil_point = ray.origin;
    out.direction = ray.direction;
    out.opl = ray.opl;
    return RayStatus::Ok;
}

RayStatus trace(const LensPrescription& lens, const Vec3& object_point, double px, double py,
                double wavelength_nm, TraceResult& out) {
    TraceContext ctx(lens, wavelength_nm);
    return trace(ctx, object_point, px, py, out);
}

ChiefRay chief_ray(const TraceContext& ctx, const Vec3& object_point) {
    const std::size_t stop = ctx.lens().stop_index();
    Launch launch;
    if (aim_at_surface(ctx, object_point, 0.0, 0.0, stop, launch) != RayStatus::Ok) {
        throw ChiefRayError("no chief ray found for the object point (outside the field?)");
    }
    Ray ray;
    if (ctx.to_plane(object_point, launch.u, launch.v, ctx.lens().exit_pupil_z, true, ray) != RayStatus::Ok) {
        throw ChiefRayError("chief ray is vignetted");
    }
    ChiefRay chief;
    chief.launch = launch;
    chief.pupil_point = ray.origin;
    double t = (ctx.lens().image_plane_z - ray.origin.z) / ray.direction.z;
    chief.image_point = ray.at(t);
    return chief;
}

std::pair<double, double> chief_ray_center(const LensPrescription& lens, const Vec3& object_point,
                                           double wavelength_nm) {
    TraceContext ctx(lens, wavelength_nm);
    ChiefRay c = chief_ray(ctx, object_point);
    return {c.image_point.x, c.image_point.y};
}

Vec3 object_point_for_image(const TraceContext& ctx, double image_x, double image_y) {
    const double radius = std::hypot(image_x, image_y);
    const double oz = ctx.lens().object_z();
    if (radius == 0.0) return {0.0, 0.0, oz};
    // Radial image height g(h) of the chief ray for an object at (0, h); the lens
    // inverts, so solve g(h) = -radius by secant from the paraxial estimate.
    auto g = [&](double h) { return chief_ray(ctx, Vec3{0.0, h, oz}).image_point.y; };
    double h0 = 0.0, g0 = 0.0;
    double h1 = radius * 1e-3;
    double g1 = g(h1);
    // Linear estimate from the small-height slope.
    double h2 = -radius * h1 / g1;
    for (int it = 0; it < 60; ++it) {
        double g2 = g(h2);
        if (std::abs(g2 + radius) <= 1e-11 * std::max(1.0, radius)) {
            h1 = h2;
            break;
        }
        h0 = h1;
        g0 = g1;
        h1 = h2;
        g1 = g2;
        double slope = (g1 - g0) / (h1 - h0);
        if (slope == 0.0 || !std::isfinite(slope)) throw ChiefRayError("image height solve stalled");
        h2 = h1 - (g1 + radius) / slope;
        if (it == 59) throw ChiefRayError("image height solve did not converge");
    }
    double s = h1 / radius;
    return {-image_x * s, -image_y * s, oz};
}

BeamFootprint trace_footprint(const TraceContext& ctx, const Vec3& object_point, int grid) {
    BeamFootprint fp;
    const double r = ctx.lens().surfaces.front().semi_diameter;
    const double pupil_z = ctx.lens().exit_pupil_z;
    const double image_z = ctx.lens().image_plane_z;
    for (int j = 0; j < grid; ++j) {
        for (int i = 0; i < grid; ++i) {
            double u = r * (2.0 * i / (grid - 1) - 1.0);
            double v = r * (2.0 * j / (grid - 1) - 1.0);
            if (u * u + v * v > r * r) continue;
            ++fp.launched;
            Ray ray;
            if (ctx.to_plane(object_point, u, v, pupil_z, true, ray) != RayStatus::Ok) continue;
            fp.pupil_points.push_back(ray.origin);
            double t = (image_z - ray.origin.z) / ray.direction.z;
            fp.image_points.push_back(ray.at(t));
        }
    }
    return fp;
}

}  // namespace lenstrace
