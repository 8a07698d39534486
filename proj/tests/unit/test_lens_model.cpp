#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "lenstrace/lens_model.hpp"
#include "support.hpp"

using namespace lenstrace;
using nlohmann::json;

TEST_CASE("sag of a plane is zero") {
    Surface s;
    s.semi_diameter = 10.0;
    CHECK(surface_sag(s, 3.0, -4.0) == 0.0);
}

TEST_CASE("sag of a sphere") {
    Surface s;
    s.curvature = 0.1;
    s.semi_diameter = 5.0;
    CHECK(surface_sag(s, 1.0, 0.0) == doctest::Approx(0.1 / (1.0 + std::sqrt(0.99))).epsilon(1e-14));
    CHECK(surface_sag(s, 1.0, 0.0) == doctest::Approx(0.0501256).epsilon(1e-6));
}

TEST_CASE("single deformation term") {
    Surface s;
    s.deformation[0] = 0.5;
    s.semi_diameter = 3.0;
    CHECK(surface_sag(s, 0.0, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("sag outside the aperture throws") {
    Surface s;
    s.curvature = 0.1;
    s.semi_diameter = 2.0;
    CHECK_THROWS_AS(surface_sag(s, 2.5, 0.0), ApertureError);
}

TEST_CASE("sag is rotationally symmetric") {
    Surface s;
    s.curvature = -0.04;
    s.deformation = {1e-3, -2e-5, 3e-7, 0, 0, 0, 0, 0};
    s.semi_diameter = 8.0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> r(0.0, 8.0), a(0.0, 2.0 * M_PI);
    for (int i = 0; i < 1000; ++i) {
        double rho = r(rng), t1 = a(rng), t2 = a(rng);
        double z1 = surface_sag(s, rho * std::cos(t1), rho * std::sin(t1));
        double z2 = surface_sag(s, rho * std::cos(t2), rho * std::sin(t2));
        CHECK(std::abs(z1 - z2) <= 1e-14 * std::max(1.0, std::abs(z1)));
    }
}

TEST_CASE("flat window parses") {
    auto sys = parse_prescription(testsupport::flat_window_json());
    CHECK(sys.lens.surfaces.size() == 2);
    CHECK(sys.lens.stop_index() == 0);
    CHECK(sys.lens.index_before(1, 550.0) == doctest::Approx(1.5));
}

TEST_CASE("two stops are rejected") {
    json doc = testsupport::flat_window_json();
    doc["surfaces"][1]["is_stop"] = true;
    CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
}

TEST_CASE("schema violations are rejected") {
    SUBCASE("odd deformation order") {
        json doc = testsupport::flat_window_json();
        doc["surfaces"][0]["coeffs"] = {{"3", 1e-4}};
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("order above 16") {
        json doc = testsupport::flat_window_json();
        doc["surfaces"][0]["coeffs"] = {{"18", 1e-9}};
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("singular ccm") {
        json doc = testsupport::flat_window_json();
        doc["sensor"]["ccm"] = {{1, 0, 0}, {1, 0, 0}, {0, 0, 1}};
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("wavelengths outside the material table") {
        json doc = testsupport::flat_window_json();
        doc["materials"]["glass"]["table"] = {{500, 1.5}, {600, 1.5}};
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("index below one") {
        json doc = testsupport::flat_window_json();
        doc["materials"]["glass"]["table"] = {{300, 0.9}, {900, 0.9}};
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("response out of range") {
        json doc = testsupport::flat_window_json();
        doc["sensor"]["spectral_response"]["r"][0] = 1.5;
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("zero wb gain") {
        json doc = testsupport::flat_window_json();
        doc["sensor"]["wb"]["5000"] = {1.0, 0.0, 1.0};
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("negative thickness") {
        json doc = testsupport::flat_window_json();
        doc["surfaces"][0]["thickness"] = -2.0;
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("image plane before pupil plane") {
        json doc = testsupport::flat_window_json();
        doc["image_plane_z_mm"] = 5.0;
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
    SUBCASE("relative illumination not unity on axis") {
        json doc = testsupport::flat_window_json();
        doc["sensor"]["relative_illumination"] = {{"fov", {0.0, 1.0}}, {"values", {{0.9, 0.9, 0.9}, {0.5, 0.5, 0.5}}}};
        CHECK_THROWS_AS(parse_prescription(doc), SchemaError);
    }
}

TEST_CASE("example triplet parses with seven surfaces") {
    auto sys = load_prescription(testsupport::triplet_path());
    CHECK(sys.lens.surfaces.size() == 7);
    CHECK(sys.lens.refracting_count() == 6);
    CHECK(sys.lens.stop_index() == 3);
}

// Independent paraxial oracle: 2x2 ray-transfer matrices with reduced angles.
static double matrix_focal_length(const LensPrescription& lens, double wl) {
    double a = 1, b = 0, c = 0, d = 1;
    const std::size_t n = lens.refracting_count();
    for (std::size_t i = 0; i < n; ++i) {
        double n0 = lens.index_before(i, wl), n1 = lens.index_before(i + 1, wl);
        double p = (n1 - n0) * lens.surfaces[i].curvature;
        // refraction [[1,0],[-p,1]] on (y, n u)
        c -= p * a;
        d -= p * b;
        if (i + 1 < n) {
            double t = lens.surfaces[i].thickness / n1;
            a += t * c;
            b += t * d;
        }
    }
    return -1.0 / c;
}

TEST_CASE("triplet focal length matches its documented 50 mm") {
    auto sys = load_prescription(testsupport::triplet_path());
    double f = matrix_focal_length(sys.lens, 587.56);
    CHECK(std::abs(f - 50.0) / 50.0 < 0.01);
    CHECK(paraxial_focal_length(sys.lens, 587.56) == doctest::Approx(f).epsilon(1e-12));
}

TEST_CASE("serialization round trip") {
    auto sys = load_prescription(testsupport::triplet_path());
    auto again = parse_prescription(to_json(sys));
    CHECK(again == sys);
    auto path = std::filesystem::temp_directory_path() / "lenstrace_roundtrip.json";
    save_prescription(sys, path);
    CHECK(load_prescription(path) == sys);
    std::filesystem::remove(path);
}

TEST_CASE("material interpolation and range") {
    Material m({400.0, 500.0, 600.0}, {1.6, 1.55, 1.52});
    CHECK(m.index(450.0) == doctest::Approx(1.575));
    CHECK(m.index(600.0) == doctest::Approx(1.52));
    CHECK_THROWS(m.index(650.0));
}

TEST_CASE("bayer sites") {
    CHECK(bayer_channel(BayerPattern::RGGB, 0, 0) == 0);
    CHECK(bayer_channel(BayerPattern::RGGB, 0, 1) == 1);
    CHECK(bayer_channel(BayerPattern::RGGB, 1, 0) == 1);
    CHECK(bayer_channel(BayerPattern::RGGB, 1, 1) == 2);
    CHECK(bayer_channel(BayerPattern::BGGR, 0, 0) == 2);
    CHECK(bayer_channel(BayerPattern::GRBG, 0, 1) == 0);
    CHECK(bayer_channel(BayerPattern::GBRG, 1, 0) == 0);
}

TEST_CASE("ccm inverse") {
    std::array<std::array<double, 3>, 3> m{{{1.6, -0.4, -0.2}, {-0.25, 1.45, -0.2}, {0.0, -0.5, 1.5}}};
    auto inv = invert3x3(m);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += m[r][k] * inv[k][c];
            CHECK(s == doctest::Approx(r == c ? 1.0 : 0.0));
        }
}
