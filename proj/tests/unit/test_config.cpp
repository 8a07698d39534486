#include <doctest.h>

#include <fstream>

#include "lenstrace/config.hpp"
#include "support.hpp"

using namespace lenstrace;
using nlohmann::json;

TEST_CASE("grid spec json keeps absent fields and round trips") {
    PsfGridSpec base;
    base.pupil_samples = 64;
    PsfGridSpec spec = grid_spec_from_json(json{{"rows", 3}, {"cols", 5}}, base);
    CHECK(spec.rows == 3);
    CHECK(spec.cols == 5);
    CHECK(spec.pupil_samples == 64);
    CHECK(spec.wavelengths_nm == base.wavelengths_nm);

    PsfGridSpec again = grid_spec_from_json(to_json(spec));
    CHECK(again.rows == spec.rows);
    CHECK(again.cols == spec.cols);
    CHECK(again.pupil_samples == spec.pupil_samples);
    CHECK(again.oversample == spec.oversample);
    CHECK(again.crop_energy == spec.crop_energy);
    CHECK(again.obliquity == spec.obliquity);
}

TEST_CASE("grid spec json rejects unknown keys and invalid values") {
    CHECK_THROWS(grid_spec_from_json(json{{"rowz", 3}}));
    CHECK_THROWS(grid_spec_from_json(json{{"rows", 0}}));
    CHECK_THROWS(grid_spec_from_json(json{{"crop_energy", 1.5}}));
    CHECK_THROWS(grid_spec_from_json(json{{"wavelengths_nm", json::array()}}));
}

TEST_CASE("simulation json round trips") {
    json doc = {{"color_temperatures", {5000}}, {"shot", {0.0, 0.0}}, {"demosaic", "bilinear"}, {"mosaic", false}};
    SimulationConfig cfg = simulation_from_json(doc);
    CHECK(cfg.color_temperatures == std::vector<int>{5000});
    CHECK(cfg.shot.lo == 0.0);
    CHECK(cfg.shot.hi == 0.0);
    CHECK(cfg.demosaic == DemosaicMethod::Bilinear);
    CHECK_FALSE(cfg.mosaic);
    SimulationConfig again = simulation_from_json(to_json(cfg));
    CHECK(again.color_temperatures == cfg.color_temperatures);
    CHECK(again.read.lo == cfg.read.lo);
    CHECK(again.demosaic == cfg.demosaic);
    CHECK(again.mosaic == cfg.mosaic);
    CHECK_THROWS(simulation_from_json(json{{"demosaic", "ahd2"}}));
    CHECK_THROWS(simulation_from_json(json{{"shot", {0.1, 0.01}}}));
}

TEST_CASE("presets") {
    CHECK(preset_names().size() == 3);
    Preset dslr = preset("dslr");
    CHECK(dslr.rows == 400);
    CHECK(dslr.cols == 600);
    CHECK(dslr.wavelengths_nm.size() == 31);
    CHECK(dslr.object_distance_mm == 1750.0);
    Preset phone = preset("phone");
    CHECK(phone.rows == 300);
    CHECK(phone.cols == 400);
    CHECK(phone.wavelengths_nm.front() == 400.0);
    CHECK(phone.wavelengths_nm.back() == 730.0);
    CHECK(phone.object_distance_mm == 600.0);
    Preset desk = preset("desk");
    PsfGridSpec spec = apply_preset(desk);
    CHECK(spec.rows == 6);
    CHECK(spec.cols == 8);
    CHECK(spec.wavelengths_nm.size() == 7);
    CHECK_THROWS(preset("tablet"));
}

TEST_CASE("run config resolves the prescription against its directory") {
    testsupport::TempDir dir;
    std::ofstream(dir / "run.json") << json{{"prescription", "lens.json"},
                                            {"grid", {{"rows", 2}}},
                                            {"object_distance_mm", 900.0}}
                                           .dump();
    RunConfig cfg = load_run_config(dir / "run.json");
    REQUIRE(cfg.prescription);
    CHECK(*cfg.prescription == dir / "lens.json");
    CHECK(cfg.grid.rows == 2);
    REQUIRE(cfg.object_distance_mm);
    CHECK(*cfg.object_distance_mm == 900.0);

    std::ofstream(dir / "bad.json") << json{{"lens", "x"}}.dump();
    CHECK_THROWS(load_run_config(dir / "bad.json"));
}
