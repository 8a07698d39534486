#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lenstrace/isp.hpp"
#include "lenstrace/psf.hpp"

namespace lenstrace {

/// Fields absent from `doc` keep the values of `base`. Unknown keys are errors.
PsfGridSpec grid_spec_from_json(const nlohmann::json& doc, PsfGridSpec base = {});
nlohmann::json to_json(const PsfGridSpec& spec);

SimulationConfig simulation_from_json(const nlohmann::json& doc, SimulationConfig base = {});
nlohmann::json to_json(const SimulationConfig& config);

/// Named field-grid configurations.
struct Preset {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> wavelengths_nm;
    double object_distance_mm = 0.0;
    int training_crop = 256;
};

/// "dslr": 400x600 cells, 31 wavelengths 400-700 nm, 1750 mm.
/// "phone": 300x400 cells, 34 wavelengths 400-730 nm, 600 mm.
/// "desk": 6x8 cells, 7 wavelengths 400-700 nm, 1750 mm.
Preset preset(const std::string& name);
std::vector<std::string> preset_names();
/// Grid spec with the preset's dimensions and wavelengths.
PsfGridSpec apply_preset(const Preset& p, PsfGridSpec base = {});

/// Optional run configuration file shared by the CLI commands:
/// {"prescription": ..., "grid": {...}, "simulation": {...}, "object_distance_mm": ...}
struct RunConfig {
    std::optional<std::filesystem::path> prescription;
    PsfGridSpec grid;
    SimulationConfig simulation;
    std::optional<double> object_distance_mm;
};
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace lenstrace
