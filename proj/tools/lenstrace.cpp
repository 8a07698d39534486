#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lenstrace/config.hpp"
#include "lenstrace/dataset.hpp"
#include "lenstrace/image.hpp"
#include "lenstrace/isp.hpp"
#include "lenstrace/lens_model.hpp"
#include "lenstrace/metrics.hpp"
#include "lenstrace/psf.hpp"
#include "lenstrace/psf_io.hpp"

using namespace lenstrace;

namespace {

struct Common {
    std::string config;
    std::string prescription;
    std::string preset;
    std::uint64_t seed = 0;
    int threads = 0;
    std::optional<double> object_distance;
};

struct Resolved {
    OpticalSystem system;
    PsfGridSpec grid;
    SimulationConfig simulation;
};

Resolved resolve(const Common& opt) {
    RunConfig run;
    if (!opt.config.empty()) run = load_run_config(opt.config);
    if (!opt.preset.empty()) {
        Preset p = preset(opt.preset);
        run.grid = apply_preset(p, run.grid);
        if (!run.object_distance_mm) run.object_distance_mm = p.object_distance_mm;
    }
    std::filesystem::path lens;
    if (!opt.prescription.empty()) lens = opt.prescription;
    else if (run.prescription) lens = *run.prescription;
    else throw std::invalid_argument("no prescription given (use --prescription or a config file)");

    Resolved r{load_prescription(lens), run.grid, run.simulation};
    if (opt.object_distance) run.object_distance_mm = opt.object_distance;
    if (run.object_distance_mm) r.system.lens.object_distance = *run.object_distance_mm;
    r.grid.threads = opt.threads;
    r.simulation.threads = opt.threads;
    return r;
}

void add_common(CLI::App* app, Common& opt, bool needs_lens) {
    app->add_option("--config", opt.config, "Run configuration JSON")->check(CLI::ExistingFile);
    if (needs_lens) {
        app->add_option("-p,--prescription", opt.prescription, "Lens prescription JSON")->check(CLI::ExistingFile);
        app->add_option("--preset", opt.preset, "Grid preset: dslr, phone or desk");
        app->add_option("--object-distance", opt.object_distance, "Object distance in mm");
    }
    app->add_option("--threads", opt.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    file.open(path);
    if (!file) throw std::runtime_error("cannot write '" + path + "'");
    return file;
}

std::vector<double> fov_samples(int n, double max_fov) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? 0.0 : max_fov * i / (n - 1));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lens-to-sensor imaging simulation"};
    app.require_subcommand(1);

    // psf build | verify
    auto* psf = app.add_subcommand("psf", "Field-varying PSF grids");
    psf->require_subcommand(1);
    Common build_opt;
    std::string build_out;
    std::optional<int> rows, cols;
    auto* build = psf->add_subcommand("build", "Compute a PSF grid and write the cache");
    add_common(build, build_opt, true);
    build->add_option("-o,--out", build_out, "Cache file")->required();
    build->add_option("--rows", rows, "Grid rows");
    build->add_option("--cols", cols, "Grid columns");

    Common verify_opt;
    std::string verify_cache;
    double verify_tol = 1e-6;
    auto* verify = psf->add_subcommand("verify", "Recompute a sample of cells and compare with a cache");
    add_common(verify, verify_opt, true);
    verify->add_option("cache", verify_cache, "Cache file")->required()->check(CLI::ExistingFile);
    verify->add_option("--tolerance", verify_tol, "Maximum absolute difference");

    // simulate
    Common sim_opt;
    std::string sim_in, sim_out, sim_cache, sim_float;
    std::optional<int> sim_temperature;
    bool sim_no_noise = false;
    int sim_bits = 8;
    auto* simulate = app.add_subcommand("simulate", "Degrade one sRGB image through the lens and sensor");
    add_common(simulate, sim_opt, true);
    simulate->add_option("image", sim_in, "Input PNG")->required()->check(CLI::ExistingFile);
    simulate->add_option("--psf", sim_cache, "PSF cache")->required()->check(CLI::ExistingFile);
    simulate->add_option("-o,--out", sim_out, "Output PNG")->required();
    simulate->add_option("--seed", sim_opt.seed, "Random seed");
    simulate->add_option("--temperature", sim_temperature, "Fixed color temperature");
    simulate->add_flag("--no-noise", sim_no_noise, "Disable shot and read noise");
    simulate->add_option("--bits", sim_bits, "Output bit depth")->check(CLI::IsMember({8, 16}));
    simulate->add_option("--float", sim_float, "Also write the output as planar float32");

    // dataset
    std::string manifest_path;
    std::optional<std::uint64_t> ds_seed;
    std::optional<int> ds_threads;
    auto* dataset = app.add_subcommand("dataset", "Generate training triplets from a manifest");
    dataset->add_option("manifest", manifest_path, "Manifest JSON")->required()->check(CLI::ExistingFile);
    dataset->add_option("--seed", ds_seed, "Override the manifest seed");
    dataset->add_option("--threads", ds_threads, "Worker threads (0 = all cores)");

    // metrics
    std::string metric_a, metric_b;
    auto* metrics = app.add_subcommand("metrics", "PSNR and SSIM between two images");
    metrics->add_option("a", metric_a, "Image")->required()->check(CLI::ExistingFile);
    metrics->add_option("b", metric_b, "Reference image")->required()->check(CLI::ExistingFile);

    // plot mtf | strehl | ca
    auto* plot = app.add_subcommand("plot", "Field curves as CSV");
    plot->require_subcommand(1);
    std::string mtf_cache, mtf_out;
    int mtf_channel = 1;
    bool mtf_curves = false;
    auto* plot_mtf = plot->add_subcommand("mtf", "Per-cell MTF areas (or full curves) from a PSF cache");
    plot_mtf->add_option("cache", mtf_cache, "PSF cache")->required()->check(CLI::ExistingFile);
    plot_mtf->add_option("--channel", mtf_channel, "0 = R, 1 = G, 2 = B")->check(CLI::Range(0, 2));
    plot_mtf->add_flag("--curves", mtf_curves, "Write every frequency sample instead of areas");
    plot_mtf->add_option("-o,--out", mtf_out, "CSV file (default stdout)");

    Common strehl_opt;
    std::string strehl_out;
    double strehl_wl = 550.0, strehl_max = 0.9;
    int strehl_n = 10, strehl_pupil = 128;
    auto* plot_strehl = plot->add_subcommand("strehl", "Strehl ratio along the field radius");
    add_common(plot_strehl, strehl_opt, true);
    plot_strehl->add_option("--wavelength", strehl_wl, "Wavelength in nm");
    plot_strehl->add_option("--points", strehl_n, "Number of field points")->check(CLI::PositiveNumber);
    plot_strehl->add_option("--max-fov", strehl_max, "Largest normalized field")->check(CLI::Range(0.0, 1.0));
    plot_strehl->add_option("--pupil-samples", strehl_pupil, "Pupil samples per side");
    plot_strehl->add_option("-o,--out", strehl_out, "CSV file (default stdout)");

    std::string ca_cache, ca_out;
    auto* plot_ca = plot->add_subcommand("ca", "Lateral chromatic aberration per cell from a PSF cache");
    plot_ca->add_option("cache", ca_cache, "PSF cache")->required()->check(CLI::ExistingFile);
    plot_ca->add_option("-o,--out", ca_out, "CSV file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            Resolved r = resolve(build_opt);
            if (rows) r.grid.rows = *rows;
            if (cols) r.grid.cols = *cols;
            auto t0 = std::chrono::steady_clock::now();
            PsfGrid grid = compute_psf_grid(r.system, r.grid);
            save_psf_grid(grid, build_out);
            std::cerr << "built " << grid.rows << "x" << grid.cols << " grid, max kernel " << grid.max_kernel
                      << " px, in " << seconds_since(t0) << " s -> " << build_out << "\n";
        } else if (verify->parsed()) {
            Resolved r = resolve(verify_opt);
            PsfGrid grid = load_psf_grid(verify_cache);
            r.grid.rows = static_cast<int>(grid.rows);
            r.grid.cols = static_cast<int>(grid.cols);
            VerifyReport report = verify_psf_grid(grid, r.system, r.grid, verify_tol);
            std::cout << (report.passed ? "PASS" : "FAIL") << " cells=" << report.cells.size()
                      << " max_difference=" << report.max_difference << "\n";
            return report.passed ? 0 : 3;
        } else if (simulate->parsed()) {
            Resolved r = resolve(sim_opt);
            if (sim_temperature) r.simulation.color_temperatures = {*sim_temperature};
            if (sim_no_noise) r.simulation.shot = r.simulation.read = Range{0.0, 0.0};
            PsfGrid grid = load_psf_grid(sim_cache);
            Image input = read_png(sim_in);
            if (input.channels == 1) {
                Image rgb(input.height, input.width, 3);
                for (std::size_t p = 0; p < input.pixels(); ++p) rgb.data[3 * p] = rgb.data[3 * p + 1] = rgb.data[3 * p + 2] = input.data[p];
                input = std::move(rgb);
            }
            const SensorSpec& s = r.system.sensor;
            if (input.height != s.height || input.width != s.width) input = resize_cover(input, s.height, s.width);
            SimulationResult result = simulate_image(input, grid, s, r.simulation, sim_opt.seed);
            write_png(result.output, sim_out, sim_bits);
            if (!sim_float.empty()) write_float_planar(result.output, sim_float);
            std::cerr << "color_temperature=" << result.params.color_temperature
                      << " shot=" << result.params.noise.shot << " read=" << result.params.noise.read << "\n";
        } else if (dataset->parsed()) {
            DatasetManifest m = load_manifest(manifest_path);
            if (ds_seed) m.seed = *ds_seed;
            if (ds_threads) m.threads = *ds_threads;
            auto t0 = std::chrono::steady_clock::now();
            DatasetReport report = generate_dataset(m);
            std::cerr << report.entries.size() << " triplets" << (report.cache_built ? " (PSF cache built)" : "")
                      << " in " << seconds_since(t0) << " s -> " << report.manifest_out.string() << "\n";
        } else if (metrics->parsed()) {
            Image a = read_png(metric_a), b = read_png(metric_b);
            std::printf("psnr=%.4f ssim=%.6f\n", psnr(a, b), ssim(a, b));
        } else if (plot_mtf->parsed()) {
            PsfGrid grid = load_psf_grid(mtf_cache);
            std::ofstream file;
            std::ostream& out = open_out(mtf_out, file);
            auto cells = grid_mtf(grid, mtf_channel);
            if (mtf_curves) {
                out << "row,col,fov,frequency,sagittal,tangential\n";
                for (const CellMtf& c : cells)
                    for (std::size_t i = 0; i < c.sagittal.frequency.size(); ++i)
                        out << c.row << ',' << c.col << ',' << c.fov << ',' << c.sagittal.frequency[i] << ','
                            << c.sagittal.modulation[i] << ',' << c.tangential.modulation[i] << '\n';
            } else {
                out << "row,col,fov,sagittal_area,tangential_area\n";
                for (const CellMtf& c : cells)
                    out << c.row << ',' << c.col << ',' << c.fov << ',' << mtf_area(c.sagittal) << ','
                        << mtf_area(c.tangential) << '\n';
            }
        } else if (plot_strehl->parsed()) {
            Resolved r = resolve(strehl_opt);
            auto curve = strehl_curve(r.system, fov_samples(strehl_n, strehl_max), strehl_wl, strehl_pupil,
                                      r.grid.pupil_margin, r.grid.obliquity, strehl_opt.threads);
            std::ofstream file;
            std::ostream& out = open_out(strehl_out, file);
            out << "fov,strehl\n";
            for (const FieldValue& v : curve) out << v.fov << ',' << v.value << '\n';
        } else if (plot_ca->parsed()) {
            PsfGrid grid = load_psf_grid(ca_cache);
            std::ofstream file;
            std::ostream& out = open_out(ca_out, file);
            out << "row,col,fov,red_px,blue_px\n";
            for (const CaPoint& p : ca_curve(grid))
                out << p.row << ',' << p.col << ',' << p.fov << ',' << p.red << ',' << p.blue << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "lenstrace: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
