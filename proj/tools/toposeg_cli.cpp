// Command-line front end: synth, denoise, segment, pipeline, evaluate.
// Exit codes: 0 success, 1 runtime/I-O failure, 2 argument validation failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "toposeg/toposeg.hpp"

namespace fs = std::filesystem;
using namespace toposeg;

namespace {

bool g_quiet = false;

void progress(const std::string& msg) {
    if (!g_quiet)
        std::cerr << msg << "\n";
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
}

SyntheticKind parse_kind(const std::string& s) {
    if (s == "step") return SyntheticKind::step;
    if (s == "disk") return SyntheticKind::disk;
    if (s == "blob") return SyntheticKind::blob;
    throw std::invalid_argument("unknown synthetic kind: " + s);
}

ConductanceType parse_gtype(const std::string& s) {
    if (s == "pm1") return ConductanceType::pm1;
    if (s == "pm2") return ConductanceType::pm2;
    throw std::invalid_argument("unknown conductance type: " + s);
}

void emit_report(const std::vector<ReportRow>& rows, const std::string& path,
                 const std::string& format) {
    if (format == "json")
        write_report_json(rows, path);
    else
        write_report_csv(rows, path);
}

struct DiffusionFlags {
    double tau = 0.2;
    int iters = 20;
    double kappa = 0.05;
    bool kappa_set = false;
    std::string g_type = "pm1";

    void add_to(CLI::App* cmd) {
        cmd->add_option("--tau", tau, "Diffusion time step in (0, 0.25]");
        cmd->add_option("--iters", iters, "Diffusion iteration count");
        cmd->add_option("--kappa", kappa, "Conductance scale (anisotropic)")
            ->each([this](const std::string&) { kappa_set = true; });
        cmd->add_option("--g-type", g_type, "Conductance function")
            ->check(CLI::IsMember({"pm1", "pm2"}));
    }

    DiffusionParams params() const {
        return {tau, iters, kappa, parse_gtype(g_type)};
    }
};

struct TopoFlags {
    TopoParams p;
    double threshold = default_continuum_threshold;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--crack-fraction", p.crack_fraction,
                        "Fraction of edges crackable per outer iteration");
        cmd->add_option("--crack-budget", p.crack_budget,
                        "Max cumulative fraction of cracked edges");
        cmd->add_option("--delta", p.min_derivative_magnitude,
                        "Minimum derivative magnitude for cracking");
        cmd->add_option("--outer-iters", p.outer_iters, "Outer iterations");
        cmd->add_option("--inner-iters", p.inner_diffusion_iters,
                        "Diffusion iterations per outer iteration");
        cmd->add_option("--topo-tau", p.tau, "Time step for crack diffusion");
        cmd->add_option("--min-region-size", p.min_region_size,
                        "Regions smaller than this are merged away");
        cmd->add_option("--threshold", threshold,
                        "Continuum derivative cutoff (< 0)");
    }
};

struct SegmentOutcome {
    SegmentationMap seg;
    ImageBuffer restored;
    std::int64_t cracks = 0;
    int iterations = 0;
};

SegmentOutcome run_segmentation(const ImageBuffer& img, const std::string& method,
                                const TopoFlags& tf) {
    if (method == "discrete") {
        auto [restored, kf, trace] = discrete_td_restore(img, tf.p);
        SegmentationMap seg = extract_segmentation(kf, restored, tf.p.min_region_size);
        return {std::move(seg), std::move(restored),
                static_cast<std::int64_t>(kf.crack_count()),
                static_cast<int>(trace.size())};
    }
    if (method == "continuum")
        return {continuum_td_segment(img, tf.threshold, tf.p.min_region_size), img, 0, 0};
    throw std::invalid_argument("unknown segmentation method: " + method);
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string kind = "step";
    int width = 64, height = 64;
    double low = 0.2, high = 0.8;
    std::string output;
};

void cmd_synth(const SynthArgs& a) {
    SyntheticSpec spec{parse_kind(a.kind), a.width, a.height, a.low, a.high};
    save_image(make_synthetic(spec), a.output);
    progress("wrote " + a.output);
}

// ---- denoise --------------------------------------------------------------

struct DenoiseArgs {
    std::string input, output;
    std::string filter = "isotropic";
    DiffusionFlags diff;
    std::string reference, report;
    std::string report_format = "csv";
};

void cmd_denoise(const DenoiseArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    ImageBuffer img = load_image(a.input);
    DiffusionParams p = a.diff.params();

    ImageBuffer out = a.filter == "isotropic" ? isotropic_filter(img, p)
                                              : anisotropic_filter(img, p);
    if (a.filter == "anisotropic" && !a.diff.kappa_set)
        progress("kappa not given; using default " + std::to_string(p.kappa));
    save_image(out, a.output);
    progress("wrote " + a.output);

    if (!a.report.empty()) {
        ReportRow row;
        row.stage = "denoise";
        row.method = a.filter;
        row.iteration = p.iters;
        if (!a.reference.empty()) {
            ImageBuffer ref = load_image(a.reference);
            row.mse = mse(out, ref);
            row.psnr_db = psnr(out, ref);
        } else {
            row.mse = std::numeric_limits<double>::quiet_NaN();
            row.psnr_db = std::numeric_limits<double>::quiet_NaN();
        }
        row.wall_time_ms = elapsed_ms(start);
        emit_report({row}, a.report, a.report_format);
    }
}

// ---- segment --------------------------------------------------------------

struct SegmentArgs {
    std::string input;
    std::string method = "discrete";
    std::string labels, render, cracks_out, restored_out;
    TopoFlags topo;
    std::string truth, report;
    std::string report_format = "csv";
};

void cmd_segment(const SegmentArgs& a) {
    const auto start = std::chrono::steady_clock::now();
    ImageBuffer img = load_image(a.input);

    if (a.method == "discrete") {
        auto [restored, kf, trace] = discrete_td_restore(img, a.topo.p);
        SegmentationMap seg =
            extract_segmentation(kf, restored, a.topo.p.min_region_size);
        save_labels(seg, a.labels);
        if (!a.render.empty()) save_image(labels_to_image(seg), a.render);
        if (!a.cracks_out.empty()) save_crack_set(kf, a.cracks_out);
        if (!a.restored_out.empty()) save_image(restored, a.restored_out);

        if (!a.report.empty()) {
            ReportRow row;
            row.stage = "segment";
            row.method = a.method;
            row.iteration = static_cast<int>(trace.size());
            row.mse = mse(restored, img);
            row.psnr_db = psnr(restored, img);
            row.cracks_total = static_cast<std::int64_t>(kf.crack_count());
            row.regions = seg.region_count();
            if (!a.truth.empty())
                row.boundary_f1 = boundary_f1(seg, load_labels(a.truth), 1);
            row.wall_time_ms = elapsed_ms(start);
            emit_report({row}, a.report, a.report_format);
        }
    } else {
        SegmentationMap seg =
            continuum_td_segment(img, a.topo.threshold, a.topo.p.min_region_size);
        save_labels(seg, a.labels);
        if (!a.render.empty()) save_image(labels_to_image(seg), a.render);

        if (!a.report.empty()) {
            ReportRow row;
            row.stage = "segment";
            row.method = a.method;
            row.mse = std::numeric_limits<double>::quiet_NaN();
            row.psnr_db = std::numeric_limits<double>::quiet_NaN();
            row.regions = seg.region_count();
            if (!a.truth.empty())
                row.boundary_f1 = boundary_f1(seg, load_labels(a.truth), 1);
            row.wall_time_ms = elapsed_ms(start);
            emit_report({row}, a.report, a.report_format);
        }
    }
    progress("wrote " + a.labels);
}

// ---- pipeline -------------------------------------------------------------

struct PipelineArgs {
    std::string input;
    std::string synth_kind;
    int width = 128, height = 128;
    double low = 0.2, high = 0.8;
    double noise_sigma = 0.1;
    std::uint64_t seed = 42;
    std::string prefilter = "isotropic";
    std::string method = "discrete";
    bool compare = false;
    DiffusionFlags diff;
    TopoFlags topo;
    std::string output_dir;
    std::string truth, report;
    std::string report_format = "csv";
};

void cmd_pipeline(const PipelineArgs& a) {
    if (a.input.empty() == a.synth_kind.empty())
        throw std::invalid_argument("pipeline: give exactly one of --input / --synth-kind");

    fs::create_directories(a.output_dir);
    const auto out = [&](const std::string& name) {
        return (fs::path(a.output_dir) / name).string();
    };

    ImageBuffer clean =
        a.input.empty()
            ? make_synthetic({parse_kind(a.synth_kind), a.width, a.height, a.low, a.high})
            : load_image(a.input);
    save_image(clean, out("clean.pgm"));

    ImageBuffer noisy = add_gaussian_noise(clean, {a.noise_sigma, a.seed});
    save_image(noisy, out("noisy.pgm"));

    SegmentationMap truth = a.truth.empty() ? constant_region_segmentation(clean)
                                            : load_labels(a.truth);

    std::vector<std::pair<std::string, std::string>> stages;  // (stage, prefilter)
    if (a.compare) {
        stages.emplace_back("segment-only", "none");
        stages.emplace_back("restore-then-segment", a.prefilter);
    } else {
        stages.emplace_back(a.prefilter == "none" ? "segment-only"
                                                  : "restore-then-segment",
                            a.prefilter);
    }

    std::vector<ReportRow> rows;
    for (const auto& [stage, prefilter] : stages) {
        const auto start = std::chrono::steady_clock::now();
        ImageBuffer prefiltered = noisy;
        if (prefilter == "isotropic")
            prefiltered = isotropic_filter(noisy, a.diff.params());
        else if (prefilter == "anisotropic")
            prefiltered = anisotropic_filter(noisy, a.diff.params());
        else if (prefilter != "none")
            throw std::invalid_argument("unknown prefilter: " + prefilter);
        save_image(prefiltered, out("restored_" + stage + ".pgm"));

        SegmentOutcome res = run_segmentation(prefiltered, a.method, a.topo);
        save_labels(res.seg, out("labels_" + stage + ".txt"));
        save_image(labels_to_image(res.seg), out("labels_" + stage + ".pgm"));

        ReportRow row;
        row.stage = stage;
        row.method = a.method;
        row.iteration = res.iterations;
        row.mse = mse(res.restored, clean);
        row.psnr_db = psnr(res.restored, clean);
        row.cracks_total = res.cracks;
        row.regions = res.seg.region_count();
        row.boundary_f1 = boundary_f1(res.seg, truth, 1);
        row.wall_time_ms = elapsed_ms(start);
        rows.push_back(row);
        progress(stage + ": regions=" + std::to_string(row.regions) +
                 " boundary_f1=" + std::to_string(row.boundary_f1));
    }

    const std::string report = a.report.empty() ? out("report." + a.report_format)
                                                : a.report;
    emit_report(rows, report, a.report_format);
    progress("wrote " + report);
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::string a, b;
    std::string metrics = "mse,psnr";
};

void cmd_evaluate(const EvaluateArgs& args) {
    ImageBuffer a = load_image(args.a);
    ImageBuffer b = load_image(args.b);
    if (!a.same_shape(b))
        throw std::runtime_error("evaluate: images have different dimensions");

    std::vector<std::string> wanted;
    std::stringstream ss(args.metrics);
    std::string item;
    while (std::getline(ss, item, ','))
        wanted.push_back(item);

    std::string line;
    for (const std::string& m : wanted) {
        if (!line.empty()) line += ",";
        if (m == "mse")
            line += toposeg::detail::format_real(mse(a, b));
        else if (m == "psnr")
            line += toposeg::detail::format_real(psnr(a, b));
        else
            throw std::invalid_argument("unknown metric: " + m);
    }
    std::cout << line << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-based grayscale restoration and topological-derivative segmentation"};
    app.set_config("--config", "", "Key-value config file supplying flag defaults");
    app.add_flag("--quiet", g_quiet, "Suppress progress output");
    app.require_subcommand(1);

    if (const char* threads = std::getenv("TOPOSEG_THREADS")) {
        // Computation is sequential; any cap >= 0 is honored trivially.
        char* end = nullptr;
        const long v = std::strtol(threads, &end, 10);
        if (end == threads || v < 0)
            std::cerr << "ignoring invalid TOPOSEG_THREADS value\n";
    }

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic test image");
    synth_cmd->add_option("--kind", synth.kind)->check(CLI::IsMember({"step", "disk", "blob"}));
    synth_cmd->add_option("--width", synth.width)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--height", synth.height)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--low", synth.low);
    synth_cmd->add_option("--high", synth.high);
    synth_cmd->add_option("--output", synth.output)->required();

    DenoiseArgs denoise;
    auto* denoise_cmd = app.add_subcommand("denoise", "Diffusion denoising");
    denoise_cmd->add_option("--input", denoise.input)->required();
    denoise_cmd->add_option("--output", denoise.output)->required();
    denoise_cmd->add_option("--filter", denoise.filter)
        ->check(CLI::IsMember({"isotropic", "anisotropic"}));
    denoise.diff.add_to(denoise_cmd);
    denoise_cmd->add_option("--reference", denoise.reference,
                            "Clean image for report metrics");
    denoise_cmd->add_option("--report", denoise.report);
    denoise_cmd->add_option("--report-format", denoise.report_format)
        ->check(CLI::IsMember({"csv", "json"}));

    SegmentArgs segment;
    auto* segment_cmd = app.add_subcommand("segment", "Topological-derivative segmentation");
    segment_cmd->add_option("--input", segment.input)->required();
    segment_cmd->add_option("--method", segment.method)
        ->check(CLI::IsMember({"discrete", "continuum"}));
    segment_cmd->add_option("--labels", segment.labels)->required();
    segment_cmd->add_option("--render", segment.render, "Viewable PGM of the labels");
    segment_cmd->add_option("--cracks", segment.cracks_out, "Crack-set text output");
    segment_cmd->add_option("--restored", segment.restored_out,
                            "Restored image output (discrete method)");
    segment.topo.add_to(segment_cmd);
    segment_cmd->add_option("--truth", segment.truth, "Ground-truth label grid");
    segment_cmd->add_option("--report", segment.report);
    segment_cmd->add_option("--report-format", segment.report_format)
        ->check(CLI::IsMember({"csv", "json"}));

    PipelineArgs pipeline;
    auto* pipeline_cmd =
        app.add_subcommand("pipeline", "Noise, optional restoration, segmentation, metrics");
    pipeline_cmd->add_option("--input", pipeline.input, "Clean source image");
    pipeline_cmd->add_option("--synth-kind", pipeline.synth_kind)
        ->check(CLI::IsMember({"step", "disk", "blob"}));
    pipeline_cmd->add_option("--width", pipeline.width)->check(CLI::PositiveNumber);
    pipeline_cmd->add_option("--height", pipeline.height)->check(CLI::PositiveNumber);
    pipeline_cmd->add_option("--low", pipeline.low);
    pipeline_cmd->add_option("--high", pipeline.high);
    pipeline_cmd->add_option("--noise-sigma", pipeline.noise_sigma);
    pipeline_cmd->add_option("--seed", pipeline.seed);
    pipeline_cmd->add_option("--prefilter", pipeline.prefilter)
        ->check(CLI::IsMember({"none", "isotropic", "anisotropic"}));
    pipeline_cmd->add_option("--method", pipeline.method)
        ->check(CLI::IsMember({"discrete", "continuum"}));
    pipeline_cmd->add_flag("--compare", pipeline.compare,
                           "Also run without the prefilter and emit paired rows");
    pipeline.diff.add_to(pipeline_cmd);
    pipeline.topo.add_to(pipeline_cmd);
    pipeline_cmd->add_option("--output-dir", pipeline.output_dir)->required();
    pipeline_cmd->add_option("--truth", pipeline.truth, "Ground-truth label grid");
    pipeline_cmd->add_option("--report", pipeline.report);
    pipeline_cmd->add_option("--report-format", pipeline.report_format)
        ->check(CLI::IsMember({"csv", "json"}));

    EvaluateArgs evaluate;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Image-pair metrics to stdout");
    evaluate_cmd->add_option("--a", evaluate.a)->required();
    evaluate_cmd->add_option("--b", evaluate.b)->required();
    evaluate_cmd->add_option("--metrics", evaluate.metrics, "Comma list from {mse, psnr}");

    // Let global flags like --quiet appear after the subcommand name.
    for (auto* sub : app.get_subcommands(nullptr))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) cmd_synth(synth);
        else if (denoise_cmd->parsed()) cmd_denoise(denoise);
        else if (segment_cmd->parsed()) cmd_segment(segment);
        else if (pipeline_cmd->parsed()) cmd_pipeline(pipeline);
        else if (evaluate_cmd->parsed()) cmd_evaluate(evaluate);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
