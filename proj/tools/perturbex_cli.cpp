// perturbex: explain object-detector behavior by inpainting-based image
// perturbations (removal / replacement / background swap) and measuring
// flip rate and confidence drop across the edit.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "perturbex/config.hpp"
#include "perturbex/http_backend.hpp"
#include "perturbex/report.hpp"
#include "perturbex/runner.hpp"
#include "perturbex/util.hpp"

namespace {

constexpr const char* kVersion = "perturbex 0.1.0 (schema 1)";

void print_summary_line(const perturbex::MetricsSummary& s) {
    std::printf("  %-24s n=%-3d flips=%-3d flip_rate=%.3f cd_all=%.3f",
                s.condition.c_str(), s.n, s.flips, s.flip_rate, s.cd.mean);
    if (s.cd.persisting_count > 0) {
        std::printf(" cd_persisting=%.3f (n=%d)", s.cd.persisting_mean,
                    s.cd.persisting_count);
    }
    if (s.spurious_candidates > 0) {
        std::printf(" spurious=%d", s.spurious_candidates);
    }
    std::printf("\n");
    for (const auto& [env, stats] : s.per_environment) {
        std::printf("    %-22s n=%-3d flips=%-3d flip_rate=%.3f\n", env.c_str(),
                    stats.n, stats.flips, stats.flip_rate);
    }
}

void print_run_result(const perturbex::RunResult& result) {
    for (const auto& s : result.summaries) print_summary_line(s);
    std::printf("records: %zu (%d failed), exclusions: %zu\n",
                result.records.size(), result.failed_records,
                result.exclusions.size());
    if (result.cache_hits + result.cache_misses > 0) {
        std::printf("mask cache: %llu hits, %llu misses",
                    static_cast<unsigned long long>(result.cache_hits),
                    static_cast<unsigned long long>(result.cache_misses));
        if (result.cache_corruptions > 0) {
            std::printf(", %llu corrupt entries recomputed",
                        static_cast<unsigned long long>(result.cache_corruptions));
        }
        std::printf("\n");
    }
    std::printf("output: %s\n", result.output_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"inpainting-based perturbation analysis for object detectors"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string mask_mode;
    double tau = -1.0;
    long long seed = -1;
    int workers = 0;
    std::string cache_dir;
    std::string output_dir;
    std::string manifest;

    auto add_overrides = [&](CLI::App* cmd) {
        cmd->add_option("--mask-mode", mask_mode, "segmentation or bbox")
            ->check(CLI::IsMember({"segmentation", "bbox"}));
        cmd->add_option("--tau", tau, "detection confidence threshold");
        cmd->add_option("--seed", seed, "base RNG seed");
        cmd->add_option("--workers", workers, "worker thread count");
        cmd->add_option("--cache-dir", cache_dir, "mask cache directory");
        cmd->add_option("--output-dir", output_dir, "artifact output directory");
        cmd->add_option("--manifest", manifest, "dataset manifest path");
    };
    auto overrides_of = [&]() {
        perturbex::ConfigOverrides o;
        if (!mask_mode.empty()) o.mask_mode = mask_mode;
        if (tau >= 0.0) o.tau = tau;
        if (seed >= 0) o.seed = seed;
        if (workers > 0) o.workers = workers;
        if (!cache_dir.empty()) o.cache_dir = cache_dir;
        if (!output_dir.empty()) o.output_dir = output_dir;
        if (!manifest.empty()) o.manifest_path = manifest;
        return o;
    };

    CLI::App* detect = app.add_subcommand("detect", "detection pass only");
    detect->add_option("--config", config_path, "run config (JSON)")->required();
    add_overrides(detect);

    CLI::App* run = app.add_subcommand("run", "full perturbation pipeline");
    run->add_option("--config", config_path, "run config (JSON)")->required();
    add_overrides(run);

    CLI::App* sweep = app.add_subcommand("sweep", "inpainting parameter grid");
    sweep->add_option("--config", config_path, "run config (JSON)")->required();
    add_overrides(sweep);

    CLI::App* compare =
        app.add_subcommand("compare-mask-modes", "segmentation vs bbox runtime");
    compare->add_option("--config", config_path, "run config (JSON)")->required();
    add_overrides(compare);

    std::string run_dir;
    std::string annotations;
    std::string gallery_dir;
    CLI::App* report = app.add_subcommand("report", "HTML gallery for a finished run");
    report->add_option("--run", run_dir, "run output directory")->required();
    report->add_option("--annotations", annotations,
                       "plausibility CSV (image_id,spec_hash,plausibility)");
    report->add_option("--gallery-dir", gallery_dir,
                       "gallery destination (default: <run>/gallery)");

    std::string host = "127.0.0.1";
    int port = 8085;
    std::string mock_detector = "mock:blob";
    std::string mock_segmenter = "mock:blob";
    std::string mock_inpainter = "mock:fill";
    CLI::App* serve = app.add_subcommand("mock-serve", "serve the mock backends");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "bind port (0 picks a free one)");
    serve->add_option("--detector", mock_detector, "detector mock name");
    serve->add_option("--segmenter", mock_segmenter, "segmenter mock name");
    serve->add_option("--inpainter", mock_inpainter, "inpainter mock name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (detect->parsed()) {
            perturbex::RunConfig config = perturbex::load_run_config(config_path);
            perturbex::apply_overrides(config, overrides_of());
            std::string path = perturbex::run_detect_only(config);
            std::printf("detections: %s\n", path.c_str());
        } else if (run->parsed()) {
            perturbex::RunConfig config = perturbex::load_run_config(config_path);
            perturbex::apply_overrides(config, overrides_of());
            perturbex::RunResult result = perturbex::run(config);
            print_run_result(result);
        } else if (sweep->parsed()) {
            perturbex::RunConfig config = perturbex::load_run_config(config_path);
            perturbex::apply_overrides(config, overrides_of());
            std::vector<perturbex::RunResult> results = perturbex::sweep(config);
            std::printf("sweep: %zu combinations\n", results.size());
            for (const auto& result : results) {
                std::printf("%s\n", result.output_dir.c_str());
                for (const auto& s : result.summaries) print_summary_line(s);
            }
        } else if (compare->parsed()) {
            perturbex::RunConfig config = perturbex::load_run_config(config_path);
            perturbex::apply_overrides(config, overrides_of());
            perturbex::MaskModeReport rep = perturbex::compare_mask_modes(config);
            std::printf("removal (cold cache):      segmentation %.3fs/img, "
                        "bbox %.3fs/img, speedup %.2fx\n",
                        rep.removal_segmentation.total_mean_s,
                        rep.removal_bbox.total_mean_s, rep.removal_speedup);
            std::printf("replacement (warm cache):  segmentation %.3fs/img, "
                        "bbox %.3fs/img, speedup %.2fx\n",
                        rep.replacement_segmentation.total_mean_s,
                        rep.replacement_bbox.total_mean_s,
                        rep.cached_replacement_speedup);
        } else if (report->parsed()) {
            if (!annotations.empty()) {
                perturbex::AnnotationImportResult imported =
                    perturbex::import_annotations(annotations, run_dir);
                std::printf("annotations: %d record(s) updated\n", imported.updated);
            }
            perturbex::GalleryResult gallery =
                perturbex::render_gallery(run_dir, gallery_dir);
            std::printf("gallery: %s (%zu condition page(s))\n",
                        gallery.index_path.c_str(), gallery.condition_pages.size());
            for (const auto& warning : gallery.warnings) {
                std::fprintf(stderr, "warning: %s\n", warning.c_str());
            }
        } else if (serve->parsed()) {
            perturbex::MockServer server(mock_detector, mock_segmenter,
                                         mock_inpainter);
            std::printf("serving %s / %s / %s on %s:%d\n", mock_detector.c_str(),
                        mock_segmenter.c_str(), mock_inpainter.c_str(), host.c_str(),
                        port);
            std::fflush(stdout);
            server.run(host, port);
        }
    } catch (const perturbex::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const perturbex::BackendError& e) {
        std::fprintf(stderr, "backend error: %s\n", e.what());
        return 3;
    } catch (const perturbex::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
