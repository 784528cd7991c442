#pragma once

#include <string>
#include <vector>

#include "perturbex/core.hpp"
#include "perturbex/metrics.hpp"

namespace perturbex {

/// Overlay detection boxes: solid stroke with a small confidence label for
/// boxes at or above tau, dashed stroke below. Pixels outside the strokes
/// and label patches are left untouched.
RasterImage draw_detections(const RasterImage& image,
                            const std::vector<Detection>& detections, double tau);

struct GalleryResult {
    std::string index_path;
    std::vector<std::string> condition_pages;
    std::vector<std::string> warnings;  // missing artifacts etc.
};

/// Static side-by-side gallery over a finished run directory: one page per
/// condition, each row an original/mask/perturbed triptych with pre/post
/// boxes overlaid, flips and spurious detections badged, background rows
/// grouped by environment. Relative links only; regeneration is
/// byte-identical.
GalleryResult render_gallery(const std::string& run_dir,
                             const std::string& output_dir = "");

struct AnnotationImportResult {
    int updated = 0;
    std::vector<OutcomeRecord> records;
};

/// Ingest expert plausibility judgments (CSV: image_id,spec_hash,plausibility)
/// into a run's records and refresh summary.json with the plausibility
/// breakdown. Unknown (image_id, spec_hash) pairs and invalid labels are
/// errors naming the row.
AnnotationImportResult import_annotations(const std::string& csv_path,
                                          const std::string& run_dir);

}  // namespace perturbex
