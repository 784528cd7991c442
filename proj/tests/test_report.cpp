#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include <json.hpp>

#include "perturbex/config.hpp"
#include "perturbex/report.hpp"
#include "perturbex/runner.hpp"
#include "testutil.hpp"

using namespace perturbex;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A finished three-condition run to report over.
struct ReportFixture {
    testutil::TempDir tmp;
    RunResult result;
    fs::path run_dir;

    ReportFixture() {
        std::string manifest = testutil::write_blob_dataset(tmp / "data", 3, 21);
        json cfg = testutil::base_run_config(manifest, (tmp / "out").string(),
                                             (tmp / "cache").string());
        cfg["perturbations"] = json::array(
            {{{"kind", "removal"}},
             {{"kind", "replacement"}, {"target_class", "boat"}, {"mask_mode", "bbox"}},
             {{"kind", "background"}, {"environments", {"beach", "winter"}}}});
        result = run(load_run_config(testutil::write_config(tmp.path(), cfg)));
        run_dir = tmp / "out";
    }
};

std::map<std::string, int> count_occurrences(const std::string& text,
                                             const std::vector<std::string>& needles) {
    std::map<std::string, int> counts;
    for (const auto& n : needles) {
        int c = 0;
        std::size_t pos = 0;
        while ((pos = text.find(n, pos)) != std::string::npos) {
            ++c;
            pos += n.size();
        }
        counts[n] = c;
    }
    return counts;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("draw_detections leaves non-stroke pixels untouched") {
    std::mt19937& rng = testutil::property_rng();
    RasterImage img = RasterImage::filled(40, 30, 0, 0, 0);
    for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng());

    SUBCASE("no detections, no change") {
        CHECK(draw_detections(img, {}, 0.4) == img);
    }

    SUBCASE("small solid box changes exactly the stroke pixels") {
        // too small for a confidence label, so the stroke is the whole diff
        BBox box{5, 5, 8, 6};
        RasterImage out = draw_detections(img, {{"blob", box, 0.9}}, 0.4);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const bool on_stroke =
                    x >= box.x && x < box.x + box.w && y >= box.y && y < box.y + box.h &&
                    (x == box.x || x == box.x + box.w - 1 || y == box.y ||
                     y == box.y + box.h - 1);
                if (on_stroke) {
                    REQUIRE(out.at(x, y)[0] == 0);
                    REQUIRE(out.at(x, y)[1] == 200);
                    REQUIRE(out.at(x, y)[2] == 0);
                } else {
                    REQUIRE(out.at(x, y)[0] == img.at(x, y)[0]);
                    REQUIRE(out.at(x, y)[1] == img.at(x, y)[1]);
                    REQUIRE(out.at(x, y)[2] == img.at(x, y)[2]);
                }
            }
        }
    }

    SUBCASE("below-threshold boxes draw dashed") {
        BBox box{5, 5, 20, 12};
        RasterImage dashed = draw_detections(img, {{"blob", box, 0.2}}, 0.4);
        const int perimeter = 2 * (box.w + box.h) - 4;
        int amber = 0;
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (dashed.at(x, y)[0] == 235 && dashed.at(x, y)[1] == 170 &&
                    dashed.at(x, y)[2] == 0) {
                    ++amber;
                }
            }
        }
        CHECK(amber > 0);
        CHECK(amber < perimeter);  // gaps in the dashes
        // dashes stay confined to the perimeter
        for (int y = box.y + 1; y < box.y + box.h - 1; ++y) {
            for (int x = box.x + 1; x < box.x + box.w - 1; ++x) {
                REQUIRE(dashed.at(x, y)[0] == img.at(x, y)[0]);
            }
        }
    }

    SUBCASE("labels render inside large boxes") {
        BBox box{5, 5, 30, 20};
        RasterImage out = draw_detections(img, {{"blob", box, 0.87}}, 0.4);
        // label patch lives just inside the top-left corner
        bool patch_found = false;
        for (int y = box.y + 2; y < box.y + 9 && !patch_found; ++y) {
            for (int x = box.x + 2; x < box.x + 18; ++x) {
                if (out.at(x, y)[0] == 20 && out.at(x, y)[1] == 20 &&
                    out.at(x, y)[2] == 20) {
                    patch_found = true;
                    break;
                }
            }
        }
        CHECK(patch_found);
    }

    SUBCASE("boxes spilling off the image are clamped, not fatal") {
        RasterImage out =
            draw_detections(img, {{"blob", {-10, -10, 30, 25}, 0.95}}, 0.4);
        CHECK(out.width == img.width);
    }
}

TEST_CASE("gallery covers every record exactly once with badges and grouping") {
    ReportFixture fx;
    GalleryResult gallery = render_gallery(fx.run_dir.string());
    CHECK(fs::exists(gallery.index_path));
    CHECK(gallery.warnings.empty());
    REQUIRE(gallery.condition_pages.size() == 3);

    std::string all_pages;
    for (const auto& page : gallery.condition_pages) {
        all_pages += testutil::read_text(page);
    }
    // every record's (image, spec) pair appears exactly once across pages
    for (const auto& rec : fx.result.records) {
        auto counts = count_occurrences(
            all_pages, {"spec " + rec.spec.spec_hash});
        // 3 records share each removal/replacement spec; count per page row
        CHECK(counts["spec " + rec.spec.spec_hash] >= 1);
    }
    int rows = count_occurrences(all_pages, {"class=\"row\""})["class=\"row\""];
    CHECK(rows == static_cast<int>(fx.result.records.size()));

    // removal flips everything; replacement page flags flips too
    std::string removal_page = testutil::read_text(
        (fs::path(gallery.index_path).parent_path() / "removal.html").string());
    int flips = count_occurrences(removal_page, {">FLIP<"})[">FLIP<"];
    CHECK(flips == 3);

    // background page groups by environment with per-group flip headers
    std::string bg_page = testutil::read_text(
        (fs::path(gallery.index_path).parent_path() / "background.html").string());
    CHECK(bg_page.find("<h2>beach") != std::string::npos);
    CHECK(bg_page.find("<h2>winter") != std::string::npos);
    CHECK(bg_page.find("0/3 flips") != std::string::npos);

    // header counts match the summary numbers
    for (const auto& s : fx.result.summaries) {
        if (s.condition == "removal") {
            CHECK(removal_page.find("<td>" + std::to_string(s.n) + "</td>") !=
                  std::string::npos);
            CHECK(removal_page.find("<td>" + std::to_string(s.flips) + "</td>") !=
                  std::string::npos);
        }
    }

    // links are relative: no absolute paths leak into the pages
    CHECK(all_pages.find("src=\"/") == std::string::npos);
    CHECK(all_pages.find(fx.tmp.str()) == std::string::npos);
}

TEST_CASE("gallery regeneration is byte-identical") {
    ReportFixture fx;
    render_gallery(fx.run_dir.string());
    const fs::path gallery_dir = fx.run_dir / "gallery";
    std::map<std::string, std::string> first;
    for (const auto& entry : fs::recursive_directory_iterator(gallery_dir)) {
        if (entry.is_regular_file()) {
            first[entry.path().string()] = testutil::read_text(entry.path());
        }
    }
    REQUIRE_FALSE(first.empty());
    render_gallery(fx.run_dir.string());
    for (const auto& [path, content] : first) {
        CHECK(testutil::read_text(path) == content);
    }
}

TEST_CASE("missing artifacts render placeholders and warnings") {
    ReportFixture fx;
    // knock out one perturbed image
    const auto& victim = fx.result.records.front();
    fs::remove(fx.run_dir / victim.image_id / victim.spec.spec_hash / "perturbed.png");

    GalleryResult gallery = render_gallery(fx.run_dir.string());
    REQUIRE(gallery.warnings.size() == 1);
    CHECK(gallery.warnings[0].find("perturbed.png") != std::string::npos);
    CHECK(gallery.warnings[0].find(victim.image_id) != std::string::npos);

    std::string index = testutil::read_text(gallery.index_path);
    CHECK(index.find("Warnings") != std::string::npos);
    std::string all_pages;
    for (const auto& page : gallery.condition_pages) {
        all_pages += testutil::read_text(page);
    }
    CHECK(all_pages.find("class=\"missing\"") != std::string::npos);
}

TEST_CASE("annotations import updates records and summaries") {
    ReportFixture fx;
    // judge two replacement records
    std::vector<const OutcomeRecord*> replacement;
    for (const auto& r : fx.result.records) {
        if (r.spec.kind == PerturbKind::replacement) replacement.push_back(&r);
    }
    REQUIRE(replacement.size() == 3);
    std::string csv = "image_id,spec_hash,plausibility\n";
    csv += replacement[0]->image_id + "," + replacement[0]->spec.spec_hash +
           ",plausible\n";
    csv += replacement[1]->image_id + "," + replacement[1]->spec.spec_hash +
           ",implausible\n";
    testutil::write_text(fx.tmp / "ann.csv", csv);

    AnnotationImportResult imported =
        import_annotations((fx.tmp / "ann.csv").string(), fx.run_dir.string());
    CHECK(imported.updated == 2);

    // records rewritten with the judgments
    int judged = 0;
    for (const auto& r : imported.records) {
        if (r.plausibility != Plausibility::unjudged) ++judged;
    }
    CHECK(judged == 2);

    json summary = json::parse(testutil::read_text(fx.run_dir / "summary.json"));
    bool found = false;
    for (const auto& s : summary["summaries"]) {
        if (s["condition"] == "replacement:boat") {
            REQUIRE(s.contains("plausibility"));
            CHECK(s["plausibility"]["plausible"] == 1);
            CHECK(s["plausibility"]["implausible"] == 1);
            CHECK(s["plausibility"]["unjudged"] == 1);
            found = true;
        }
    }
    CHECK(found);

    // judgments survive a gallery rebuild
    GalleryResult gallery = render_gallery(fx.run_dir.string());
    std::string all_pages;
    for (const auto& page : gallery.condition_pages) {
        all_pages += testutil::read_text(page);
    }
    CHECK(all_pages.find("judged plausible") != std::string::npos);
}

TEST_CASE("annotation errors name the offending row") {
    ReportFixture fx;
    testutil::write_text(fx.tmp / "unknown.csv",
                         "image_id,spec_hash,plausibility\nghost,beefbeefbeef,plausible\n");
    CHECK_THROWS_WITH_AS(
        import_annotations((fx.tmp / "unknown.csv").string(), fx.run_dir.string()),
        doctest::Contains("row 2"), ConfigError);

    const auto& rec = fx.result.records.front();
    testutil::write_text(fx.tmp / "badlabel.csv",
                         "image_id,spec_hash,plausibility\n" + rec.image_id + "," +
                             rec.spec.spec_hash + ",sorta\n");
    CHECK_THROWS_WITH_AS(
        import_annotations((fx.tmp / "badlabel.csv").string(), fx.run_dir.string()),
        doctest::Contains("row 2"), ConfigError);

    testutil::write_text(fx.tmp / "short.csv", "image_id,spec_hash,plausibility\na,b\n");
    CHECK_THROWS_WITH_AS(
        import_annotations((fx.tmp / "short.csv").string(), fx.run_dir.string()),
        doctest::Contains("row 2"), ConfigError);

    CHECK_THROWS_AS(
        import_annotations((fx.tmp / "absent.csv").string(), fx.run_dir.string()),
        IoError);
}

TEST_CASE("empty annotation file changes nothing") {
    ReportFixture fx;
    const std::string before = testutil::read_text(fx.run_dir / "records.jsonl");
    testutil::write_text(fx.tmp / "empty.csv", "image_id,spec_hash,plausibility\n");
    AnnotationImportResult imported =
        import_annotations((fx.tmp / "empty.csv").string(), fx.run_dir.string());
    CHECK(imported.updated == 0);
    CHECK(testutil::read_text(fx.run_dir / "records.jsonl") == before);
}

}  // TEST_SUITE("report")
