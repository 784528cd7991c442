#include <doctest.h>

#include <chrono>
#include <cmath>

#include "perturbex/backends.hpp"
#include "perturbex/maskops.hpp"
#include "testutil.hpp"

using namespace perturbex;

namespace {

BackendDescriptor mock_desc(BackendKind kind, const std::string& endpoint) {
    BackendDescriptor d;
    d.kind = kind;
    d.endpoint = endpoint;
    return d;
}

}  // namespace

TEST_SUITE("backends") {

TEST_CASE("blob pixel predicate boundaries") {
    CHECK(is_blob_pixel(128, 99, 99));
    CHECK(is_blob_pixel(255, 0, 0));
    CHECK_FALSE(is_blob_pixel(127, 99, 99));
    CHECK_FALSE(is_blob_pixel(128, 100, 99));
    CHECK_FALSE(is_blob_pixel(128, 99, 100));
    CHECK_FALSE(is_blob_pixel(90, 140, 200));
}

TEST_CASE("blob detector finds components with exact boxes and confidence") {
    RasterImage img = testutil::blob_image(64, 48, {{5, 5, 20, 10},  // area 200
                                                    {40, 20, 10, 25}});  // area 250
    BlobDetector det;
    auto found = det.detect(img);
    REQUIRE(found.size() == 2);
    // sorted by descending confidence: 250-area blob first
    CHECK(found[0].bbox == BBox{40, 20, 10, 25});
    CHECK(found[0].confidence == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(found[1].bbox == BBox{5, 5, 20, 10});
    CHECK(found[1].confidence == doctest::Approx(0.20).epsilon(1e-12));
    CHECK(found[0].class_label == "blob");

    // area >= 1000 saturates at confidence 1
    RasterImage big = testutil::blob_image(64, 48, {{2, 2, 50, 30}});
    auto sat = det.detect(big);
    REQUIRE(sat.size() == 1);
    CHECK(sat[0].confidence == 1.0);

    CHECK(det.detect(testutil::blob_image(32, 32, {})).empty());
}

TEST_CASE("blob detector uses 4-connectivity") {
    // two blobs touching only diagonally stay separate components
    RasterImage img = RasterImage::filled(16, 16, 90, 140, 200);
    testutil::add_blob(img, {2, 2, 3, 3});
    testutil::add_blob(img, {5, 5, 3, 3});
    BlobDetector det;
    CHECK(det.detect(img).size() == 2);

    // sharing an edge merges them
    RasterImage joined = RasterImage::filled(16, 16, 90, 140, 200);
    testutil::add_blob(joined, {2, 2, 3, 3});
    testutil::add_blob(joined, {5, 2, 3, 3});
    auto merged = det.detect(joined);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].bbox == BBox{2, 2, 6, 3});
}

TEST_CASE("rect segmenter rasterizes boxes") {
    RasterImage img = testutil::blob_image(32, 24, {});
    RectSegmenter seg;
    auto masks = seg.segment(img, {{4, 4, 6, 5}, {-3, -3, 5, 5}});
    REQUIRE(masks.size() == 2);
    CHECK(masks[0] == bbox_to_mask({4, 4, 6, 5}, 32, 24));
    CHECK(masks[1] == bbox_to_mask({-3, -3, 5, 5}, 32, 24));
    CHECK(masks[0].width == 32);
    CHECK(masks[0].height == 24);
}

TEST_CASE("blob segmenter selects exactly the blob pixels inside the box") {
    RasterImage img = testutil::blob_image(32, 24, {{10, 8, 6, 4}});
    BlobSegmenter seg;
    auto masks = seg.segment(img, {{8, 6, 12, 10}});
    REQUIRE(masks.size() == 1);
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 32; ++x) {
            const bool in_box = x >= 8 && x < 20 && y >= 6 && y < 16;
            const bool is_blob = x >= 10 && x < 16 && y >= 8 && y < 12;
            REQUIRE(masks[0].get(x, y) == (in_box && is_blob));
        }
    }
}

TEST_CASE("fill inpainter paints the ring mean into the mask") {
    RasterImage img = RasterImage::filled(20, 20, 10, 20, 30);
    testutil::add_blob(img, {8, 8, 4, 4});
    BinaryMask mask = bbox_to_mask({8, 8, 4, 4}, 20, 20);

    FillInpainter fill;
    RasterImage out = fill.inpaint(img, mask, "", "", InpaintParams{});

    // oracle: mean over the 2-px Chebyshev ring, all background colored here
    BinaryMask ring = pad(mask, 2);
    long sum_r = 0, sum_g = 0, sum_b = 0, count = 0;
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            if (ring.get(x, y) && !mask.get(x, y)) {
                sum_r += img.at(x, y)[0];
                sum_g += img.at(x, y)[1];
                sum_b += img.at(x, y)[2];
                ++count;
            }
        }
    }
    REQUIRE(count > 0);
    const std::uint8_t want_r = static_cast<std::uint8_t>(
        std::lround(static_cast<double>(sum_r) / count));
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            if (mask.get(x, y)) {
                REQUIRE(out.at(x, y)[0] == want_r);
                REQUIRE(out.at(x, y)[1] == static_cast<std::uint8_t>(std::lround(
                                               static_cast<double>(sum_g) / count)));
            } else {
                REQUIRE(out.at(x, y)[0] == img.at(x, y)[0]);
            }
        }
    }

    // no ring at all: blank-canvas fallback is mid-gray
    RasterImage covered =
        fill.inpaint(img, BinaryMask::filled(20, 20, true), "", "", InpaintParams{});
    CHECK(covered.at(0, 0)[0] == 128);
    CHECK(covered.at(10, 10)[1] == 128);
    CHECK(covered.at(19, 19)[2] == 128);
}

TEST_CASE("identity inpainter returns the input") {
    RasterImage img = testutil::blob_image(16, 12, {{2, 2, 5, 5}});
    IdentityInpainter ident;
    CHECK(ident.inpaint(img, bbox_to_mask({2, 2, 5, 5}, 16, 12), "", "",
                        InpaintParams{}) == img);
}

TEST_CASE("stamp inpainter writes only masked pixels, never blob colors") {
    RasterImage img = testutil::blob_image(48, 40, {{10, 10, 20, 16}});
    BinaryMask mask = bbox_to_mask({10, 10, 20, 16}, 48, 40);
    StampInpainter stamp("iceberg");
    RasterImage out = stamp.inpaint(img, mask, "", "", InpaintParams{});
    bool changed_any = false;
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 48; ++x) {
            const auto* po = out.at(x, y);
            if (!mask.get(x, y)) {
                REQUIRE(po[0] == img.at(x, y)[0]);
                REQUIRE(po[1] == img.at(x, y)[1]);
                REQUIRE(po[2] == img.at(x, y)[2]);
            } else {
                REQUIRE_FALSE(is_blob_pixel(po[0], po[1], po[2]));
                if (po[0] != img.at(x, y)[0]) changed_any = true;
            }
        }
    }
    CHECK(changed_any);

    // deterministic, and distinct targets get distinct palettes
    CHECK(stamp.inpaint(img, mask, "", "", InpaintParams{}) == out);
    auto pal_a = StampInpainter::palette_for("iceberg");
    auto pal_b = StampInpainter::palette_for("boat");
    const bool same_fill = pal_a.fill[0] == pal_b.fill[0] &&
                           pal_a.fill[1] == pal_b.fill[1] &&
                           pal_a.fill[2] == pal_b.fill[2];
    CHECK_FALSE(same_fill);
    for (const auto& pal : {pal_a, pal_b}) {
        CHECK_FALSE(is_blob_pixel(pal.fill[0], pal.fill[1], pal.fill[2]));
        CHECK_FALSE(is_blob_pixel(pal.hull[0], pal.hull[1], pal.hull[2]));
        CHECK_FALSE(is_blob_pixel(pal.sail[0], pal.sail[1], pal.sail[2]));
    }
}

TEST_CASE("inpaint_localized restores unmasked pixels across a resize round trip") {
    std::mt19937& rng = testutil::property_rng();
    RasterImage img = RasterImage::filled(37, 29, 0, 0, 0);
    for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng());
    BinaryMask mask = bbox_to_mask({9, 7, 12, 10}, 37, 29);

    InpaintParams params;
    params.target_width = 64;  // force the resize path on odd dimensions
    params.target_height = 64;
    FillInpainter fill;
    RasterImage out = inpaint_localized(fill, img, mask, "x", "y", params);
    REQUIRE(out.width == img.width);
    REQUIRE(out.height == img.height);
    int changed = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask.get(x, y)) {
                REQUIRE(out.at(x, y)[0] == img.at(x, y)[0]);
                REQUIRE(out.at(x, y)[1] == img.at(x, y)[1]);
                REQUIRE(out.at(x, y)[2] == img.at(x, y)[2]);
            } else if (out.at(x, y)[0] != img.at(x, y)[0]) {
                ++changed;
            }
        }
    }
    CHECK(changed > 0);

    CHECK_THROWS_AS(inpaint_localized(fill, img, BinaryMask::filled(37, 29, false),
                                      "", "", params),
                    Error);
    BinaryMask wrong_dims = BinaryMask::filled(5, 5, true);
    CHECK_THROWS_AS(inpaint_localized(fill, img, wrong_dims, "", "", params), Error);
}

TEST_CASE("inpaint_localized rejects a backend that changes dimensions") {
    struct ShrinkingInpainter : Inpainter {
        RasterImage inpaint(const RasterImage&, const BinaryMask&, const std::string&,
                            const std::string&, const InpaintParams&) override {
            return RasterImage::filled(3, 3, 0, 0, 0);
        }
        std::string model_id() const override { return "mock:shrink"; }
    };
    ShrinkingInpainter bad;
    RasterImage img = testutil::blob_image(16, 16, {});
    CHECK_THROWS_AS(inpaint_localized(bad, img, BinaryMask::filled(16, 16, true), "",
                                      "", InpaintParams{}),
                    Error);
}

TEST_CASE("factories dispatch on endpoint names") {
    CHECK(make_detector(mock_desc(BackendKind::detector, "mock:blob"))->model_id() ==
          "mock:blob-detector");
    CHECK(make_segmenter(mock_desc(BackendKind::segmenter, "mock:rect"))->model_id() ==
          "mock:rect-segmenter");
    CHECK(make_segmenter(mock_desc(BackendKind::segmenter, "mock:blob"))->model_id() ==
          "mock:blob-segmenter");
    CHECK(make_inpainter(mock_desc(BackendKind::inpainter, "mock:fill"))->model_id() ==
          "mock:fill-inpainter");
    CHECK(make_inpainter(mock_desc(BackendKind::inpainter, "mock:identity"))
              ->model_id() == "mock:identity-inpainter");
    CHECK(make_inpainter(mock_desc(BackendKind::inpainter, "mock:stamp:iceberg"))
              ->model_id() == "mock:stamp-inpainter:iceberg");

    CHECK_THROWS_AS(make_detector(mock_desc(BackendKind::detector, "mock:nope")),
                    ConfigError);
    CHECK_THROWS_AS(make_segmenter(mock_desc(BackendKind::segmenter, "sam://x")),
                    ConfigError);
    CHECK_THROWS_AS(make_inpainter(mock_desc(BackendKind::inpainter, "")),
                    ConfigError);
}

TEST_CASE("healthcheck on mock endpoints") {
    HealthStatus ok = healthcheck(mock_desc(BackendKind::detector, "mock:blob"));
    CHECK(ok.reachable);
    CHECK(ok.model == "mock:blob-detector");

    HealthStatus bad = healthcheck(mock_desc(BackendKind::detector, "mock:nope"));
    CHECK_FALSE(bad.reachable);
    CHECK_FALSE(bad.cause.empty());

    HealthStatus garbage = healthcheck(mock_desc(BackendKind::inpainter, "weird"));
    CHECK_FALSE(garbage.reachable);
}

TEST_CASE("simulated backend delay is honored") {
    BackendDescriptor d = mock_desc(BackendKind::detector, "mock:blob");
    d.simulate_delay_s = 0.05;
    auto det = make_detector(d);
    RasterImage img = testutil::blob_image(16, 16, {});
    const auto start = std::chrono::steady_clock::now();
    det->detect(img);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed >= 0.045);
}

}  // TEST_SUITE("backends")
