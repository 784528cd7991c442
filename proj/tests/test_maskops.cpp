#include <doctest.h>

#include <cmath>
#include <random>

#include "perturbex/maskops.hpp"
#include "testutil.hpp"

using namespace perturbex;

namespace {

// Brute-force references, written independently of the library internals so
// the fast implementations are checked against the definitions.

BinaryMask oracle_pad(const BinaryMask& m, int r) {
    BinaryMask out = BinaryMask::filled(m.width, m.height, false);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            bool hit = false;
            for (int j = -r; j <= r && !hit; ++j) {
                for (int i = -r; i <= r && !hit; ++i) {
                    const int sx = x + i;
                    const int sy = y + j;
                    if (sx >= 0 && sx < m.width && sy >= 0 && sy < m.height &&
                        m.get(sx, sy)) {
                        hit = true;
                    }
                }
            }
            out.set(x, y, hit);
        }
    }
    return out;
}

int oracle_reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// Dense (non-separable) 2D convolution with the outer-product kernel.
SoftMask oracle_feather(const BinaryMask& m, double sigma) {
    if (sigma <= 0.0) {
        SoftMask out = SoftMask::filled(m.width, m.height, 0.0);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) out.set(x, y, m.get(x, y) ? 1.0 : 0.0);
        return out;
    }
    const std::vector<double> k = gaussian_kernel(sigma);
    const int h = static_cast<int>(k.size() / 2);
    SoftMask out = SoftMask::filled(m.width, m.height, 0.0);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            double acc = 0.0;
            for (int j = -h; j <= h; ++j) {
                for (int i = -h; i <= h; ++i) {
                    const int sx = oracle_reflect(x + i, m.width);
                    const int sy = oracle_reflect(y + j, m.height);
                    if (m.get(sx, sy)) acc += k[h + i] * k[h + j];
                }
            }
            if (acc < 1e-9) acc = 0.0;
            if (acc > 1.0 - 1e-9) acc = 1.0;
            out.set(x, y, acc);
        }
    }
    return out;
}

RasterImage oracle_composite(const RasterImage& fg, const SoftMask& a,
                             const RasterImage& bg) {
    RasterImage out = fg;
    for (int y = 0; y < fg.height; ++y) {
        for (int x = 0; x < fg.width; ++x) {
            const double alpha = a.get(x, y);
            for (int c = 0; c < 3; ++c) {
                const double v = alpha * fg.at(x, y)[c] + (1.0 - alpha) * bg.at(x, y)[c];
                long long r = std::llround(v);
                if (r < 0) r = 0;
                if (r > 255) r = 255;
                out.at(x, y)[c] = static_cast<std::uint8_t>(r);
            }
        }
    }
    return out;
}

BinaryMask random_mask(std::mt19937& rng, int max_dim = 32) {
    std::uniform_int_distribution<int> dim(1, max_dim);
    const int w = dim(rng);
    const int h = dim(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double density = unit(rng);
    BinaryMask m = BinaryMask::filled(w, h, false);
    for (auto& b : m.bits) b = unit(rng) < density ? 1 : 0;
    return m;
}

}  // namespace

TEST_SUITE("maskops") {

TEST_CASE("bbox_to_mask rasterizes with clamping") {
    BinaryMask m = bbox_to_mask({2, 1, 3, 2}, 8, 6);
    CHECK(m.count_set() == 6);
    CHECK(m.get(2, 1));
    CHECK(m.get(4, 2));
    CHECK_FALSE(m.get(5, 2));
    CHECK_FALSE(m.get(2, 3));

    CHECK(bbox_to_mask({-2, -2, 4, 4}, 8, 8).count_set() == 4);
    CHECK(bbox_to_mask({100, 100, 5, 5}, 8, 8).count_set() == 0);
}

TEST_CASE("union_masks is per-pixel OR") {
    std::mt19937& rng = testutil::property_rng();
    for (int round = 0; round < 50; ++round) {
        std::uniform_int_distribution<int> dim(1, 24);
        std::uniform_int_distribution<int> count(1, 5);
        const int w = dim(rng);
        const int h = dim(rng);
        const int n = count(rng);
        std::vector<BinaryMask> masks;
        for (int i = 0; i < n; ++i) {
            BinaryMask m = BinaryMask::filled(w, h, false);
            for (auto& b : m.bits) b = rng() % 2;
            masks.push_back(std::move(m));
        }
        BinaryMask u = union_masks(masks);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                bool any = false;
                for (const auto& m : masks) any = any || m.get(x, y);
                REQUIRE(u.get(x, y) == any);
            }
        }
    }
    CHECK_THROWS_AS(union_masks({}), Error);
    CHECK_THROWS_AS(
        union_masks({BinaryMask::filled(2, 2, true), BinaryMask::filled(3, 2, true)}),
        Error);
}

TEST_CASE("pad matches the square-dilation oracle on random masks") {
    std::mt19937& rng = testutil::property_rng();
    std::uniform_int_distribution<int> radius(0, 5);
    for (int round = 0; round < 200; ++round) {
        BinaryMask m = random_mask(rng);
        const int r = radius(rng);
        CHECK(pad(m, r) == oracle_pad(m, r));
    }
}

TEST_CASE("pad composition law holds exactly") {
    std::mt19937& rng = testutil::property_rng();
    std::uniform_int_distribution<int> radius(0, 4);
    for (int round = 0; round < 60; ++round) {
        BinaryMask m = random_mask(rng, 24);
        const int a = radius(rng);
        const int b = radius(rng);
        CHECK(pad(pad(m, a), b) == pad(m, a + b));
    }
}

TEST_CASE("pad radius zero is the identity") {
    std::mt19937& rng = testutil::property_rng();
    BinaryMask m = random_mask(rng);
    CHECK(pad(m, 0) == m);
}

TEST_CASE("gaussian kernel shape") {
    for (double sigma : {0.3, 0.5, 1.0, 2.3, 4.0}) {
        std::vector<double> k = gaussian_kernel(sigma);
        const int h = static_cast<int>(std::ceil(3.0 * sigma));
        REQUIRE(static_cast<int>(k.size()) == 2 * h + 1);
        double sum = 0.0;
        for (double v : k) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (int i = 0; i < h; ++i) CHECK(k[i] == k[2 * h - i]);
        for (int i = 1; i <= h; ++i) CHECK(k[h + i] < k[h + i - 1]);
    }
}

TEST_CASE("feather matches the dense 2D convolution oracle") {
    std::mt19937& rng = testutil::property_rng();
    const double sigmas[] = {0.5, 1.0, 2.3};
    for (int round = 0; round < 60; ++round) {
        BinaryMask m = random_mask(rng, 24);
        const double sigma = sigmas[round % 3];
        SoftMask got = feather(m, sigma);
        SoftMask want = oracle_feather(m, sigma);
        REQUIRE(got.width == want.width);
        REQUIRE(got.height == want.height);
        for (std::size_t i = 0; i < got.alpha.size(); ++i) {
            REQUIRE(got.alpha[i] == doctest::Approx(want.alpha[i]).epsilon(1e-7));
            REQUIRE(got.alpha[i] >= 0.0);
            REQUIRE(got.alpha[i] <= 1.0);
        }
    }
}

TEST_CASE("feather endpoints snap exactly") {
    BinaryMask ones = BinaryMask::filled(9, 7, true);
    SoftMask f = feather(ones, 1.5);
    for (double a : f.alpha) CHECK(a == 1.0);

    BinaryMask zeros = BinaryMask::filled(9, 7, false);
    f = feather(zeros, 1.5);
    for (double a : f.alpha) CHECK(a == 0.0);

    // Pixels farther than the kernel reach from any set pixel stay exactly 0.
    BinaryMask dot = BinaryMask::filled(21, 21, false);
    dot.set(0, 0, true);
    f = feather(dot, 1.0);  // half-width 3
    CHECK(f.get(20, 20) == 0.0);
    CHECK(f.get(0, 0) > 0.0);
}

TEST_CASE("feather radius zero returns binary alpha") {
    std::mt19937& rng = testutil::property_rng();
    BinaryMask m = random_mask(rng);
    SoftMask f = feather(m, 0.0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            CHECK(f.get(x, y) == (m.get(x, y) ? 1.0 : 0.0));
}

TEST_CASE("feather of a symmetric mask is symmetric") {
    BinaryMask m = BinaryMask::filled(15, 11, false);
    for (int y = 3; y < 8; ++y)
        for (int x = 5; x < 10; ++x) m.set(x, y, true);
    SoftMask f = feather(m, 1.3);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            CHECK(f.get(x, y) == f.get(m.width - 1 - x, y));
}

TEST_CASE("threshold is inclusive") {
    SoftMask s = SoftMask::filled(3, 1, 0.0);
    s.set(0, 0, 0.499999);
    s.set(1, 0, 0.5);
    s.set(2, 0, 1.0);
    BinaryMask t = threshold(s, 0.5);
    CHECK_FALSE(t.get(0, 0));
    CHECK(t.get(1, 0));
    CHECK(t.get(2, 0));
    t = threshold(s, 1.0);
    CHECK_FALSE(t.get(1, 0));
    CHECK(t.get(2, 0));
}

TEST_CASE("nearest-neighbor mask resize matches index oracle") {
    std::mt19937& rng = testutil::property_rng();
    std::uniform_int_distribution<int> dim(1, 48);
    for (int round = 0; round < 60; ++round) {
        BinaryMask m = random_mask(rng);
        const int nw = dim(rng);
        const int nh = dim(rng);
        BinaryMask r = resize_mask(m, nw, nh);
        REQUIRE(r.width == nw);
        REQUIRE(r.height == nh);
        for (int y = 0; y < nh; ++y) {
            for (int x = 0; x < nw; ++x) {
                const int sx = static_cast<int>(
                    static_cast<long long>(x) * m.width / nw);
                const int sy = static_cast<int>(
                    static_cast<long long>(y) * m.height / nh);
                REQUIRE(r.get(x, y) == m.get(sx, sy));
            }
        }
    }
    BinaryMask m = random_mask(rng);
    CHECK(resize_mask(m, m.width, m.height) == m);
}

TEST_CASE("bilinear resize matches pixel-center oracle") {
    std::mt19937& rng = testutil::property_rng();
    std::uniform_int_distribution<int> dim(1, 40);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 0; round < 40; ++round) {
        SoftMask s = SoftMask::filled(dim(rng), dim(rng), 0.0);
        for (auto& a : s.alpha) a = unit(rng);
        const int nw = dim(rng);
        const int nh = dim(rng);
        SoftMask r = resize_mask(s, nw, nh);
        for (int y = 0; y < nh; ++y) {
            for (int x = 0; x < nw; ++x) {
                const double sx = (x + 0.5) * s.width / nw - 0.5;
                const double sy = (y + 0.5) * s.height / nh - 0.5;
                int x0 = static_cast<int>(std::floor(sx));
                int y0 = static_cast<int>(std::floor(sy));
                const double fx = sx - x0;
                const double fy = sy - y0;
                auto cl = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
                const int x1 = cl(x0 + 1, s.width - 1);
                const int y1 = cl(y0 + 1, s.height - 1);
                x0 = cl(x0, s.width - 1);
                y0 = cl(y0, s.height - 1);
                const double want =
                    (1 - fy) * ((1 - fx) * s.get(x0, y0) + fx * s.get(x1, y0)) +
                    fy * ((1 - fx) * s.get(x0, y1) + fx * s.get(x1, y1));
                REQUIRE(r.get(x, y) == doctest::Approx(want).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("image resize identity and round trip sanity") {
    std::mt19937& rng = testutil::property_rng();
    RasterImage img = testutil::blob_image(13, 9, {{3, 3, 5, 4}});
    for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng());
    CHECK(resize_image(img, 13, 9) == img);
    RasterImage up = resize_image(img, 26, 18);
    CHECK(up.width == 26);
    CHECK(up.height == 18);
    // corners map to corners under pixel-center alignment
    CHECK(up.at(0, 0)[0] == img.at(0, 0)[0]);
    CHECK(up.at(25, 17)[2] == img.at(12, 8)[2]);
}

TEST_CASE("composite matches per-pixel oracle on random inputs") {
    std::mt19937& rng = testutil::property_rng();
    std::uniform_int_distribution<int> dim(1, 24);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 0; round < 60; ++round) {
        const int w = dim(rng);
        const int h = dim(rng);
        RasterImage fg = RasterImage::filled(w, h, 0, 0, 0);
        RasterImage bg = RasterImage::filled(w, h, 0, 0, 0);
        for (auto& b : fg.pixels) b = static_cast<std::uint8_t>(rng());
        for (auto& b : bg.pixels) b = static_cast<std::uint8_t>(rng());
        SoftMask a = SoftMask::filled(w, h, 0.0);
        for (auto& v : a.alpha) v = unit(rng);
        // exercise the exact endpoints too
        if (!a.alpha.empty()) a.alpha[0] = 1.0;
        if (a.alpha.size() > 1) a.alpha[1] = 0.0;
        CHECK(composite(fg, a, bg) == oracle_composite(fg, a, bg));
    }
}

TEST_CASE("composite endpoints pass bytes through") {
    RasterImage fg = RasterImage::filled(4, 4, 10, 200, 31);
    RasterImage bg = RasterImage::filled(4, 4, 250, 3, 77);
    CHECK(composite(fg, SoftMask::filled(4, 4, 1.0), bg) == fg);
    CHECK(composite(fg, SoftMask::filled(4, 4, 0.0), bg) == bg);
    CHECK_THROWS_AS(composite(fg, SoftMask::filled(3, 4, 1.0), bg), Error);
}

}  // TEST_SUITE("maskops")
