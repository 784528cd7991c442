#include "perturbex/core.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace perturbex {

RasterImage RasterImage::filled(int w, int h, std::uint8_t r, std::uint8_t g,
                                std::uint8_t b) {
    if (w < 1 || h < 1) throw Error("RasterImage dimensions must be >= 1");
    RasterImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = r;
        img.pixels[i + 1] = g;
        img.pixels[i + 2] = b;
    }
    return img;
}

BinaryMask BinaryMask::filled(int w, int h, bool value) {
    if (w < 1 || h < 1) throw Error("BinaryMask dimensions must be >= 1");
    BinaryMask m;
    m.width = w;
    m.height = h;
    m.bits.assign(static_cast<std::size_t>(w) * h, value ? 1 : 0);
    return m;
}

std::size_t BinaryMask::count_set() const {
    return static_cast<std::size_t>(
        std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

SoftMask SoftMask::filled(int w, int h, double value) {
    if (w < 1 || h < 1) throw Error("SoftMask dimensions must be >= 1");
    SoftMask m;
    m.width = w;
    m.height = h;
    m.alpha.assign(static_cast<std::size_t>(w) * h, value);
    return m;
}

std::optional<BBox> BBox::clamped(int image_w, int image_h) const {
    int x0 = std::max(x, 0);
    int y0 = std::max(y, 0);
    int x1 = std::min(x + w, image_w);
    int y1 = std::min(y + h, image_h);
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return BBox{x0, y0, x1 - x0, y1 - y0};
}

void sort_detections(std::vector<Detection>& dets) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
        if (a.bbox.x != b.bbox.x) return a.bbox.x < b.bbox.x;
        return a.class_label < b.class_label;
    });
}

int clamp_detections(std::vector<Detection>& dets, int image_w, int image_h) {
    int clamped = 0;
    std::vector<Detection> kept;
    kept.reserve(dets.size());
    for (auto& d : dets) {
        auto c = d.bbox.clamped(image_w, image_h);
        if (!c) continue;  // entirely outside
        if (*c != d.bbox) ++clamped;
        d.bbox = *c;
        kept.push_back(std::move(d));
    }
    dets = std::move(kept);
    return clamped;
}

namespace {

Detection parse_annotation(const json& j, std::size_t entry_index) {
    std::ostringstream where;
    where << "manifest entry " << entry_index;
    if (!j.is_object() || !j.contains("class") || !j.contains("bbox") ||
        !j.contains("confidence")) {
        throw ConfigError(where.str() + ": annotation needs class, bbox, confidence");
    }
    Detection d;
    d.class_label = j.at("class").get<std::string>();
    const auto& bb = j.at("bbox");
    if (!bb.is_array() || bb.size() != 4) {
        throw ConfigError(where.str() + ": bbox must be [x,y,w,h]");
    }
    d.bbox = BBox{bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
    if (d.bbox.w <= 0 || d.bbox.h <= 0) {
        throw ConfigError(where.str() + ": bbox w/h must be positive");
    }
    d.confidence = j.at("confidence").get<double>();
    if (d.confidence < 0.0 || d.confidence > 1.0) {
        throw ConfigError(where.str() + ": confidence outside [0,1]");
    }
    return d;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("manifest parse error in " + path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("entries") || !j.at("entries").is_array()) {
        throw ConfigError("manifest must be {\"entries\": [...]}: " + path);
    }

    const fs::path base = fs::path(path).parent_path();
    DatasetManifest manifest;
    std::map<std::string, std::size_t> seen;
    const auto& entries = j.at("entries");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        std::ostringstream where;
        where << "manifest entry " << i;
        if (!e.is_object() || !e.contains("image_id") || !e.contains("path")) {
            throw ConfigError(where.str() + ": needs image_id and path");
        }
        ManifestEntry me;
        me.image_id = e.at("image_id").get<std::string>();
        if (me.image_id.empty()) throw ConfigError(where.str() + ": empty image_id");
        auto [it, inserted] = seen.emplace(me.image_id, i);
        if (!inserted) {
            std::ostringstream msg;
            msg << "duplicate image_id \"" << me.image_id << "\" at entries "
                << it->second << " and " << i;
            throw ConfigError(msg.str());
        }
        fs::path p = e.at("path").get<std::string>();
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) {
            throw ConfigError(where.str() + ": path not resolvable: " + p.string());
        }
        me.path = p.string();
        if (e.contains("annotations")) {
            if (!e.at("annotations").is_array()) {
                throw ConfigError(where.str() + ": annotations must be an array");
            }
            me.has_annotations = true;
            for (const auto& a : e.at("annotations")) {
                me.annotations.push_back(parse_annotation(a, i));
            }
        }
        manifest.entries.push_back(std::move(me));
    }
    return manifest;
}

}  // namespace perturbex
