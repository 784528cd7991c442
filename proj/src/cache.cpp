#include "perturbex/cache.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "perturbex/util.hpp"

namespace fs = std::filesystem;

namespace perturbex {

namespace {

// Entry layout: "PXC1" magic, 64 hex chars of payload SHA-256, '\n', payload.
constexpr char kMagic[4] = {'P', 'X', 'C', '1'};
constexpr std::size_t kHeaderSize = 4 + 64 + 1;

}  // namespace

ContentCache::ContentCache(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create cache directory " + dir_ + ": " + ec.message());
}

std::string ContentCache::key_of(const std::string& key_material) {
    return sha256_hex(key_material);
}

std::vector<std::uint8_t> ContentCache::get_or_compute(
    const std::string& key, const std::function<std::vector<std::uint8_t>()>& producer) {
    const fs::path path = fs::path(dir_) / (key + ".bin");

    if (fs::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
        bool ok = in.good() || in.eof();
        if (ok && buf.size() >= kHeaderSize &&
            std::equal(kMagic, kMagic + 4, buf.begin()) && buf[kHeaderSize - 1] == '\n') {
            std::string stored_sum(buf.begin() + 4, buf.begin() + 4 + 64);
            std::vector<std::uint8_t> payload(buf.begin() + kHeaderSize, buf.end());
            if (sha256_hex(payload.data(), payload.size()) == stored_sum) {
                ++hits_;
                return payload;
            }
        }
        // Unreadable or checksum mismatch: recompute below, overwriting the entry.
        ++corruptions_;
        std::cerr << "warning: cache entry " << path.string()
                  << " is corrupt; recomputing\n";
    }

    ++misses_;
    std::vector<std::uint8_t> payload = producer();

    // Write-to-temp + rename keeps concurrent readers away from partial files.
    const fs::path tmp = path.string() + "." + std::to_string(
        reinterpret_cast<std::uintptr_t>(&payload)) + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cache entry " + tmp.string());
        out.write(kMagic, 4);
        std::string sum = sha256_hex(payload.data(), payload.size());
        out.write(sum.data(), static_cast<std::streamsize>(sum.size()));
        out.put('\n');
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
        if (!out) throw IoError("short write to cache entry " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot finalize cache entry " + path.string() + ": " +
                      ec.message());
    }
    return payload;
}

}  // namespace perturbex
