#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace perturbex {

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// SHA-256 of a byte buffer as lowercase hex.
std::string sha256_hex(const std::uint8_t* data, std::size_t len);
std::string sha256_hex(const std::string& data);
std::string sha256_hex(const std::vector<std::uint8_t>& data);

std::uint64_t fnv1a64(const std::string& s);

/// Shortest decimal representation that round-trips a double. Used wherever
/// numbers land in deterministic output files.
std::string format_double(double v);

}  // namespace perturbex
