#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace dml::io {

// shortest decimal that round-trips a double ("%.17g")
std::string fmt(double v);

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& content);

// FNV-1a over the file bytes, hex encoded; used for output manifests
std::uint64_t fnv1a_file(const std::filesystem::path& p);
std::string checksum_hex(const std::filesystem::path& p);

}  // namespace dml::io
