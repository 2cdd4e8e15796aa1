#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace naudit {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// SplitMix64 finalizer, used to derive independent sub-seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace naudit
