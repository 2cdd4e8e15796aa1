#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace naudit {

using Json = nlohmann::json;

struct JsonlRow {
  std::size_t line = 0;  // 1-based
  Json value;
};

// Reads a JSONL file. Blank lines are skipped, as is a leading line holding
// a "manifest" object. Malformed lines raise ValidationError naming the line.
std::vector<JsonlRow> read_jsonl(const std::filesystem::path& path);

// Like read_jsonl but hands malformed lines to `on_error` instead of throwing.
std::vector<JsonlRow> read_jsonl_lenient(
    const std::filesystem::path& path,
    const std::function<void(std::size_t line, const std::string& reason)>& on_error);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace naudit
