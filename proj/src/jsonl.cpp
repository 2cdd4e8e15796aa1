#include "narrative_audit/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "narrative_audit/error.hpp"

namespace naudit {
namespace {

std::vector<JsonlRow> read_impl(
    const std::filesystem::path& path,
    const std::function<void(std::size_t, const std::string&)>* on_error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<JsonlRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json value;
    try {
      value = Json::parse(line);
    } catch (const Json::parse_error& e) {
      const std::string reason = "malformed JSON: " + std::string(e.what());
      if (on_error) {
        (*on_error)(line_no, reason);
        first = false;
        continue;
      }
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + reason);
    }
    if (first && value.is_object() && value.contains("manifest")) {
      first = false;
      continue;
    }
    first = false;
    rows.push_back({line_no, std::move(value)});
  }
  return rows;
}

}  // namespace

std::vector<JsonlRow> read_jsonl(const std::filesystem::path& path) {
  return read_impl(path, nullptr);
}

std::vector<JsonlRow> read_jsonl_lenient(
    const std::filesystem::path& path,
    const std::function<void(std::size_t, const std::string&)>& on_error) {
  return read_impl(path, &on_error);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << content;
  if (!out) throw RuntimeFailure("write failed for " + path.string());
}

}  // namespace naudit
