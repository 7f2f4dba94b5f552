#pragma once
// JSON forms of the knowledge base and findings, plus content hashing.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dxr/kb.hpp"

namespace dxr {

using json = nlohmann::json;

json kb_to_json(const KnowledgeBase& kb);
/// Throws ParseError naming the offending field path.
KnowledgeBase kb_from_json(const json& j);

/// Canonical text: canonicalized KB, sorted keys, shortest round-trip floats.
std::string dump_kb(const KnowledgeBase& kb);

/// Parses and validates. Throws ParseError (with line context) or ValidationError.
KnowledgeBase load_kb(const std::filesystem::path& path);
KnowledgeBase parse_kb(std::string_view text);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

json findings_to_json(const Findings& f);
Findings findings_from_json(const json& j);
Findings load_findings(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);
std::string kb_hash(const KnowledgeBase& kb);
std::string findings_hash(const Findings& f);

/// Parses text as JSON, converting parser failures into ParseError with a
/// line number.
json parse_json_text(std::string_view text, std::string_view what);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace dxr
