#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine/attention.hpp"

namespace refine::attn {

// Binary layout, little-endian:
//   "ATTN" | u16 version | u32 L | u32 H | u32 T | u32 F | L*H*T*F f32
// in [layer][head][token][feature] order.
inline constexpr std::uint16_t kDumpVersion = 1;

std::string encode_dump(const AttentionDump& dump);
// Parses the binary part only; tokens and label are left empty/default.
AttentionDump decode_dump(std::string_view bytes);

// `<dir>/<stem>.tokens.json` next to the dump.
std::filesystem::path sidecar_path(const std::filesystem::path& dump_path);

// Writes the dump and its sidecar.
void write_dump(const std::filesystem::path& path, const AttentionDump& dump);
// Reads the dump; the sidecar is optional (tokens stay empty without it).
AttentionDump read_dump(const std::filesystem::path& path);

std::string_view to_string(DumpLabel l);
DumpLabel parse_dump_label(std::string_view s);

nlohmann::json to_json(const PooledMap& m);
PooledMap pooled_map_from_json(const nlohmann::json& j);
void write_pooled_map(const std::filesystem::path& path, const PooledMap& m);
PooledMap read_pooled_map(const std::filesystem::path& path);

nlohmann::json to_json(const CoverageStats& s);
nlohmann::json to_json(std::span<const TokenSaliency> s, const std::vector<std::string>& tokens);

}  // namespace refine::attn
