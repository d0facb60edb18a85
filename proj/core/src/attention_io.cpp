#include "refine/attention_io.hpp"

#include <bit>
#include <limits>
#include <cstring>
#include <fstream>
#include <iterator>

namespace refine::attn {

namespace {

using nlohmann::json;

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

constexpr std::size_t kHeaderSize = 4 + 2 + 4 * 4;

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::string_view in, std::size_t pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw AttentionError(AttentionError::Kind::io, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw AttentionError(AttentionError::Kind::io, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw AttentionError(AttentionError::Kind::io, "write failed: " + p.string());
}

}  // namespace

std::string encode_dump(const AttentionDump& dump) {
  if (dump.weights.size() != dump.dims.count()) {
    throw AttentionError(AttentionError::Kind::dimension, "encode_dump: weight count does not match dims");
  }
  std::string out;
  out.reserve(kHeaderSize + dump.weights.size() * 4);
  out += "ATTN";
  put_le<std::uint16_t>(out, kDumpVersion);
  put_le<std::uint32_t>(out, dump.dims.layers);
  put_le<std::uint32_t>(out, dump.dims.heads);
  put_le<std::uint32_t>(out, dump.dims.tokens);
  put_le<std::uint32_t>(out, dump.dims.features);
  for (float w : dump.weights) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(w));
  return out;
}

AttentionDump decode_dump(std::string_view bytes) {
  if (bytes.size() < kHeaderSize || bytes.substr(0, 4) != "ATTN") {
    throw AttentionError(AttentionError::Kind::format, "not an ATTN dump (bad magic or truncated header)");
  }
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kDumpVersion) {
    throw AttentionError(AttentionError::Kind::format, "unsupported ATTN version " + std::to_string(version));
  }
  AttentionDump d;
  d.dims.layers = get_le<std::uint32_t>(bytes, 6);
  d.dims.heads = get_le<std::uint32_t>(bytes, 10);
  d.dims.tokens = get_le<std::uint32_t>(bytes, 14);
  d.dims.features = get_le<std::uint32_t>(bytes, 18);
  const auto n = d.dims.count();
  if (bytes.size() != kHeaderSize + n * 4) {
    throw AttentionError(AttentionError::Kind::format, "ATTN payload size " + std::to_string(bytes.size() - kHeaderSize) +
                                                           " does not match dims (" + std::to_string(n * 4) + ")");
  }
  d.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.weights[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kHeaderSize + i * 4));
  }
  return d;
}

std::filesystem::path sidecar_path(const std::filesystem::path& dump_path) {
  auto p = dump_path;
  p.replace_extension(".tokens.json");
  return p;
}

std::string_view to_string(DumpLabel l) { return l == DumpLabel::initial ? "initial" : "feedback"; }

DumpLabel parse_dump_label(std::string_view s) {
  if (s == "initial") return DumpLabel::initial;
  if (s == "feedback") return DumpLabel::feedback;
  throw AttentionError(AttentionError::Kind::format, "unknown dump label '" + std::string(s) + "'");
}

void write_dump(const std::filesystem::path& path, const AttentionDump& dump) {
  write_all(path, encode_dump(dump));
  const json side{{"tokens", dump.tokens}, {"label", to_string(dump.label)}};
  write_all(sidecar_path(path), side.dump(2) + "\n");
}

AttentionDump read_dump(const std::filesystem::path& path) {
  auto d = decode_dump(read_all(path));
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    const auto j = json::parse(read_all(side));
    d.tokens = j.value("tokens", std::vector<std::string>{});
    d.label = parse_dump_label(j.value("label", std::string("initial")));
  }
  d.validate();
  return d;
}

nlohmann::json to_json(const PooledMap& m) {
  return json{{"grid", m.grid}, {"k_layers", m.k_layers}, {"k_heads", m.k_heads}, {"l_tokens", m.l_tokens}};
}

PooledMap pooled_map_from_json(const nlohmann::json& j) {
  PooledMap m;
  m.grid = j.at("grid").get<std::vector<double>>();
  m.k_layers = j.value("k_layers", 0u);
  m.k_heads = j.value("k_heads", 0u);
  m.l_tokens = j.value("l_tokens", 0u);
  m.validate();
  return m;
}

void write_pooled_map(const std::filesystem::path& path, const PooledMap& m) {
  write_all(path, to_json(m).dump() + "\n");
}

PooledMap read_pooled_map(const std::filesystem::path& path) {
  return pooled_map_from_json(json::parse(read_all(path)));
}

nlohmann::json to_json(const CoverageStats& s) {
  json cells = json::array();
  for (const auto& c : s.top_cells) cells.push_back({{"row", c.row}, {"col", c.col}, {"value", c.value}});
  return json{{"mean_attention", s.mean_attention}, {"coverage_at_tau", s.coverage_at_tau}, {"top_cells", cells}};
}

nlohmann::json to_json(std::span<const TokenSaliency> s, const std::vector<std::string>& tokens) {
  json out = json::array();
  for (const auto& t : s) {
    json e{{"token_index", t.token_index}, {"saliency", t.saliency}};
    if (t.token_index < tokens.size()) e["token"] = tokens[t.token_index];
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace refine::attn
