#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "refine/attention.hpp"
#include "refine/attention_io.hpp"
#include "refine/heatmap.hpp"
#include "refine/report.hpp"

namespace refine::cli {

namespace {

using namespace refine::attn;

ReductionOrder parse_order(const std::string& s) {
  return s == "heads-layers" ? ReductionOrder::heads_then_layers : ReductionOrder::layers_then_heads;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << dump_report(j);
}

}  // namespace

void add_attn_command(CLI::App& app) {
  auto* attn = app.add_subcommand("attn", "Attention pooling, clamping, comparison and heatmaps");
  attn->require_subcommand(1);

  {
    struct Args {
      std::string dump, pair, out, order = "layers-heads";
      std::uint32_t k = 3, l = 0;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = attn->add_subcommand("pool", "Top-k mean pool a dump onto the 24x24 grid");
    cmd->add_option("--dump", a->dump, "ATTN dump file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--k", a->k, "top-k over layers and over heads")->capture_default_str();
    auto* l = cmd->add_option("--l", a->l, "top-l over tokens");
    cmd->add_option("--pair", a->pair, "other dump of the same instance; l = shorter output")
        ->check(CLI::ExistingFile)
        ->excludes(l);
    cmd->add_option("--order", a->order, "layers-heads | heads-layers")
        ->capture_default_str()
        ->check(CLI::IsMember({"layers-heads", "heads-layers"}));
    cmd->add_option("--out", a->out, "pooled map JSON")->required();
    cmd->callback([a] {
      const auto dump = read_dump(a->dump);
      std::uint32_t l = a->l;
      if (!a->pair.empty()) l = choose_l(dump, read_dump(a->pair));
      if (l == 0) l = dump.dims.tokens;
      const auto map = pool(dump, PoolOptions{a->k, a->k, parse_order(a->order)}, l);
      write_pooled_map(a->out, map);
      std::cerr << "pooled " << a->dump << " (k=" << a->k << ", l=" << l << ") -> " << a->out << "\n";
    });
  }
  {
    struct Args {
      std::string map, out;
      double q = 0.995;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = attn->add_subcommand("clamp", "Raise values at or above the q-quantile to the map maximum");
    cmd->add_option("--map", a->map, "pooled map JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--q", a->q, "quantile")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--out", a->out, "clamped map JSON")->required();
    cmd->callback([a] { write_pooled_map(a->out, quantile_clamp(read_pooled_map(a->map), a->q)); });
  }
  {
    struct Args {
      std::string initial, feedback, out;
      double tau = 0.0;
      std::size_t top = 5;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = attn->add_subcommand("compare", "Mean attention and coverage of initial vs feedback maps");
    cmd->add_option("--initial", a->initial, "pooled map of the initial response")->required()->check(CLI::ExistingFile);
    cmd->add_option("--feedback", a->feedback, "pooled map of the feedback")->required()->check(CLI::ExistingFile);
    cmd->add_option("--tau", a->tau, "coverage threshold on raw map values")->required();
    cmd->add_option("--top", a->top, "number of top cells to list")->capture_default_str();
    cmd->add_option("--out", a->out, "stats JSON")->required();
    cmd->callback([a] {
      const auto [init, fb] = compare_maps(read_pooled_map(a->initial), read_pooled_map(a->feedback), a->tau, a->top);
      write_json(a->out, json{{"tau", a->tau}, {"initial", to_json(init)}, {"feedback", to_json(fb)}});
    });
  }
  {
    struct Args {
      std::string map, out, underlay;
      double opacity = 0.6;
      double clamp_q = 0.0;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = attn->add_subcommand("render", "Render a pooled map as a 336x336 PNG heatmap");
    cmd->add_option("--map", a->map, "pooled map JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a->out, "PNG output")->required();
    cmd->add_option("--underlay", a->underlay, "PNG image to blend under the heatmap")->check(CLI::ExistingFile);
    cmd->add_option("--opacity", a->opacity, "heatmap opacity over the underlay")->capture_default_str();
    cmd->add_option("--clamp", a->clamp_q, "apply quantile clamp first (e.g. 0.995)");
    cmd->callback([a] {
      auto map = read_pooled_map(a->map);
      if (a->clamp_q > 0.0) map = quantile_clamp(map, a->clamp_q);
      std::optional<std::filesystem::path> underlay;
      if (!a->underlay.empty()) underlay = a->underlay;
      render_heatmap(map, a->out, underlay, HeatmapOptions{a->opacity});
    });
  }
  {
    struct Args {
      std::vector<std::string> maps;
      std::string out;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = attn->add_subcommand("aggregate", "Average pooled maps across instances");
    cmd->add_option("--maps", a->maps, "pooled map JSON files")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a->out, "averaged map JSON")->required();
    cmd->callback([a] {
      std::vector<PooledMap> maps;
      for (const auto& p : a->maps) maps.push_back(read_pooled_map(p));
      write_pooled_map(a->out, average_maps(maps));
    });
  }
  {
    struct Args {
      std::string dump, out;
      std::uint32_t k = 3;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = attn->add_subcommand("saliency", "Rank output tokens by attention to image features");
    cmd->add_option("--dump", a->dump, "ATTN dump file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--k", a->k, "top-k over layers and over heads")->capture_default_str();
    cmd->add_option("--out", a->out, "saliency JSON")->required();
    cmd->callback([a] {
      const auto dump = read_dump(a->dump);
      write_json(a->out, to_json(token_saliency(dump, a->k), dump.tokens));
    });
  }
}

}  // namespace refine::cli
