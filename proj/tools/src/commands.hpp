#pragma once

// Per-subcommand settings and their runners. Parsing lives in schema.cpp,
// execution in commands.cpp.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lutdla/cli/cli.hpp"
#include "lutdla/cli/config.hpp"
#include "lutdla/dataflow.hpp"
#include "lutdla/dse.hpp"
#include "lutdla/sim.hpp"
#include "lutdla/train.hpp"

namespace lutdla::cli {

struct Context {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  bool verbose = false;
  Provenance provenance;
  std::ostream* out = nullptr;
  std::ostream* log = nullptr;  ///< verbose progress; same stream as err
};

struct DataCfg {
  std::string name = "two_moons";  ///< two_moons | glyphs
  std::size_t train_size = 400;
  std::size_t val_size = 400;
  double noise = 0.15;
};

struct ConvertCfg {
  std::string model;  ///< dense checkpoint; empty means pretrain one
  DataCfg data;
  PipelineConfig pipeline;
};

struct AmmCfg {
  std::string a, b;   ///< matrix files; both empty means draw Gaussian operands
  ProblemShape generate{64, 64, 64};
  std::string codebook;  ///< use instead of fitting on A
  VQConfig vq;
  std::size_t tile_n = 0;
  std::size_t kmeans_iterations = 100;
  std::string output = "C.csv";
  std::vector<std::size_t> sweep_c;
};

struct EncodeCfg {
  std::string input;
  std::string codebook;
  VQConfig vq;
  std::size_t kmeans_iterations = 100;
  std::string output = "indices.csv";
};

struct SimulateCfg {
  ProblemShape shape{512, 768, 768};
  VQConfig vq{4, 32, Metric::L2, DistPrecision::FP32, LutPrecision::INT8};
  HwConfig hw;
  std::uint64_t max_cycles = 2'000'000'000ULL;
  bool trace = false;
  bool functional = false;
  LoadTerm load = LoadTerm::Total;
};

struct DataflowCfg {
  ProblemShape shape{512, 768, 768};
  VQConfig vq{4, 32};
  TileConfig tile;
  BitWidths widths;
  IndexPolicy policy = IndexPolicy::Streaming;
  std::vector<DataflowKind> kinds;
};

struct DseCfg {
  ProblemShape shape{512, 768, 768};
  SearchSpace space;
  Constraints constraints;
  std::string cost_tables;
  SearchOptions options;
  bool probe = false;
  std::size_t probe_budget = 40;
  DataCfg probe_data{"two_moons", 200, 200, 0.15};
  PipelineConfig probe_base;
  std::size_t top = 10;  ///< designs listed in the text summary
};

struct AllCfg {
  ConvertCfg convert;
  AmmCfg amm;
  EncodeCfg encode;
  SimulateCfg simulate;
  DataflowCfg dataflow;
  DseCfg dse;
};

/// Reads every section so unknown keys anywhere in the file are caught.
AllCfg parse_all(Config& config);

int cmd_convert(const ConvertCfg& cfg, const Context& ctx);
int cmd_amm(const AmmCfg& cfg, const Context& ctx);
int cmd_encode(const EncodeCfg& cfg, const Context& ctx);
int cmd_simulate(const SimulateCfg& cfg, const Context& ctx);
int cmd_dataflow(const DataflowCfg& cfg, const Context& ctx);
int cmd_dse(const DseCfg& cfg, const Context& ctx);

}  // namespace lutdla::cli
