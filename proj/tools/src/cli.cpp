#include "lutdla/cli/cli.hpp"

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "commands.hpp"

#ifndef LUTDLA_VERSION
#define LUTDLA_VERSION "0.0.0"
#endif

namespace lutdla::cli {
namespace fs = std::filesystem;

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput:
    case ErrorKind::Configuration:
    case ErrorKind::Corruption:
      return kExitInvalid;
    case ErrorKind::Infeasible:
      return kExitInfeasible;
    case ErrorKind::Divergence:
    case ErrorKind::Deadlock:
      break;
  }
  return kExitInternal;
}

std::string_view version() noexcept { return LUTDLA_VERSION; }

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

nlohmann::json Provenance::to_json() const {
  return {{"tool", "lutdla"},
          {"version", std::string(version())},
          {"command", command},
          {"config_hash", "fnv1a64:" + hex64(config_hash)},
          {"seed", seed}};
}

std::string Provenance::csv_comment() const {
  return "# lutdla " + std::string(version()) + " command=" + command + " config_hash=fnv1a64:" +
         hex64(config_hash) + " seed=" + std::to_string(seed);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LUT-based accelerator toolkit: train, encode, multiply, simulate, search", "lutdla"};
  app.set_version_flag("--version", std::string(version()));
  std::string config_path, out_dir;
  std::uint64_t seed_flag = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "YAML config with one section per subcommand");
  auto* seed_opt = app.add_option("--seed", seed_flag, "overrides the config seed");
  app.add_option("--out", out_dir, "output directory (default: config 'out' or lutdla-out)");
  app.add_flag("-v,--verbose", verbose, "progress on stderr");
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string model, a_path, b_path, input, codebook;
  auto* convert = app.add_subcommand("convert", "pretrain or load a dense net, convert to LUT layers, fine-tune");
  convert->add_option("--model", model, "dense checkpoint to convert");
  auto* amm = app.add_subcommand("amm", "approximate C = A*B through encode, LUT build and lookup");
  amm->add_option("a", a_path, "left operand (CSV or container)");
  amm->add_option("b", b_path, "right operand (CSV or container)");
  amm->add_option("--codebook", codebook, "codebook container; fitted on A when absent");
  auto* enc = app.add_subcommand("encode", "encode a matrix into centroid indices");
  enc->add_option("input", input, "matrix to encode (CSV or container)");
  enc->add_option("--codebook", codebook, "codebook container; fitted on the input when absent");
  app.add_subcommand("simulate", "cycle-level run of the CCM/IMM datapath");
  app.add_subcommand("dataflow", "on-chip memory footprint per dataflow");
  app.add_subcommand("dse", "co-design search over (v, c, precision, parallelism)");

  std::vector<std::string> argv_store{"lutdla"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    Config config = config_path.empty() ? Config() : Config::load(config_path);
    Section& root = config.root();
    const std::uint64_t config_seed = root.u64("seed", 0);
    const std::string config_out = root.text("out", "lutdla-out");
    AllCfg all = parse_all(config);
    config.check_unknown();

    std::string command;
    nlohmann::json section;
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    section = config.effective().at(command);
    if (!model.empty()) section["model"] = all.convert.model = model;
    if (!a_path.empty()) section["a"] = all.amm.a = a_path;
    if (!b_path.empty()) section["b"] = all.amm.b = b_path;
    if (!input.empty()) section["input"] = all.encode.input = input;
    if (!codebook.empty()) section["codebook"] = all.amm.codebook = all.encode.codebook = codebook;

    Context ctx;
    ctx.seed = seed_opt->count() ? seed_flag : config_seed;
    ctx.out_dir = out_dir.empty() ? fs::path(config_out) : fs::path(out_dir);
    ctx.verbose = verbose;
    ctx.out = &out;
    ctx.log = &err;
    const nlohmann::json hashed{{"command", command}, {"seed", ctx.seed}, {"config", section}};
    ctx.provenance = Provenance{command, fnv1a(hashed.dump()), ctx.seed};
    fs::create_directories(ctx.out_dir);

    if (command == "convert") return cmd_convert(all.convert, ctx);
    if (command == "amm") return cmd_amm(all.amm, ctx);
    if (command == "encode") return cmd_encode(all.encode, ctx);
    if (command == "simulate") return cmd_simulate(all.simulate, ctx);
    if (command == "dataflow") return cmd_dataflow(all.dataflow, ctx);
    if (command == "dse") return cmd_dse(all.dse, ctx);
    err << "lutdla: unknown command " << command << '\n';
    return kExitInvalid;
  } catch (const Error& e) {
    err << "lutdla: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "lutdla: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "lutdla: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace lutdla::cli
