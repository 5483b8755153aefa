#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <variant>

#include "lutdla/rng.hpp"
#include "lutdla/serialize.hpp"
#include "lutdla/toy_data.hpp"

namespace lutdla::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  return f;
}

void write_json(const Context& ctx, const fs::path& path, json body) {
  body["provenance"] = ctx.provenance.to_json();
  std::ofstream f = open_out(path);
  f << body.dump(2) << '\n';
}

template <class Writer>
void write_csv(const Context& ctx, const fs::path& path, Writer&& writer) {
  std::ofstream f = open_out(path);
  f << ctx.provenance.csv_comment() << '\n';
  f << std::setprecision(17);
  writer(f);
}

void log(const Context& ctx, const std::string& line) {
  if (ctx.verbose && ctx.log) *ctx.log << "[lutdla] " << line << '\n';
}

json vq_json(const VQConfig& vq) {
  return {{"v", vq.v},
          {"c", vq.c},
          {"metric", to_string(vq.metric)},
          {"dist_precision", to_string(vq.dist_precision)},
          {"lut_precision", to_string(vq.lut_precision)}};
}

json shape_json(const ProblemShape& s) { return {{"M", s.M}, {"K", s.K}, {"N", s.N}}; }

json error_json(const AmmError& e) {
  return {{"frobenius_rel", e.zero_norm ? json(nullptr) : json(e.frobenius_rel)},
          {"frobenius_abs", e.frobenius_abs},
          {"max_abs", e.max_abs}};
}

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

/// CSV gets the provenance comment; anything else is the binary container.
void save_matrix_out(const Context& ctx, const fs::path& path, const Matrix& m) {
  if (path.extension() == ".csv") write_csv(ctx, path, [&](std::ostream& o) { write_matrix_csv(o, m); });
  else save_matrix_bin(path, m);
}

Dataset make_data(const DataCfg& d, std::size_t n, std::uint64_t seed) {
  return d.name == "glyphs" ? glyphs8x8(n, d.noise, seed) : two_moons(n, d.noise, seed);
}

double last_or_nan(const std::vector<double>& xs) { return xs.empty() ? std::nan("") : xs.back(); }

json stage_json(const StageReport& r) {
  return {{"iterations", r.task_loss.size()},
          {"final_task_loss", last_or_nan(r.task_loss)},
          {"final_re_loss", last_or_nan(r.re_loss)},
          {"final_val_accuracy", last_or_nan(r.val_accuracy)}};
}

/// Largest absolute centroid change between two nets of the same layout.
double centroid_shift(const TinyNet& a, const TinyNet& b) {
  double shift = 0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto* x = std::get_if<LutLinear>(&a.layers[l]);
    const auto* y = std::get_if<LutLinear>(&b.layers[l]);
    if (!x || !y) continue;
    for (std::size_t k = 0; k < x->codebook.centroids.size(); ++k) {
      const auto& p = x->codebook.centroids[k].data();
      const auto& q = y->codebook.centroids[k].data();
      for (std::size_t i = 0; i < p.size(); ++i) shift = std::max(shift, std::abs(p[i] - q[i]));
    }
  }
  return shift;
}

std::string fixed(double x, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

}  // namespace

int cmd_convert(const ConvertCfg& cfg, const Context& ctx) {
  PipelineConfig pc = cfg.pipeline;
  pc.seed = ctx.seed;
  const Dataset train = make_data(cfg.data, cfg.data.train_size, mix_seed(ctx.seed, 101));
  const Dataset val = make_data(cfg.data, cfg.data.val_size, mix_seed(ctx.seed, 102));
  log(ctx, "convert: " + cfg.data.name + " " + std::to_string(train.size()) + "/" + std::to_string(val.size()));

  json outputs = json::array();
  PipelineResult res;
  if (cfg.model.empty()) {
    log(ctx, "convert: pretraining dense model");
    StageReport pre;
    const TinyNet dense = pretrain_dense(train, val, pc, &pre);
    res = convert_and_train(dense, train, val, pc);
    res.pretrain = std::move(pre);
    save_checkpoint(ctx.out_dir / "dense.ckpt", res.dense);
    write_csv(ctx, ctx.out_dir / "pretrain.csv", [&](std::ostream& o) { write_stage_csv(o, res.pretrain); });
    outputs.push_back("dense.ckpt");
    outputs.push_back("pretrain.csv");
  } else {
    const TinyNet dense = load_checkpoint(cfg.model);
    require(dense.input_dim() == train.x.cols(),
            "convert: model expects " + std::to_string(dense.input_dim()) + " inputs, dataset has " +
                std::to_string(train.x.cols()));
    std::size_t classes = 0;
    for (std::size_t l : train.labels) classes = std::max(classes, l + 1);
    require(dense.output_dim() >= classes, "convert: model has fewer outputs than the dataset has classes");
    res = convert_and_train(dense, train, val, pc);
  }
  log(ctx, "convert: training done");

  save_checkpoint(ctx.out_dir / "converted.ckpt", res.converted);
  save_checkpoint(ctx.out_dir / "model.ckpt", res.trained);
  outputs.push_back("converted.ckpt");
  outputs.push_back("model.ckpt");
  if (pc.multistage) {
    write_csv(ctx, ctx.out_dir / "centroid_stage.csv", [&](std::ostream& o) { write_stage_csv(o, res.centroid_stage); });
    outputs.push_back("centroid_stage.csv");
  }
  write_csv(ctx, ctx.out_dir / "joint_stage.csv", [&](std::ostream& o) { write_stage_csv(o, res.joint_stage); });
  outputs.push_back("joint_stage.csv");

  json summary;
  summary["dataset"] = {{"name", cfg.data.name},
                        {"train_size", cfg.data.train_size},
                        {"val_size", cfg.data.val_size},
                        {"noise", cfg.data.noise}};
  summary["vq"] = vq_json(pc.vq);
  summary["multistage"] = pc.multistage;
  summary["accuracy"] = {{"dense", res.dense_accuracy},
                         {"converted", res.converted_accuracy},
                         {"final", res.final_accuracy}};
  summary["parameters"] = {{"total", res.trained.num_parameters()},
                           {"centroids", res.trained.num_centroid_parameters()}};
  summary["centroid_shift"] = {{"centroid_stage", centroid_shift(res.converted, res.after_centroid_stage)},
                               {"joint_stage", centroid_shift(res.after_centroid_stage, res.trained)}};
  summary["stages"] = {{"centroid_stage", stage_json(res.centroid_stage)}, {"joint_stage", stage_json(res.joint_stage)}};
  if (cfg.model.empty()) summary["stages"]["pretrain"] = stage_json(res.pretrain);
  summary["outputs"] = outputs;
  write_json(ctx, ctx.out_dir / "convert_summary.json", summary);

  *ctx.out << "convert: accuracy dense " << fixed(res.dense_accuracy, 4) << ", converted "
           << fixed(res.converted_accuracy, 4) << ", final " << fixed(res.final_accuracy, 4) << '\n';
  return kExitOk;
}

int cmd_amm(const AmmCfg& cfg, const Context& ctx) {
  require(cfg.a.empty() == cfg.b.empty(), "amm: give both operand files or neither");
  Matrix a, b;
  if (cfg.a.empty()) {
    Rng rng(mix_seed(ctx.seed, 11));
    a = gaussian(cfg.generate.M, cfg.generate.K, rng);
    b = gaussian(cfg.generate.K, cfg.generate.N, rng);
  } else {
    a = load_matrix(cfg.a);
    b = load_matrix(cfg.b);
  }
  require(!a.empty() && !b.empty(), "amm: empty operand");
  require(a.cols() == b.rows(), "amm: shape mismatch, A is " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " but B is " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
  const ProblemShape shape{a.rows(), a.cols(), b.cols()};
  log(ctx, "amm: " + std::to_string(shape.M) + "x" + std::to_string(shape.K) + "x" + std::to_string(shape.N));

  Codebook cb;
  if (cfg.codebook.empty()) {
    cb = fit_codebook(a, cfg.vq, mix_seed(ctx.seed, 12), cfg.kmeans_iterations);
  } else {
    cb = load_codebook_bin(cfg.codebook);
    require(cb.K == shape.K && cb.v == cfg.vq.v, "amm: codebook does not match K or v");
  }
  const EncodedMatrix enc = encode(a, cb, cfg.vq.metric, cfg.vq.dist_precision);
  const PSumTable table = build_lut(cb, b, cfg.vq.lut_precision, cfg.tile_n);
  const Matrix approx = lut_gemm(enc, table);
  const AmmError err = compare_products(approx, exact_gemm(a, b));

  save_matrix_out(ctx, ctx.out_dir / cfg.output, approx);
  save_codebook_bin(ctx.out_dir / "codebook.bin", cb);

  const TauTerms t = tau(shape, cfg.vq);
  const PhiTerms p = phi(shape, cfg.vq, lut_entry_bits(cfg.vq.lut_precision), 16);
  json report;
  report["shape"] = shape_json(shape);
  report["vq"] = vq_json(cfg.vq);
  report["error"] = error_json(err);
  report["tau"] = {{"op_sim", t.op_sim}, {"op_add", t.op_add}, {"total", t.total}, {"ratio_to_dense", t.total / dense_ops(shape)}};
  report["phi_bits"] = {{"mem_lut", p.mem_lut},
                        {"mem_out", p.mem_out},
                        {"mem_in", p.mem_in},
                        {"total", p.total},
                        {"ratio_to_dense", p.total / dense_bits(shape, 16)}};
  report["sweep"] = json::array();
  for (std::size_t c : cfg.sweep_c) {
    VQConfig vq = cfg.vq;
    vq.c = c;
    const Codebook sweep_cb = fit_codebook(a, vq, mix_seed(ctx.seed, 12), cfg.kmeans_iterations);
    json row = error_json(amm_error(a, b, vq, sweep_cb));
    row["c"] = c;
    report["sweep"].push_back(row);
    log(ctx, "amm: sweep c=" + std::to_string(c));
  }
  report["outputs"] = {cfg.output, "codebook.bin"};
  write_json(ctx, ctx.out_dir / "amm_report.json", report);

  *ctx.out << "amm: frobenius_rel " << (err.zero_norm ? std::string("n/a") : std::to_string(err.frobenius_rel))
           << ", max_abs " << err.max_abs << ", tau/dense " << t.total / dense_ops(shape) << '\n';
  return kExitOk;
}

int cmd_encode(const EncodeCfg& cfg, const Context& ctx) {
  require(!cfg.input.empty(), "encode: no input matrix given");
  const Matrix a = load_matrix(cfg.input);
  require(!a.empty(), "encode: empty input");
  Codebook cb;
  if (cfg.codebook.empty()) {
    cb = fit_codebook(a, cfg.vq, mix_seed(ctx.seed, 12), cfg.kmeans_iterations);
  } else {
    cb = load_codebook_bin(cfg.codebook);
    require(cb.K == a.cols(), "encode: codebook was built for K=" + std::to_string(cb.K) + ", input has " +
                                  std::to_string(a.cols()) + " columns");
  }
  const EncodedMatrix enc = encode(a, cb, cfg.vq.metric, cfg.vq.dist_precision);
  write_csv(ctx, ctx.out_dir / cfg.output, [&](std::ostream& o) {
    for (std::size_t m = 0; m < enc.rows; ++m) {
      for (std::size_t k = 0; k < enc.subspaces; ++k) o << (k ? "," : "") << enc.at(m, k);
      o << '\n';
    }
  });
  save_codebook_bin(ctx.out_dir / "codebook.bin", cb);

  const AmmError rec = compare_products(decode(enc, cb), a);
  json report;
  report["rows"] = enc.rows;
  report["K"] = a.cols();
  report["v"] = cb.v;
  report["c"] = cb.c();
  report["subspaces"] = enc.subspaces;
  report["index_bits"] = index_bits(cb.c());
  report["bits_per_element"] = static_cast<double>(index_bits(cb.c())) / static_cast<double>(cb.v);
  report["reconstruction"] = error_json(rec);
  report["outputs"] = {cfg.output, "codebook.bin"};
  write_json(ctx, ctx.out_dir / "encode_report.json", report);

  *ctx.out << "encode: " << enc.rows << " rows x " << enc.subspaces << " subspaces, reconstruction frobenius_rel "
           << (rec.zero_norm ? std::string("n/a") : std::to_string(rec.frobenius_rel)) << '\n';
  return kExitOk;
}

int cmd_simulate(const SimulateCfg& cfg, const Context& ctx) {
  SimOptions opt;
  opt.max_cycles = cfg.max_cycles;
  std::ofstream trace;
  if (cfg.trace) {
    trace = open_out(ctx.out_dir / "sim_trace.jsonl");
    trace << json{{"provenance", ctx.provenance.to_json()}}.dump() << '\n';
    opt.trace = &trace;
  }
  Matrix a, b;
  Codebook cb;
  if (cfg.functional) {
    Rng rng(mix_seed(ctx.seed, 21));
    a = gaussian(cfg.shape.M, cfg.shape.K, rng);
    b = gaussian(cfg.shape.K, cfg.shape.N, rng);
    cb = fit_codebook(a, cfg.vq, mix_seed(ctx.seed, 22));
    opt.a = &a;
    opt.b = &b;
    opt.codebook = &cb;
  }
  log(ctx, "simulate: running");
  const SimTrace t = simulate(cfg.shape, cfg.vq, cfg.hw, opt);
  const SteadyStateReport ss = steady_state_check(t, cfg.hw, cfg.shape, cfg.vq, cfg.load);

  const std::size_t lanes = std::min(cfg.hw.lut_banks, cfg.hw.tile.T_n);
  const double lookups = double(cfg.shape.M) * double(cfg.vq.num_subspaces(cfg.shape.K)) * double(cfg.shape.N);
  const double lower = std::ceil(lookups / double(cfg.hw.n_IMM * lanes));

  json report;
  report["shape"] = shape_json(cfg.shape);
  report["vq"] = vq_json(cfg.vq);
  const HwConfig& hw = cfg.hw;
  report["hw"] = {{"n_CCU", hw.n_CCU},       {"dpes", hw.dpes},
                  {"n_IMM", hw.n_IMM},       {"lut_banks", hw.lut_banks},
                  {"fifo_depth", hw.fifo_depth}, {"fifo_sync", hw.fifo_sync},
                  {"ccm_freq", hw.ccm_freq}, {"imm_freq", hw.imm_freq},
                  {"beta", std::isinf(hw.beta) ? json("inf") : json(hw.beta)},
                  {"T_n", hw.tile.T_n},      {"M_tile", hw.tile.M_tile},
                  {"swap_penalty", hw.swap_penalty}, {"overlap_drain", hw.overlap_drain}};
  report["trace"] = to_json(t);
  report["lane_lower_bound"] = lower;
  report["model"] = {{"load", ss.model.load},
                     {"sim", ss.model.sim},
                     {"lut", ss.model.lut},
                     {"omega", ss.model.value},
                     {"binding", to_string(ss.model.binding)},
                     {"relative_error", ss.relative_error},
                     {"binding_agrees", ss.binding_agrees}};
  if (cfg.functional) {
    const Matrix ref = ls_execute(a, b, cfg.vq, cb, cfg.hw.tile);
    report["functional_match"] = (t.output == ref);
  }
  json outputs = json::array({"sim.json"});
  if (cfg.trace) outputs.push_back("sim_trace.jsonl");
  report["outputs"] = outputs;
  write_json(ctx, ctx.out_dir / "sim.json", report);

  *ctx.out << "simulate: " << t.total_cycles << " cycles (" << fixed(double(t.total_cycles) / 1000.0, 1)
           << "k), lane bound " << fixed(lower / 1000.0, 1) << "k, dominant " << to_string(t.dominant)
           << ", omega " << fixed(ss.model.value / 1000.0, 1) << "k (" << to_string(ss.model.binding) << ")\n";
  return kExitOk;
}

int cmd_dataflow(const DataflowCfg& cfg, const Context& ctx) {
  std::vector<FootprintRow> rows;
  for (DataflowKind k : cfg.kinds)
    rows.push_back(FootprintRow{k, cfg.shape, cfg.vq, cfg.tile, cfg.widths,
                                footprint(k, cfg.shape, cfg.vq, cfg.tile, cfg.widths, cfg.policy)});
  write_csv(ctx, ctx.out_dir / "footprint.csv", [&](std::ostream& o) { write_footprint_csv(o, rows); });

  json report;
  report["shape"] = shape_json(cfg.shape);
  report["vq"] = vq_json(cfg.vq);
  report["tile"] = {{"T_n", cfg.tile.T_n}, {"M_tile", cfg.tile.M_tile}};
  report["widths"] = {{"bit_lut", cfg.widths.bit_lut},
                      {"bit_idx", cfg.widths.bit_idx},
                      {"bit_psum", cfg.widths.bit_psum},
                      {"bit_out", cfg.widths.bit_out}};
  report["index_policy"] = cfg.policy == IndexPolicy::Streaming ? "streaming" : "cache_all";
  report["footprints_kib"] = json::object();
  for (const FootprintRow& r : rows) {
    report["footprints_kib"][std::string(to_string(r.kind))] = {
        {"scratchpad", MemoryFootprint::kib(r.fp.scratchpad_bits)},
        {"indices", MemoryFootprint::kib(r.fp.indices_bits)},
        {"psumlut", MemoryFootprint::kib(r.fp.psumlut_bits)},
        {"total", MemoryFootprint::kib(r.fp.total_bits)},
        {"psumlut_ping_pong", r.fp.psumlut_ping_pong}};
    *ctx.out << "dataflow: " << std::left << std::setw(4) << to_string(r.kind) << std::right << " total "
             << fixed(MemoryFootprint::kib(r.fp.total_bits), 2) << " KB\n";
  }
  report["outputs"] = {"footprint.csv"};
  write_json(ctx, ctx.out_dir / "dataflow.json", report);
  return kExitOk;
}

int cmd_dse(const DseCfg& cfg, const Context& ctx) {
  const CostTables tables = cfg.cost_tables.empty() ? CostTables::defaults() : load_cost_tables(cfg.cost_tables);
  AccuracyProbe probe;
  if (cfg.probe) {
    log(ctx, "dse: pretraining the toy accuracy probe");
    PipelineConfig base = cfg.probe_base;
    base.seed = ctx.seed;
    const Dataset train = make_data(cfg.probe_data, cfg.probe_data.train_size, mix_seed(ctx.seed, 101));
    const Dataset val = make_data(cfg.probe_data, cfg.probe_data.val_size, mix_seed(ctx.seed, 102));
    probe = make_toy_probe(train, val, cfg.probe_budget, base);
  }
  log(ctx, "dse: searching " + std::to_string(cfg.space.size()) + " points");
  const SearchResult r = search(cfg.shape, cfg.space, cfg.constraints, tables, probe, cfg.options);

  json report = to_json(r);
  report["shape"] = shape_json(cfg.shape);
  report["space_size"] = cfg.space.size();
  report["accuracy_probe"] = cfg.probe ? "toy two-class task, centroid-only fine-tune; a stand-in, not model accuracy"
                                       : "disabled";
  report["outputs"] = {"dse_ranked.json", "heatmap.csv"};
  write_json(ctx, ctx.out_dir / "dse_ranked.json", report);
  write_csv(ctx, ctx.out_dir / "heatmap.csv", [&](std::ostream& o) { write_heatmap_csv(o, r); });

  for (const StepLog& s : r.steps)
    *ctx.out << "dse: " << std::left << std::setw(15) << s.name << std::right << s.candidates << " in, "
             << s.survivors.size() << " kept" << (s.binding().empty() ? "" : ", binding " + s.binding()) << '\n';
  if (!r.feasible) {
    *ctx.log << "lutdla: dse: " << r.diagnostic << '\n';
    return kExitInfeasible;
  }
  for (std::size_t i = 0; i < std::min(cfg.top, r.ranked.size()); ++i) {
    const Evaluation& e = r.ranked[i];
    *ctx.out << "dse: #" << i + 1 << " v=" << e.point.v << " c=" << e.point.c << " " << to_string(e.point.metric)
             << " n_CCU=" << e.point.n_CCU << " n_IMM=" << e.point.n_IMM << " omega=" << fixed(e.omega.value, 0)
             << " (" << to_string(e.omega.binding) << ") area=" << fixed(e.cost.area, 1) << '\n';
  }
  return kExitOk;
}

}  // namespace lutdla::cli
