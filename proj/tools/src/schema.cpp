#include <algorithm>
#include <iterator>

#include "commands.hpp"

namespace lutdla::cli {
namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorKind::Configuration, what); }

template <class T, class F>
std::vector<T> map_texts(const std::vector<std::string>& in, F parse) {
  std::vector<T> out;
  std::transform(in.begin(), in.end(), std::back_inserter(out), [&](const std::string& s) { return parse(s); });
  return out;
}

template <class T>
std::vector<std::string> names(const std::vector<T>& in) {
  std::vector<std::string> out;
  for (const T& x : in) out.emplace_back(to_string(x));
  return out;
}

ProblemShape read_shape(Config& cfg, Section& parent, const ProblemShape& def) {
  Section& s = cfg.sub(parent, "shape");
  ProblemShape p{s.size("M", def.M), s.size("K", def.K), s.size("N", def.N)};
  p.validate();
  return p;
}

VQConfig read_vq(Config& cfg, Section& parent, const VQConfig& def) {
  Section& s = cfg.sub(parent, "vq");
  VQConfig vq;
  vq.v = s.size("v", def.v);
  vq.c = s.size("c", def.c);
  vq.metric = parse_metric(s.text("metric", std::string(to_string(def.metric))));
  vq.dist_precision = parse_dist_precision(s.text("dist_precision", std::string(to_string(def.dist_precision))));
  vq.lut_precision = parse_lut_precision(s.text("lut_precision", std::string(to_string(def.lut_precision))));
  vq.validate();
  return vq;
}

TileConfig read_tile(Config& cfg, Section& parent, const TileConfig& def) {
  Section& s = cfg.sub(parent, "tile");
  return TileConfig{s.size("T_n", def.T_n), s.size("M_tile", def.M_tile)};
}

DataCfg read_data(Config& cfg, Section& parent, const DataCfg& def) {
  Section& s = cfg.sub(parent, "data");
  DataCfg d;
  d.name = s.text("name", def.name);
  if (d.name != "two_moons" && d.name != "glyphs") bad(s.path() + ".name: expected two_moons or glyphs");
  d.train_size = s.size("train_size", def.train_size);
  d.val_size = s.size("val_size", def.val_size);
  d.noise = s.real("noise", def.noise);
  if (d.train_size == 0) bad(s.path() + ".train_size must be >= 1");
  if (!(d.noise >= 0)) bad(s.path() + ".noise must be >= 0");
  return d;
}

ActivationKind parse_activation(const std::string& s) {
  if (s == "relu") return ActivationKind::ReLU;
  if (s == "tanh") return ActivationKind::Tanh;
  bad("activation: expected relu or tanh, got '" + s + "'");
}

LoadTerm parse_load(const std::string& s) {
  if (s == "total") return LoadTerm::Total;
  if (s == "as_printed") return LoadTerm::AsPrinted;
  bad("load_term: expected total or as_printed, got '" + s + "'");
}

TauVariant parse_tau(const std::string& s) {
  if (s == "subspace_count") return TauVariant::SubspaceCount;
  if (s == "as_printed") return TauVariant::AsPrinted;
  bad("tau_variant: expected subspace_count or as_printed, got '" + s + "'");
}

void read_pipeline(Section& s, PipelineConfig& p) {
  p.hidden = s.sizes("hidden", p.hidden);
  p.activation = parse_activation(s.text("activation", p.activation == ActivationKind::ReLU ? "relu" : "tanh"));
  p.pretrain_iterations = s.size("pretrain_iterations", p.pretrain_iterations);
  p.learning_rate = s.real("learning_rate", p.learning_rate);
  p.batch_size = s.size("batch_size", p.batch_size);
}

ConvertCfg convert_section(Config& cfg, Section& s) {
  ConvertCfg c;
  c.model = s.text("model", "");
  c.data = read_data(cfg, s, c.data);
  PipelineConfig& p = c.pipeline;
  p.vq = read_vq(cfg, s, VQConfig{2, 8});
  read_pipeline(s, p);
  p.centroid_iterations = s.size("centroid_iterations", p.centroid_iterations);
  p.joint_iterations = s.size("joint_iterations", p.joint_iterations);
  p.lambda_re = s.real("lambda_re", p.lambda_re);
  p.multistage = s.flag("multistage", p.multistage);
  const std::string init = s.text("init", "kmeans");
  if (init == "kmeans") p.init = CodebookInit::KMeans;
  else if (init == "random") p.init = CodebookInit::Random;
  else bad(s.path() + ".init: expected kmeans or random");
  return c;
}

AmmCfg amm_section(Config& cfg, Section& s) {
  AmmCfg a;
  a.a = s.text("a", "");
  a.b = s.text("b", "");
  a.generate = read_shape(cfg, s, a.generate);
  a.codebook = s.text("codebook", "");
  a.vq = read_vq(cfg, s, a.vq);
  a.tile_n = s.size("tile_n", a.tile_n);
  a.kmeans_iterations = s.size("kmeans_iterations", a.kmeans_iterations);
  a.output = s.text("output", a.output);
  a.sweep_c = s.sizes("sweep_c", {});
  return a;
}

EncodeCfg encode_section(Config& cfg, Section& s) {
  EncodeCfg e;
  e.input = s.text("input", "");
  e.codebook = s.text("codebook", "");
  e.vq = read_vq(cfg, s, e.vq);
  e.kmeans_iterations = s.size("kmeans_iterations", e.kmeans_iterations);
  e.output = s.text("output", e.output);
  return e;
}

SimulateCfg simulate_section(Config& cfg, Section& s) {
  SimulateCfg c;
  c.shape = read_shape(cfg, s, c.shape);
  c.vq = read_vq(cfg, s, c.vq);
  Section& h = cfg.sub(s, "hw");
  HwConfig& hw = c.hw;
  hw.n_CCU = h.size("n_CCU", hw.n_CCU);
  hw.dpes = h.size("dpes", hw.dpes);
  hw.n_IMM = h.size("n_IMM", hw.n_IMM);
  hw.lut_banks = h.size("lut_banks", hw.lut_banks);
  hw.fifo_depth = h.size("fifo_depth", hw.fifo_depth);
  hw.fifo_sync = h.size("fifo_sync", hw.fifo_sync);
  hw.ccm_freq = static_cast<std::uint32_t>(h.u64("ccm_freq", hw.ccm_freq));
  hw.imm_freq = static_cast<std::uint32_t>(h.u64("imm_freq", hw.imm_freq));
  hw.beta = h.real("beta", hw.beta);
  hw.swap_penalty = h.size("swap_penalty", hw.swap_penalty);
  hw.overlap_drain = h.flag("overlap_drain", hw.overlap_drain);
  hw.tile = read_tile(cfg, s, TileConfig{16, 512});
  hw.validate(c.shape, c.vq);
  c.max_cycles = s.u64("max_cycles", c.max_cycles);
  c.trace = s.flag("trace", c.trace);
  c.functional = s.flag("functional", c.functional);
  c.load = parse_load(s.text("load_term", "total"));
  return c;
}

DataflowCfg dataflow_section(Config& cfg, Section& s) {
  DataflowCfg d;
  d.shape = read_shape(cfg, s, d.shape);
  d.vq = read_vq(cfg, s, d.vq);
  d.tile = read_tile(cfg, s, d.tile);
  d.tile.validate(d.shape);
  Section& w = cfg.sub(s, "widths");
  const BitWidths def = BitWidths::for_centroids(d.vq.c);
  d.widths.bit_lut = static_cast<unsigned>(w.size("bit_lut", def.bit_lut));
  d.widths.bit_idx = static_cast<unsigned>(w.size("bit_idx", def.bit_idx));
  d.widths.bit_psum = static_cast<unsigned>(w.size("bit_psum", def.bit_psum));
  d.widths.bit_out = static_cast<unsigned>(w.size("bit_out", def.bit_out));
  d.widths.validate();
  const std::string policy = s.text("index_policy", "streaming");
  if (policy == "streaming") d.policy = IndexPolicy::Streaming;
  else if (policy == "cache_all") d.policy = IndexPolicy::CacheAll;
  else bad(s.path() + ".index_policy: expected streaming or cache_all");
  d.kinds = map_texts<DataflowKind>(s.texts("kinds", names(std::vector<DataflowKind>(std::begin(kAllDataflows),
                                                                                        std::end(kAllDataflows)))),
                                    [](const std::string& x) { return parse_dataflow(x); });
  if (d.kinds.empty()) bad(s.path() + ".kinds: list at least one dataflow");
  return d;
}

DseCfg dse_section(Config& cfg, Section& s) {
  DseCfg d;
  d.shape = read_shape(cfg, s, d.shape);
  Section& sp = cfg.sub(s, "space");
  SearchSpace& space = d.space;
  space.v = sp.sizes("v", space.v);
  space.c = sp.sizes("c", space.c);
  space.metric = map_texts<Metric>(sp.texts("metric", names(space.metric)), [](auto& x) { return parse_metric(x); });
  space.dist_precision = map_texts<DistPrecision>(sp.texts("dist_precision", names(space.dist_precision)),
                                                  [](auto& x) { return parse_dist_precision(x); });
  space.lut_precision = map_texts<LutPrecision>(sp.texts("lut_precision", names(space.lut_precision)),
                                                [](auto& x) { return parse_lut_precision(x); });
  space.n_CCU = sp.sizes("n_CCU", space.n_CCU);
  space.n_IMM = sp.sizes("n_IMM", space.n_IMM);
  space.lut_banks = sp.sizes("lut_banks", space.lut_banks);
  space.T_n = sp.sizes("T_n", space.T_n);
  space.beta = sp.reals("beta", space.beta);
  space.dpes = sp.size("dpes", space.dpes);
  space.m_tile = sp.size("m_tile", space.m_tile);
  space.max_n_IMM = sp.size("max_n_IMM", space.max_n_IMM);
  space.validate();

  Section& k = cfg.sub(s, "constraints");
  Constraints& c = d.constraints;
  c.max_tau_ratio = k.real("max_tau_ratio", c.max_tau_ratio);
  c.max_phi_ratio = k.real("max_phi_ratio", c.max_phi_ratio);
  c.width = static_cast<unsigned>(k.size("width", c.width));
  c.max_area = k.real("max_area", c.max_area);
  c.max_power = k.real("max_power", c.max_power);
  c.min_accuracy = k.real("min_accuracy", c.min_accuracy);
  c.validate();

  d.cost_tables = s.text("cost_tables", "");
  d.options.load = parse_load(s.text("load_term", "total"));
  d.options.tau = parse_tau(s.text("tau_variant", "subspace_count"));
  d.top = s.size("top", d.top);

  Section& p = cfg.sub(s, "probe");
  d.probe = p.flag("enabled", d.probe);
  d.probe_budget = p.size("budget", d.probe_budget);
  d.probe_data = read_data(cfg, p, d.probe_data);
  d.probe_base.pretrain_iterations = 400;
  read_pipeline(p, d.probe_base);
  d.probe_base.lambda_re = p.real("lambda_re", d.probe_base.lambda_re);
  if (d.probe && d.probe_budget == 0) bad(p.path() + ".budget must be >= 1");
  return d;
}

}  // namespace

AllCfg parse_all(Config& config) {
  Section& root = config.root();
  AllCfg all;
  all.convert = convert_section(config, config.sub(root, "convert"));
  all.amm = amm_section(config, config.sub(root, "amm"));
  all.encode = encode_section(config, config.sub(root, "encode"));
  all.simulate = simulate_section(config, config.sub(root, "simulate"));
  all.dataflow = dataflow_section(config, config.sub(root, "dataflow"));
  all.dse = dse_section(config, config.sub(root, "dse"));
  return all;
}

}  // namespace lutdla::cli
