#include "lutdla/dse.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "lutdla/rng.hpp"

namespace lutdla {
namespace {

template <class T>
void require_nonempty(const std::vector<T>& xs, const char* what) {
  require(!xs.empty(), std::string("search space: ") + what + " list is empty");
}

std::size_t n_tiles(const ProblemShape& shape, const DesignPoint& p) { return ceil_div(shape.N, p.T_n); }

std::size_t imm_cap(const ProblemShape& shape, const SearchSpace& space, const DesignPoint& p) {
  return std::min(space.max_n_IMM, n_tiles(shape, p));
}

bool hw_ok(const Evaluation& e, const Constraints& k) {
  return e.cost.area <= k.max_area && e.cost.power <= k.max_power;
}

auto probe_key(const DesignPoint& p) { return std::tuple{p.v, p.c, p.metric, p.dist_precision, p.lut_precision}; }

template <class Pred>
void filter_step(StepLog& log, const std::vector<Evaluation>& in, Pred violated) {
  log.candidates = in.size();
  for (Evaluation e : in) {
    e.violations = violated(e);
    if (e.violations.empty()) {
      log.survivors.push_back(std::move(e));
    } else {
      for (const std::string& v : e.violations) ++log.removed_by[v];
      log.removed.push_back(std::move(e));
    }
  }
}

}  // namespace

void SearchSpace::validate() const {
  require_nonempty(v, "v");
  require_nonempty(c, "c");
  require_nonempty(metric, "metric");
  require_nonempty(dist_precision, "dist_precision");
  require_nonempty(lut_precision, "lut_precision");
  require_nonempty(n_CCU, "n_CCU");
  require_nonempty(n_IMM, "n_IMM");
  require_nonempty(lut_banks, "lut_banks");
  require_nonempty(T_n, "T_n");
  require_nonempty(beta, "beta");
  for (auto x : v) require(x >= 1, "search space: v must be >= 1");
  for (auto x : c) require(x >= 2, "search space: c must be >= 2");
  for (auto x : c) require(dpes <= x, "search space: dpes must not exceed any c");
  for (auto x : n_CCU) require(x >= 1, "search space: n_CCU must be >= 1");
  for (auto x : n_IMM) require(x >= 1 && x <= max_n_IMM, "search space: n_IMM must be in [1, max_n_IMM]");
  for (auto x : lut_banks) require(x >= 1, "search space: lut_banks must be >= 1");
  for (auto x : T_n) require(x >= 1, "search space: T_n must be >= 1");
  for (auto x : beta) require(x > 0, "search space: beta must be > 0");
  require(m_tile >= 1, "search space: m_tile must be >= 1");
}

std::size_t SearchSpace::size() const {
  return v.size() * c.size() * metric.size() * dist_precision.size() * lut_precision.size() * n_CCU.size() *
         n_IMM.size() * lut_banks.size() * T_n.size() * beta.size();
}

std::vector<DesignPoint> SearchSpace::enumerate() const {
  std::vector<DesignPoint> out;
  out.reserve(size());
  for (auto v_ : v)
    for (auto c_ : c)
      for (auto m : metric)
        for (auto dp : dist_precision)
          for (auto lp : lut_precision)
            for (auto nc : n_CCU)
              for (auto ni : n_IMM)
                for (auto lb : lut_banks)
                  for (auto tn : T_n)
                    for (auto b : beta) {
                      DesignPoint p;
                      p.v = v_;
                      p.c = c_;
                      p.metric = m;
                      p.dist_precision = dp;
                      p.lut_precision = lp;
                      p.n_CCU = nc;
                      p.dpes = dpes;
                      p.n_IMM = ni;
                      p.lut_banks = lb;
                      p.T_n = tn;
                      p.m_tile = m_tile;
                      p.beta = b;
                      out.push_back(p);
                    }
  return out;
}

void Constraints::validate() const {
  require(max_tau_ratio > 0 && max_phi_ratio > 0, "constraints: tau and phi ratios must be > 0");
  require(max_area > 0 && max_power > 0, "constraints: area and power bounds must be > 0");
  require(width >= 1, "constraints: width must be >= 1");
  require(min_accuracy >= 0 && min_accuracy <= 1, "constraints: min_accuracy must be in [0, 1]");
}

double dense_ops(const ProblemShape& shape) {
  return 2.0 * static_cast<double>(shape.M) * static_cast<double>(shape.K) * static_cast<double>(shape.N);
}

double dense_bits(const ProblemShape& shape, unsigned width) {
  const double M = static_cast<double>(shape.M), K = static_cast<double>(shape.K), N = static_cast<double>(shape.N);
  return (M * K + K * N + M * N) * width;
}

Evaluation evaluate(const ProblemShape& shape, const DesignPoint& p, const CostTables& tables,
                    const SearchOptions& opt, unsigned bit_out) {
  Evaluation e;
  e.point = p;
  e.tau = tau(shape, p.vq(), opt.tau);
  e.phi = phi(shape, p.vq(), p.bit_lut(), bit_out);
  e.cost = area_power(p, tables);
  e.omega = omega(shape, p, opt.load);
  e.n_IMM_before_expansion = p.n_IMM;
  return e;
}

std::string StepLog::binding() const {
  std::string best;
  std::size_t most = 0;
  for (const auto& [name, count] : removed_by)
    if (count > most) {
      most = count;
      best = name;
    }
  return best;
}

bool rank_before(const Evaluation& a, const Evaluation& b) {
  const DesignPoint &p = a.point, &q = b.point;
  return std::tuple{a.omega.value, a.cost.area, p.v, p.c, p.metric, p.dist_precision, p.lut_precision, p.n_CCU,
                    p.n_IMM, p.lut_banks, p.T_n, p.beta} <
         std::tuple{b.omega.value, b.cost.area, q.v, q.c, q.metric, q.dist_precision, q.lut_precision, q.n_CCU,
                    q.n_IMM, q.lut_banks, q.T_n, q.beta};
}

SearchResult search(const ProblemShape& shape, const SearchSpace& space, const Constraints& k,
                    const CostTables& tables, const AccuracyProbe& probe, const SearchOptions& opt) {
  shape.validate();
  space.validate();
  k.validate();
  tables.validate();

  std::vector<Evaluation> all;
  for (const DesignPoint& p : space.enumerate()) all.push_back(evaluate(shape, p, tables, opt, k.width));

  SearchResult res;
  res.steps[0].name = "compute-memory";
  res.steps[1].name = "hardware";
  res.steps[2].name = "accuracy";
  res.steps[3].name = "expansion";

  const double ops_bound = k.max_tau_ratio * dense_ops(shape);
  const double bits_bound = k.max_phi_ratio * dense_bits(shape, k.width);
  filter_step(res.steps[0], all, [&](const Evaluation& e) {
    std::vector<std::string> v;
    if (e.tau.total > ops_bound) v.push_back("tau");
    if (e.phi.total > bits_bound) v.push_back("phi");
    return v;
  });
  filter_step(res.steps[1], res.steps[0].survivors, [&](const Evaluation& e) {
    std::vector<std::string> v;
    if (e.cost.area > k.max_area) v.push_back("area");
    if (e.cost.power > k.max_power) v.push_back("power");
    return v;
  });

  std::map<decltype(probe_key(DesignPoint{})), double> cache;
  filter_step(res.steps[2], res.steps[1].survivors, [&](Evaluation& e) {
    std::vector<std::string> v;
    if (!probe) return v;
    const auto key = probe_key(e.point);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, probe(e.point)).first;
    e.accuracy = it->second;
    if (it->second < k.min_accuracy) v.push_back("accuracy");
    return v;
  });

  // LUT-first expansion: add IMMs while the lookup term binds, omega still
  // drops and the hardware bounds hold.
  StepLog& grow = res.steps[3];
  grow.candidates = res.steps[2].survivors.size();
  for (Evaluation e : res.steps[2].survivors) {
    const std::size_t cap = imm_cap(shape, space, e.point);
    while (e.omega.binding == Binding::Lut && e.point.n_IMM < cap) {
      DesignPoint next = e.point;
      ++next.n_IMM;
      Evaluation cand = evaluate(shape, next, tables, opt, k.width);
      if (!hw_ok(cand, k) || !(cand.omega.value < e.omega.value)) break;
      e.point = next;
      e.cost = cand.cost;
      e.omega = cand.omega;
    }
    grow.survivors.push_back(std::move(e));
  }

  res.ranked = grow.survivors;
  std::sort(res.ranked.begin(), res.ranked.end(), rank_before);
  res.feasible = !res.ranked.empty();
  if (!res.feasible) {
    std::ostringstream os;
    os << "infeasible:";
    for (const StepLog& s : res.steps) {
      os << " [" << s.name << ": " << s.candidates << " in, " << s.survivors.size() << " out";
      if (!s.removed_by.empty()) os << ", binding " << s.binding();
      os << "]";
    }
    res.diagnostic = os.str();
  }
  return res;
}

void write_heatmap_csv(std::ostream& out, const SearchResult& result) {
  out << "step,v,c,points,survivors,best_omega,best_area\n";
  const auto old = out.precision(17);
  struct Cell {
    std::size_t points = 0, survivors = 0;
    double omega = std::numeric_limits<double>::infinity(), area = std::numeric_limits<double>::infinity();
  };
  // every (v, c) of the space appears in every step so the grid stays rectangular
  std::map<std::pair<std::size_t, std::size_t>, Cell> grid;
  for (const auto* list : {&result.steps[0].removed, &result.steps[0].survivors})
    for (const Evaluation& e : *list) grid[{e.point.v, e.point.c}];
  for (const StepLog& s : result.steps) {
    auto cells = grid;
    for (const Evaluation& e : s.removed) ++cells[{e.point.v, e.point.c}].points;
    for (const Evaluation& e : s.survivors) {
      Cell& cell = cells[{e.point.v, e.point.c}];
      ++cell.points;
      ++cell.survivors;
      if (std::tie(e.omega.value, e.cost.area) < std::tie(cell.omega, cell.area)) {
        cell.omega = e.omega.value;
        cell.area = e.cost.area;
      }
    }
    for (const auto& [vc, cell] : cells) {
      out << s.name << ',' << vc.first << ',' << vc.second << ',' << cell.points << ',' << cell.survivors << ',';
      if (cell.survivors) {
        out << cell.omega << ',' << cell.area;
      } else {
        out << ',';
      }
      out << '\n';
    }
  }
  out.precision(old);
}

nlohmann::json to_json(const Evaluation& e) {
  const DesignPoint& p = e.point;
  nlohmann::json j;
  j["v"] = p.v;
  j["c"] = p.c;
  j["metric"] = std::string(to_string(p.metric));
  j["dist_precision"] = std::string(to_string(p.dist_precision));
  j["lut_precision"] = std::string(to_string(p.lut_precision));
  j["n_CCU"] = p.n_CCU;
  j["dpes"] = p.dpes;
  j["n_IMM"] = p.n_IMM;
  j["n_IMM_before_expansion"] = e.n_IMM_before_expansion;
  j["lut_banks"] = p.lut_banks;
  j["T_n"] = p.T_n;
  if (std::isinf(p.beta)) {
    j["beta"] = "inf";
  } else {
    j["beta"] = p.beta;
  }
  j["tau"] = e.tau.total;
  j["phi_bits"] = e.phi.total;
  j["area"] = e.cost.area;
  j["power"] = e.cost.power;
  j["omega"] = {{"load", e.omega.load},
                {"sim", e.omega.sim},
                {"lut", e.omega.lut},
                {"value", e.omega.value},
                {"binding", std::string(to_string(e.omega.binding))}};
  if (e.accuracy) j["accuracy"] = *e.accuracy;
  if (!e.violations.empty()) j["violations"] = e.violations;
  return j;
}

nlohmann::json to_json(const SearchResult& r) {
  nlohmann::json j;
  j["feasible"] = r.feasible;
  if (!r.feasible) j["diagnostic"] = r.diagnostic;
  j["steps"] = nlohmann::json::array();
  for (const StepLog& s : r.steps) {
    nlohmann::json sj{{"name", s.name}, {"candidates", s.candidates}, {"survivors", s.survivors.size()}};
    sj["removed_by"] = s.removed_by;
    if (!s.removed_by.empty()) sj["binding"] = s.binding();
    j["steps"].push_back(sj);
  }
  j["ranked"] = nlohmann::json::array();
  for (const Evaluation& e : r.ranked) j["ranked"].push_back(to_json(e));
  return j;
}

AccuracyProbe make_toy_probe(const Dataset& train, const Dataset& val, std::size_t budget,
                             const PipelineConfig& base) {
  require(budget >= 1, "probe: budget must be >= 1");
  auto dense = std::make_shared<TinyNet>(pretrain_dense(train, val, base));
  return [dense, train, val, budget, base](const DesignPoint& p) {
    const TinyNet net = substitute(*dense, p.vq(), train.x, mix_seed(base.seed, 3));
    TrainConfig cfg{Stage::CentroidOnly, base.learning_rate, budget, base.lambda_re, mix_seed(base.seed, 4),
                    base.batch_size};
    return quick_accuracy_probe(net, train, val, budget, cfg);
  };
}

}  // namespace lutdla
