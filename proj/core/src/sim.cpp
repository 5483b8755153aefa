#include "lutdla/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lutdla {

void HwConfig::validate(const ProblemShape& shape, const VQConfig& vq) const {
  require(n_CCU >= 1 && n_IMM >= 1 && lut_banks >= 1, "hw: unit counts must be >= 1");
  require(fifo_depth >= 1, "hw: fifo_depth must be >= 1");
  require(ccm_freq >= 1 && imm_freq >= 1, "hw: clock frequencies must be >= 1");
  require(dpes <= vq.c, "hw: dpes must not exceed c");
  require(beta >= 0 && !std::isnan(beta), "hw: beta must be >= 0");
  tile.validate(shape);
}

namespace {

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

enum class Act { Busy, FifoEmpty, Bandwidth, LutLoad, Drain, Tail };

const char* act_name(Act a) {
  switch (a) {
    case Act::Busy: return "busy";
    case Act::FifoEmpty: return "fifo_empty";
    case Act::Bandwidth: return "bandwidth";
    case Act::LutLoad: return "lut_load";
    case Act::Drain: return "drain";
    case Act::Tail: return "tail";
  }
  return "?";
}

enum class CcmAct { Busy, FifoFull, Idle };

const char* ccm_name(CcmAct a) {
  return a == CcmAct::Busy ? "busy" : a == CcmAct::FifoFull ? "fifo_full" : "idle";
}

struct FifoEntry {
  std::uint64_t seq;
  std::uint32_t index;
  std::uint64_t written_tick;
  std::uint64_t visible_tick;
};

struct Bank {
  std::uint64_t slice = kNever;
  std::uint64_t ready = kNever;  // IMM cycle the transfer completes
  std::vector<double> data;      // c x T_eff, functional mode only
};

struct Imm {
  std::vector<std::size_t> tiles;
  std::size_t r = 0, mt = 0, k = 0, m = 0;
  bool slice_done = false, tile_done = false, done = false;
  std::uint64_t busy_until = 0;
  std::uint64_t finish = 0;
  Act state = Act::FifoEmpty;
  std::uint64_t since = 0;
  ImmStalls stalls;
  Bank bank[2];
  int active = 0;
  std::deque<FifoEntry> fifo;
  std::size_t high_water = 0;
  Matrix scratch;
};

class Simulator {
 public:
  Simulator(const ProblemShape& shape, const VQConfig& vq, const HwConfig& hw, const SimOptions& opt,
            std::size_t active)
      : shape_(shape), vq_(vq), hw_(hw), opt_(opt) {
    Nc_ = vq.num_subspaces(shape.K);
    c_ = vq.c;
    N_o_ = hw.tile.num_n_tiles(shape.N);
    M_o_ = hw.tile.num_m_tiles(shape.M);
    ii_ = hw.initiation_interval(c_);
    latency_ = hw.chain_length(c_) * ii_;
    const std::uint64_t l = std::lcm<std::uint64_t>(hw.ccm_freq, hw.imm_freq);
    Pc_ = l / hw.ccm_freq;
    Pi_ = l / hw.imm_freq;
    bit_lut_ = lut_entry_bits(vq.lut_precision);
    functional_ = opt.a && opt.b && opt.codebook;

    // Tiles go to the fewest IMMs that still reach ceil(N_o / active) rounds.
    const std::size_t rounds = ceil_div(N_o_, active);
    imms_.resize(ceil_div(N_o_, rounds));
    for (std::size_t t = 0; t < N_o_; ++t) imms_[t % imms_.size()].tiles.push_back(t);
    all_imms_ = hw.n_IMM;
    chain_ = hw.chain_length(c_);
    ccus_.resize(hw.n_CCU);
    for (std::size_t u = 0; u < hw.n_CCU; ++u) ccus_[u].next = u;
    ready_.assign(shape.M * Nc_, kNever);

    std::uint64_t max_slices = 0;
    for (const Imm& imm : imms_) max_slices = std::max(max_slices, slices_of(imm));
    for (std::uint64_t q = 0; q < max_slices; ++q)
      for (std::size_t i = 0; i < imms_.size(); ++i)
        if (q < slices_of(imms_[i])) load_order_.push_back({i, q});
    requested_.resize(imms_.size());
    for (std::size_t i = 0; i < imms_.size(); ++i) requested_[i].assign(slices_of(imms_[i]), kNever);

    if (functional_) {
      table_ = build_lut(*opt.codebook, *opt.b, vq.lut_precision, hw.tile.T_n);
      codes_.assign(shape.M * Nc_, 0);
      encoded_.assign(shape.M, false);
      out_ = Matrix(shape.M, shape.N);
      for (Imm& imm : imms_) imm.scratch = Matrix(hw.tile.M_tile, hw.tile.T_n);
    }
    cache_.assign(imms_.size(), std::vector<std::uint32_t>(functional_ ? shape.M * Nc_ : 0));
  }

  SimTrace run();

 private:
  std::size_t tile_width(std::size_t tile) const {
    return std::min(hw_.tile.T_n, shape_.N - tile * hw_.tile.T_n);
  }
  std::size_t tile_rows(std::size_t mt) const {
    return std::min(hw_.tile.M_tile, shape_.M - mt * hw_.tile.M_tile);
  }
  std::uint64_t lookup_cycles(std::size_t tile) const { return ceil_div(tile_width(tile), hw_.lut_banks); }
  std::uint64_t slices_of(const Imm& imm) const { return imm.tiles.size() * M_o_ * Nc_; }
  std::uint64_t current_slice(const Imm& imm) const { return (imm.r * M_o_ + imm.mt) * Nc_ + imm.k; }

  void event(std::uint64_t cycle, const std::string& unit, const std::string& action) {
    if (!opt_.trace) return;
    nlohmann::json j{{"cycle", cycle}, {"unit", unit}, {"action", action}};
    *opt_.trace << j.dump() << '\n';
  }

  void set_state(std::size_t i, Act next, std::uint64_t now) {
    Imm& imm = imms_[i];
    if (imm.state == next) return;
    charge(imm, now);
    imm.state = next;
    imm.since = now;
    event(now, "imm" + std::to_string(i), act_name(next));
  }

  static void charge(Imm& imm, std::uint64_t now) {
    const std::uint64_t span = now - imm.since;
    switch (imm.state) {
      case Act::Busy: imm.stalls.busy += span; break;
      case Act::FifoEmpty: imm.stalls.fifo_empty += span; break;
      case Act::Bandwidth: imm.stalls.bandwidth += span; break;
      case Act::LutLoad: imm.stalls.lut_load += span; break;
      case Act::Drain: imm.stalls.drain += span; break;
      case Act::Tail: imm.stalls.tail += span; break;
    }
    imm.since = now;
  }

  void set_ccm(CcmAct next, std::uint64_t ccm_cycle) {
    if (ccm_state_ == next) return;
    const std::uint64_t span = ccm_cycle - ccm_since_;
    (ccm_state_ == CcmAct::Busy ? ccm_.busy : ccm_state_ == CcmAct::FifoFull ? ccm_.fifo_full : ccm_.idle) += span;
    ccm_state_ = next;
    ccm_since_ = ccm_cycle;
    event(ccm_cycle, "ccm", ccm_name(next));
  }

  // Loads are served in a fixed round-robin order over (slice, IMM); the
  // loader waits for the next request in that order to be issued.
  void request_load(std::size_t i, int bank_id, std::uint64_t q, std::uint64_t now) {
    Imm& imm = imms_[i];
    imm.bank[bank_id].slice = q;
    imm.bank[bank_id].ready = kNever;
    requested_[i][q] = now;
    while (next_load_ < load_order_.size()) {
      const auto [li, lq] = load_order_[next_load_];
      const std::uint64_t at = requested_[li][lq];
      if (at == kNever) break;
      serve_load(li, lq, at);
      ++next_load_;
    }
  }

  void serve_load(std::size_t i, std::uint64_t q, std::uint64_t requested_at) {
    Imm& imm = imms_[i];
    Bank& bank = imm.bank[0].slice == q ? imm.bank[0] : imm.bank[1];
    const std::size_t tile = imm.tiles[q / (M_o_ * Nc_)];
    const std::size_t k = q % Nc_;
    const double bits = static_cast<double>(c_ * tile_width(tile) * bit_lut_);
    const double start = std::max(static_cast<double>(requested_at), loader_free_);
    const double duration = std::isinf(hw_.beta) ? 0.0 : bits / hw_.beta;
    loader_free_ = start + duration;
    loader_busy_ += duration;
    bank.ready = std::isfinite(loader_free_) ? static_cast<std::uint64_t>(std::ceil(loader_free_)) : kNever;
    ++lut_loads_;
    if (functional_) {
      const std::size_t w = tile_width(tile), n0 = tile * hw_.tile.T_n;
      bank.data.resize(c_ * w);
      for (std::size_t j = 0; j < c_; ++j)
        for (std::size_t n = 0; n < w; ++n) bank.data[j * w + n] = table_.entry(k, j, n0 + n);
    }
    if (opt_.trace)
      event(requested_at, "loader", "load imm" + std::to_string(i) + " slice " + std::to_string(q) + " ready " +
                                        (bank.ready == kNever ? std::string("never") : std::to_string(bank.ready)));
  }

  bool any_fifo_full() const {
    for (const Imm& imm : imms_)
      if (imm.fifo.size() >= hw_.fifo_depth) return true;
    return false;
  }

  // Each CCU takes every n_CCU-th subvector, accepts one every II cycles and
  // holds at most `chain` of them until their results are written. Results
  // enter the FIFOs in order, only when every FIFO has room.
  void ccm_step(std::uint64_t tick) {
    const std::uint64_t cyc = tick / Pc_;
    const std::uint64_t total = shape_.M * Nc_;
    ccm_wake_ = false;
    if (written_ == total) {
      ccm_done_ = true;
      set_ccm(CcmAct::Idle, cyc);
      return;
    }
    bool head_blocked = false;
    while (written_ < total && ready_[written_] <= cyc) {
      if (any_fifo_full()) {
        head_blocked = true;
        break;
      }
      const std::uint64_t s = written_++;
      --ccus_[s % hw_.n_CCU].inflight;
      std::uint32_t idx = 0;
      if (functional_) {
        const std::size_t row = seq_row(s);
        if (!encoded_[row]) {
          encode_row(opt_.a->row(row), *opt_.codebook, vq_.metric, vq_.dist_precision,
                     std::span(codes_).subspan(row * Nc_, Nc_));
          encoded_[row] = true;
        }
        idx = codes_[row * Nc_ + seq_k(s)];
      }
      for (Imm& imm : imms_) {
        imm.fifo.push_back({s, idx, tick, tick + hw_.fifo_sync * Pi_});
        imm.high_water = std::max(imm.high_water, imm.fifo.size());
      }
      ++produced_;
    }
    bool can_issue_later = false;
    for (Ccu& u : ccus_) {
      if (u.next >= total) continue;
      if (u.inflight < chain_ && (u.issued == 0 || cyc >= u.last_issue + ii_)) {
        ready_[u.next] = cyc + latency_;
        u.next += hw_.n_CCU;
        ++u.inflight;
        ++u.issued;
        u.last_issue = cyc;
      }
      if (u.next < total && u.inflight < chain_) can_issue_later = true;
    }
    // nothing changes until an IMM frees a FIFO slot
    ccm_blocked_ = head_blocked && !can_issue_later;
    set_ccm(head_blocked ? CcmAct::FifoFull : CcmAct::Busy, cyc);
  }

  // Production order is m-tile -> k -> m, the order the IMMs consume in.
  std::size_t seq_row(std::uint64_t s) const {
    const std::size_t per_tile = hw_.tile.M_tile * Nc_;
    const std::size_t mt = s / per_tile;
    const std::size_t rows = tile_rows(mt);
    return mt * hw_.tile.M_tile + (s - mt * per_tile) % rows;
  }
  std::size_t seq_k(std::uint64_t s) const {
    const std::size_t per_tile = hw_.tile.M_tile * Nc_;
    const std::size_t mt = s / per_tile;
    return (s - mt * per_tile) / tile_rows(mt);
  }

  void imm_advance(std::size_t i, std::uint64_t now, std::uint64_t tick) {
    Imm& imm = imms_[i];
    while (!imm.done && now >= imm.busy_until) {
      if (imm.slice_done) {
        imm.slice_done = false;
        const std::uint64_t finished = current_slice(imm) == 0 ? 0 : current_slice(imm) - 1;
        const std::uint64_t next_load = finished + 2;
        const int old = imm.active;
        imm.active ^= 1;
        imm.bank[old].slice = kNever;
        imm.bank[old].ready = kNever;
        if (next_load < slices_of(imm)) request_load(i, old, next_load, now);
        if (hw_.swap_penalty > 0) {
          set_state(i, Act::LutLoad, now);
          imm.busy_until = now + hw_.swap_penalty;
        }
        continue;
      }
      if (imm.tile_done) {
        imm.tile_done = false;
        const std::size_t mt = imm.mt == 0 ? M_o_ - 1 : imm.mt - 1;
        const std::size_t tile = imm.tiles[imm.mt == 0 ? imm.r - 1 : imm.r];
        flush(imm, mt, tile);
        if (!hw_.overlap_drain) {
          set_state(i, Act::Drain, now);
          imm.busy_until = now + tile_rows(mt) * lookup_cycles(tile);
        }
        continue;
      }
      if (imm.r == imm.tiles.size()) {
        set_state(i, Act::Tail, now);
        charge(imm, now);
        imm.done = true;
        imm.finish = now;
        return;
      }

      const std::uint64_t q = current_slice(imm);
      const Bank& bank = imm.bank[imm.active];
      if (bank.slice != q || bank.ready > now) {
        set_state(i, Act::Bandwidth, now);
        return;
      }
      const std::size_t row = imm.mt * hw_.tile.M_tile + imm.m;
      std::uint32_t index = 0;
      if (imm.r == 0) {
        if (imm.fifo.empty() || imm.fifo.front().visible_tick > tick) {
          set_state(i, Act::FifoEmpty, now);
          return;
        }
        const FifoEntry e = imm.fifo.front();
        imm.fifo.pop_front();
        ccm_wake_ = true;
        if (e.written_tick > tick || seq_row(e.seq) != row || seq_k(e.seq) != imm.k) ++causality_;
        index = e.index;
        if (functional_) cache_[i][row * Nc_ + imm.k] = index;
      } else if (functional_) {
        index = cache_[i][row * Nc_ + imm.k];
      }

      const std::size_t tile = imm.tiles[imm.r];
      const std::size_t w = tile_width(tile);
      if (bank.ready > now || bank.slice != q) ++reads_from_loading_;
      if (functional_) {
        if (index >= c_) fail(ErrorKind::Corruption, "simulate: index out of range");
        for (std::size_t n = 0; n < w; ++n) imm.scratch(imm.m, n) += bank.data[index * w + n];
      }
      set_state(i, Act::Busy, now);
      imm.busy_until = now + lookup_cycles(tile);
      ++index_steps_;
      lane_lookups_ += w;

      if (++imm.m == tile_rows(imm.mt)) {
        imm.m = 0;
        imm.slice_done = true;
        if (++imm.k == Nc_) {
          imm.k = 0;
          imm.tile_done = true;
          if (++imm.mt == M_o_) {
            imm.mt = 0;
            ++imm.r;
          }
        }
      }
    }
  }

  void flush(Imm& imm, std::size_t mt, std::size_t tile) {
    if (!functional_) return;
    const std::size_t rows = tile_rows(mt), w = tile_width(tile);
    for (std::size_t m = 0; m < rows; ++m)
      for (std::size_t n = 0; n < w; ++n) {
        out_(mt * hw_.tile.M_tile + m, tile * hw_.tile.T_n + n) = imm.scratch(m, n);
        imm.scratch(m, n) = 0.0;
      }
  }

  static std::uint64_t round_up(std::uint64_t t, std::uint64_t period) { return (t + period - 1) / period * period; }

  std::uint64_t next_tick(std::uint64_t tick) const {
    std::uint64_t next = kNever;
    if (!ccm_done_ && (!ccm_blocked_ || ccm_wake_)) next = (tick / Pc_ + 1) * Pc_;
    for (const Imm& imm : imms_) {
      if (imm.done) continue;
      std::uint64_t cand = kNever;
      const std::uint64_t now = tick / Pi_;
      if (imm.busy_until > now) {
        cand = imm.busy_until * Pi_;
      } else if (imm.state == Act::Bandwidth) {
        const std::uint64_t ready = imm.bank[imm.active].ready;
        if (ready != kNever) cand = std::max(ready, now + 1) * Pi_;
      } else if (imm.state == Act::FifoEmpty && !imm.fifo.empty()) {
        cand = round_up(std::max(imm.fifo.front().visible_tick, tick + 1), Pi_);
      }
      next = std::min(next, cand);
    }
    return next;
  }

  std::string dump_state(std::uint64_t tick) const {
    std::ostringstream os;
    os << "at IMM cycle " << tick / Pi_ << ": ccm " << ccm_name(ccm_state_) << " written " << written_ << "/"
       << shape_.M * Nc_;
    for (std::size_t i = 0; i < imms_.size(); ++i) {
      const Imm& imm = imms_[i];
      os << "; imm" << i << " " << act_name(imm.state) << " fifo " << imm.fifo.size() << "/" << hw_.fifo_depth
         << " slice " << current_slice(imm) << " bank[" << imm.active << "] ready "
         << (imm.bank[imm.active].ready == kNever ? std::string("never") : std::to_string(imm.bank[imm.active].ready));
    }
    return os.str();
  }

  std::string stall_breakdown(std::uint64_t now) {
    ImmStalls sum;
    for (Imm& imm : imms_) {
      charge(imm, now);
      sum.busy += imm.stalls.busy;
      sum.fifo_empty += imm.stalls.fifo_empty;
      sum.bandwidth += imm.stalls.bandwidth;
      sum.lut_load += imm.stalls.lut_load;
      sum.drain += imm.stalls.drain;
      sum.tail += imm.stalls.tail;
    }
    const double total = std::max<double>(1.0, static_cast<double>(sum.sum()));
    std::ostringstream os;
    os << "busy " << 100.0 * sum.busy / total << "%, fifo_empty " << 100.0 * sum.fifo_empty / total
       << "%, bandwidth " << 100.0 * sum.bandwidth / total << "%, lut_load " << 100.0 * sum.lut_load / total
       << "%, drain " << 100.0 * sum.drain / total << "%";
    return os.str();
  }

  ProblemShape shape_;
  VQConfig vq_;
  HwConfig hw_;
  SimOptions opt_;
  std::size_t Nc_ = 0, c_ = 0, N_o_ = 0, M_o_ = 0, ii_ = 1, latency_ = 1, all_imms_ = 1;
  std::uint64_t Pc_ = 1, Pi_ = 1;
  unsigned bit_lut_ = 8;
  bool functional_ = false;

  std::vector<Imm> imms_;
  std::vector<std::vector<std::uint32_t>> cache_;
  PSumTable table_;
  std::vector<std::uint32_t> codes_;
  Matrix out_;

  struct Ccu {
    std::uint64_t next = 0, last_issue = 0, issued = 0;
    std::size_t inflight = 0;
  };
  std::vector<Ccu> ccus_;
  std::vector<std::uint64_t> ready_;  // CCM cycle each subvector's result is ready
  std::uint64_t written_ = 0, produced_ = 0;
  std::size_t chain_ = 1;
  std::vector<std::pair<std::size_t, std::uint64_t>> load_order_;
  std::vector<std::vector<std::uint64_t>> requested_;
  std::size_t next_load_ = 0;
  std::vector<bool> encoded_;
  bool ccm_done_ = false, ccm_blocked_ = false, ccm_wake_ = false;
  CcmAct ccm_state_ = CcmAct::Busy;
  std::uint64_t ccm_since_ = 0;
  CcmStalls ccm_;

  double loader_free_ = 0.0, loader_busy_ = 0.0;
  std::uint64_t lut_loads_ = 0, index_steps_ = 0, lane_lookups_ = 0;
  std::uint64_t reads_from_loading_ = 0, causality_ = 0;
};

SimTrace Simulator::run() {
  for (int pass = 0; pass < 2; ++pass)
    for (std::size_t i = 0; i < imms_.size(); ++i)
      if (static_cast<std::uint64_t>(pass) < slices_of(imms_[i])) request_load(i, pass, pass, 0);

  std::uint64_t tick = 0;
  while (true) {
    if (tick % Pc_ == 0 && !ccm_done_ && (!ccm_blocked_ || ccm_wake_)) ccm_step(tick);
    if (tick % Pi_ == 0)
      for (std::size_t i = 0; i < imms_.size(); ++i) imm_advance(i, tick / Pi_, tick);
    if (std::all_of(imms_.begin(), imms_.end(), [](const Imm& m) { return m.done; })) break;

    const std::uint64_t next = next_tick(tick);
    if (next == kNever) fail(ErrorKind::Deadlock, "simulate: no unit can make progress " + dump_state(tick));
    if (next / Pi_ > opt_.max_cycles)
      fail(ErrorKind::Deadlock, "simulate: cycle guard of " + std::to_string(opt_.max_cycles) +
                                    " exceeded; stalls " + stall_breakdown(tick / Pi_) + "; " + dump_state(tick));
    tick = next;
  }

  SimTrace t;
  t.active_imms = imms_.size();
  for (const Imm& imm : imms_) t.total_cycles = std::max(t.total_cycles, imm.finish);
  const std::uint64_t end_tick = t.total_cycles * Pi_;
  t.ccm_cycles = ceil_div(end_tick, Pc_);
  set_ccm(CcmAct::Idle, std::max(ccm_since_, t.ccm_cycles));
  t.ccm = ccm_;
  t.ccm.idle += t.ccm_cycles > ccm_since_ ? t.ccm_cycles - ccm_since_ : 0;

  for (Imm& imm : imms_) {
    imm.stalls.tail += t.total_cycles - imm.finish;
    t.imm.push_back(imm.stalls);
    t.fifo_high_water.push_back(imm.high_water);
  }
  // IMMs without an n-tile sit idle for the whole run.
  for (std::size_t i = imms_.size(); i < all_imms_; ++i) {
    ImmStalls idle;
    idle.tail = t.total_cycles;
    t.imm.push_back(idle);
    t.fifo_high_water.push_back(0);
  }
  for (const ImmStalls& s : t.imm) {
    t.imm_total.busy += s.busy;
    t.imm_total.fifo_empty += s.fifo_empty;
    t.imm_total.bandwidth += s.bandwidth;
    t.imm_total.lut_load += s.lut_load;
    t.imm_total.drain += s.drain;
    t.imm_total.tail += s.tail;
  }
  t.loader_busy_cycles = loader_busy_;
  t.lut_loads = lut_loads_;
  t.index_steps = index_steps_;
  t.lane_lookups = lane_lookups_;
  t.indices_produced = produced_;
  t.reads_from_loading_bank = reads_from_loading_;
  t.causality_violations = causality_;

  const double total = std::max<double>(1.0, static_cast<double>(t.total_cycles));
  t.util_ccm = static_cast<double>(t.ccm.busy * Pc_) / (total * static_cast<double>(Pi_));
  t.util_loader = loader_busy_ / total;
  t.util_imm = static_cast<double>(t.imm_total.busy) / (total * static_cast<double>(all_imms_));
  t.dominant = Binding::Lut;
  double best = t.util_imm;
  if (t.util_ccm > best) {
    best = t.util_ccm;
    t.dominant = Binding::Sim;
  }
  if (t.util_loader > best) t.dominant = Binding::Load;

  t.functional = functional_;
  if (functional_) t.output = out_;
  return t;
}

}  // namespace

SimTrace simulate(const ProblemShape& shape, const VQConfig& vq, const HwConfig& hw, const SimOptions& options) {
  shape.validate();
  vq.validate();
  hw.validate(shape, vq);
  if (options.a || options.b || options.codebook) {
    require(options.a && options.b && options.codebook, "simulate: functional mode needs A, B and a codebook");
    require(options.a->rows() == shape.M && options.a->cols() == shape.K && options.b->rows() == shape.K &&
                options.b->cols() == shape.N,
            "simulate: operand shapes disagree with the problem shape");
    require(options.codebook->K == shape.K && options.codebook->v == vq.v && options.codebook->c() == vq.c,
            "simulate: codebook does not match K, v, c");
  }
  // The mapper may leave IMMs idle: with a shared loader, spreading tiles
  // over more IMMs can lengthen a load-bound run. Try every distinct
  // balanced mapping and keep the shortest (ties go to more IMMs).
  const std::size_t N_o = hw.tile.num_n_tiles(shape.N);
  std::vector<std::size_t> candidates;
  for (std::size_t k = std::min(hw.n_IMM, N_o); k >= 1; --k) {
    const std::size_t used = ceil_div(N_o, ceil_div(N_o, k));
    if (candidates.empty() || candidates.back() != used) candidates.push_back(used);
  }
  if (candidates.size() == 1) return Simulator(shape, vq, hw, options, candidates[0]).run();

  SimOptions timing_only;
  timing_only.max_cycles = options.max_cycles;
  std::size_t best = candidates[0];
  std::uint64_t best_cycles = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t used : candidates) {
    const std::uint64_t cycles = Simulator(shape, vq, hw, timing_only, used).run().total_cycles;
    if (cycles < best_cycles) {
      best_cycles = cycles;
      best = used;
    }
  }
  return Simulator(shape, vq, hw, options, best).run();
}

namespace {
nlohmann::json stalls_json(const ImmStalls& s) {
  return {{"busy", s.busy},         {"fifo_empty", s.fifo_empty}, {"bandwidth", s.bandwidth},
          {"lut_load", s.lut_load}, {"drain", s.drain},           {"tail", s.tail}};
}
}  // namespace

nlohmann::json to_json(const SimTrace& t) {
  nlohmann::json j;
  j["total_cycles"] = t.total_cycles;
  j["active_imms"] = t.active_imms;
  j["ccm_cycles"] = t.ccm_cycles;
  j["imm_stalls"] = stalls_json(t.imm_total);
  j["per_imm"] = nlohmann::json::array();
  for (const auto& s : t.imm) j["per_imm"].push_back(stalls_json(s));
  j["ccm"] = {{"busy", t.ccm.busy}, {"fifo_full", t.ccm.fifo_full}, {"idle", t.ccm.idle}};
  j["fifo_high_water"] = t.fifo_high_water;
  j["loader_busy_cycles"] = t.loader_busy_cycles;
  j["lut_loads"] = t.lut_loads;
  j["index_steps"] = t.index_steps;
  j["lane_lookups"] = t.lane_lookups;
  j["indices_produced"] = t.indices_produced;
  j["reads_from_loading_bank"] = t.reads_from_loading_bank;
  j["causality_violations"] = t.causality_violations;
  j["utilization"] = {{"ccm", t.util_ccm}, {"loader", t.util_loader}, {"imm", t.util_imm}};
  j["dominant"] = std::string(to_string(t.dominant));
  return j;
}

DesignPoint design_point(const VQConfig& vq, const HwConfig& hw) {
  DesignPoint p;
  p.v = vq.v;
  p.c = vq.c;
  p.metric = vq.metric;
  p.dist_precision = vq.dist_precision;
  p.lut_precision = vq.lut_precision;
  p.n_CCU = hw.n_CCU;
  p.dpes = hw.dpes;
  p.n_IMM = hw.n_IMM;
  p.lut_banks = hw.lut_banks;
  p.T_n = hw.tile.T_n;
  p.m_tile = hw.tile.M_tile;
  p.beta = hw.beta;
  p.clock_ratio = static_cast<double>(hw.ccm_freq) / static_cast<double>(hw.imm_freq);
  return p;
}

SteadyStateReport steady_state_check(const SimTrace& trace, const HwConfig& hw, const ProblemShape& shape,
                                     const VQConfig& vq, LoadTerm load) {
  SteadyStateReport r;
  r.model = omega(shape, design_point(vq, hw), load);
  r.simulated = trace.total_cycles;
  const double sim = std::max<double>(1.0, static_cast<double>(trace.total_cycles));
  r.relative_error = std::abs(sim - r.model.value) / sim;
  r.sim_binding = trace.dominant;
  r.binding_agrees = r.sim_binding == r.model.binding;
  return r;
}

Matrix replay_functional(const Matrix& a, const Matrix& b, const VQConfig& vq, const Codebook& codebook,
                         const HwConfig& hw) {
  const ProblemShape shape{a.rows(), a.cols(), b.cols()};
  SimOptions opt;
  opt.a = &a;
  opt.b = &b;
  opt.codebook = &codebook;
  const SimTrace t = simulate(shape, vq, hw, opt);
  if (t.reads_from_loading_bank != 0) fail(ErrorKind::Corruption, "replay: IMM read a bank while it was loading");
  if (t.causality_violations != 0) fail(ErrorKind::Corruption, "replay: index consumed before it was produced");
  const Matrix ref = ls_execute(a, b, vq, codebook, hw.tile);
  for (std::size_t m = 0; m < ref.rows(); ++m)
    for (std::size_t n = 0; n < ref.cols(); ++n)
      if (!(t.output(m, n) == ref(m, n)) && !(std::isnan(t.output(m, n)) && std::isnan(ref(m, n))))
        fail(ErrorKind::Corruption, "replay: output diverges from ls_execute first at (" + std::to_string(m) +
                                        "," + std::to_string(n) + ")");
  return t.output;
}

}  // namespace lutdla
