#ifndef CLEARING_ENGINE_HPP_
#define CLEARING_ENGINE_HPP_

// File-backed clearing store.
//
//   <store>/config.json            unit, default source/currency, quota
//   <store>/keys.json              agent -> hex verification key
//   <store>/ledger.json            balances and open obligations
//   <store>/current                id of the epoch accepting submissions
//   <store>/epochs/<n>/state       Open | Frozen | Solved | Applied | Failed
//   <store>/epochs/<n>/pool.jsonl  submitted intents, one per line
//   <store>/epochs/<n>/frozen.json pool snapshot incl. carried obligations
//   <store>/epochs/<n>/run.json    budget and seed used for solving
//   <store>/epochs/<n>/flow.json, validation.json, applied.json, report.json
//
// Every file is replaced by write-to-temp then rename. applied.json is
// written before ledger.json so a restart can finish a half-committed epoch.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>

#include "clearing/json_io.hpp"
#include "clearing/settlement.hpp"
#include "clearing/solver.hpp"

namespace clearing {

enum class EpochState { kOpen, kFrozen, kSolved, kApplied, kFailed };

inline std::string_view state_name(EpochState s) {
  switch (s) {
    case EpochState::kOpen: return "Open";
    case EpochState::kFrozen: return "Frozen";
    case EpochState::kSolved: return "Solved";
    case EpochState::kApplied: return "Applied";
    case EpochState::kFailed: return "Failed";
  }
  return "?";
}

inline EpochState parse_state(std::string_view s) {
  for (EpochState e : {EpochState::kOpen, EpochState::kFrozen, EpochState::kSolved,
                       EpochState::kApplied, EpochState::kFailed}) {
    if (state_name(e) == s) return e;
  }
  throw Error(ErrorCode::kParse, "unknown epoch state: " + std::string(s));
}

struct StoreConfig {
  EpochConfig epoch;
  // Maximum pooled intents per bound party and epoch; 0 means unlimited.
  std::size_t quota = 0;
};

struct RunOptions {
  std::optional<Amount> budget;
  std::uint64_t seed = 0;
};

// Fault injection for tests. `mutate_flow` edits the solver output before
// validation; `at_step` fires at "solved", "validated", "applied_written" and
// "ledger_written" and may throw to simulate a crash.
struct EngineHooks {
  std::function<void(SettlementFlow&)> mutate_flow;
  std::function<void(std::string_view)> at_step;
  ApplyHooks apply;
};

struct RunResult {
  std::int64_t epoch_id = 0;
  EpochState state = EpochState::kOpen;
  Json report;
};

namespace engine_detail {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_atomic(const fs::path& path, std::string_view content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot replace " + path.string() + ": " + ec.message());
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

// Advisory lock on <store>/lock so separate processes serialize too.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) : fd_(::open(path.c_str(), O_RDWR | O_CREAT, 0644)) {
    if (fd_ < 0) throw Error(ErrorCode::kIo, "cannot open lock " + path.string());
    ::flock(fd_, LOCK_EX);
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

}  // namespace engine_detail

class Store {
 public:
  // Opens an existing store, or initializes one with `config` when the
  // directory has none yet.
  static Store open(const std::filesystem::path& dir, const StoreConfig& config = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "epochs");
    Store store(dir);
    if (!fs::exists(dir / "config.json")) {
      store.write_config(config);
      engine_detail::write_atomic(dir / "keys.json", engine_detail::dump(Json::object()));
      engine_detail::write_atomic(dir / "ledger.json", engine_detail::dump(to_json(Ledger{})));
      engine_detail::write_atomic(dir / "current", "0\n");
    }
    store.config_ = store.read_config();
    return store;
  }

  const std::filesystem::path& dir() const { return dir_; }
  const StoreConfig& config() const { return config_; }

  std::int64_t current_epoch() const {
    return std::stoll(engine_detail::read_file(dir_ / "current"));
  }

  EpochState state(std::int64_t epoch) const {
    const auto path = epoch_dir(epoch) / "state";
    if (!std::filesystem::exists(path)) return EpochState::kOpen;
    std::string s = engine_detail::read_file(path);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return parse_state(s);
  }

  KeyRing keys() const {
    KeyRing ring;
    const Json table = engine_detail::read_json(dir_ / "keys.json");
    for (const auto& [agent, hex] : table.items()) {
      ring.add(AgentId(agent), key_from_hex(hex.get<std::string>()));
    }
    return ring;
  }

  void register_key(const AgentId& agent, const SigningKey& key) {
    std::scoped_lock guard(*mutex_);
    engine_detail::FileLock lock(dir_ / "lock");
    std::map<std::string, std::string> by_agent;
    const Json table = engine_detail::read_json(dir_ / "keys.json");
    for (const auto& [name, hex] : table.items()) {
      by_agent[name] = hex.get<std::string>();
    }
    by_agent[agent.str()] = to_hex(key);
    Json sorted = Json::object();
    for (const auto& [name, hex] : by_agent) sorted[name] = hex;
    engine_detail::write_atomic(dir_ / "keys.json", engine_detail::dump(sorted));
  }

  Ledger ledger() const { return ledger_from_json(engine_detail::read_json(dir_ / "ledger.json")); }

  // Operator deposit into an agent's balance at a liquidity source. Only
  // between epochs, so a half-committed run never races it.
  void fund(const AgentId& agent, const std::string& asset, Amount amount) {
    std::scoped_lock guard(*mutex_);
    engine_detail::FileLock lock(dir_ / "lock");
    if (state(current_epoch()) != EpochState::kOpen) {
      throw Error(ErrorCode::kState, "cannot fund while an epoch is frozen");
    }
    Ledger l = ledger();
    l.credit(agent, asset, amount);
    write_ledger(l);
  }

  std::vector<Intent> pool_intents(std::int64_t epoch) const {
    std::vector<Intent> out;
    const auto path = epoch_dir(epoch) / "pool.jsonl";
    if (!std::filesystem::exists(path)) return out;
    std::istringstream in(engine_detail::read_file(path));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) out.push_back(parse_intent_line(line));
    }
    return out;
  }

  // Returns the epoch the intent is pooled in. Safe for concurrent callers.
  std::int64_t submit(const Intent& intent) {
    if (auto problem = std::visit([](const auto& x) { return well_formedness_error(x); }, intent)) {
      throw Error(ErrorCode::kValidation, intent_id(intent) + ": " + *problem);
    }
    std::scoped_lock guard(*mutex_);
    engine_detail::FileLock lock(dir_ / "lock");
    if (!verify_ascertainment(intent, keys())) {
      throw Error(ErrorCode::kValidation, intent_id(intent) + ": ascertainment does not verify");
    }
    const std::int64_t current = current_epoch();
    const std::string id = intent_id(intent);
    for (std::int64_t e : {current, current + 1}) {
      for (const Intent& existing : pool_intents(e)) {
        if (intent_id(existing) == id) return e;
      }
    }
    if (ledger().open_obligations.contains(id)) return current;

    const std::int64_t target = state(current) == EpochState::kOpen ? current : current + 1;
    std::vector<Intent> pool = pool_intents(target);
    if (config_.quota != 0) {
      const AgentId party = bound_party(intent);
      const auto used = std::count_if(pool.begin(), pool.end(), [&](const Intent& x) {
        return bound_party(x) == party;
      });
      if (static_cast<std::size_t>(used) >= config_.quota) {
        throw Error(ErrorCode::kQuota, party.str() + " reached the pool quota for epoch " +
                                           std::to_string(target));
      }
    }
    pool.push_back(intent);
    write_pool(target, pool);
    return target;
  }

  // Removes a pooled intent; only while its epoch is still open.
  void cancel(const std::string& id) {
    std::scoped_lock guard(*mutex_);
    engine_detail::FileLock lock(dir_ / "lock");
    const std::int64_t current = current_epoch();
    for (std::int64_t e : {current, current + 1}) {
      std::vector<Intent> pool = pool_intents(e);
      const auto it = std::find_if(pool.begin(), pool.end(),
                                   [&](const Intent& x) { return intent_id(x) == id; });
      if (it == pool.end()) continue;
      if (state(e) != EpochState::kOpen) {
        throw Error(ErrorCode::kState, "epoch " + std::to_string(e) + " is frozen; cannot cancel " + id);
      }
      pool.erase(it);
      write_pool(e, pool);
      return;
    }
    throw Error(ErrorCode::kInvalidArgument, "no pooled intent with id " + id);
  }

  // Snapshots the pool together with the ledger's open obligations.
  std::int64_t freeze() {
    std::scoped_lock guard(*mutex_);
    engine_detail::FileLock lock(dir_ / "lock");
    const std::int64_t epoch = current_epoch();
    const EpochState s = state(epoch);
    if (s != EpochState::kOpen) {
      throw Error(ErrorCode::kState, "epoch " + std::to_string(epoch) + " is " +
                                         std::string(state_name(s)) + ", not Open");
    }
    IntentPool pool;
    pool.epoch_id = epoch;
    for (const auto& [id, open] : ledger().open_obligations) {
      pool.obligations.push_back(PooledObligation{open.obligation, open.outstanding, true});
    }
    for (const Intent& intent : pool_intents(epoch)) pool.add(intent);
    std::filesystem::create_directories(epoch_dir(epoch));
    engine_detail::write_atomic(epoch_dir(epoch) / "frozen.json", engine_detail::dump(to_json(pool)));
    set_state(epoch, EpochState::kFrozen);
    return epoch;
  }

  // aggregate -> solve -> validate -> apply for the frozen current epoch.
  // Resumes a Solved epoch, including one whose applied.json was written but
  // whose ledger was not.
  RunResult run(const RunOptions& options = {}, const EngineHooks& hooks = {}) {
    std::scoped_lock guard(*mutex_);
    engine_detail::FileLock lock(dir_ / "lock");
    const std::int64_t epoch = current_epoch();
    const auto edir = epoch_dir(epoch);
    auto step = [&](std::string_view name) {
      if (hooks.at_step) hooks.at_step(name);
    };
    EpochState s = state(epoch);
    if (s != EpochState::kFrozen && s != EpochState::kSolved) {
      throw Error(ErrorCode::kState, "epoch " + std::to_string(epoch) + " is " +
                                         std::string(state_name(s)) + ", not Frozen");
    }
    const IntentPool pool = pool_from_json(engine_detail::read_json(edir / "frozen.json"));
    const KeyRing ring = keys();
    Ledger ledger = this->ledger();

    if (std::filesystem::exists(edir / "applied.json")) {
      const AppliedEpoch applied = applied_from_json(engine_detail::read_json(edir / "applied.json"));
      if (ledger.last_applied_epoch != epoch) write_ledger(applied.ledger_after);
      return finish(epoch, pool, ring, applied.ledger_before);
    }

    AggregateOptions agg;
    agg.ledger = &ledger;
    ObligationGraph g;
    try {
      g = aggregate(pool, ring, config_.epoch, agg);
      if (s == EpochState::kFrozen) (void)build_network(g);
    } catch (const Error& e) {
      // An unbuildable pool fails the epoch; its intents move on so the
      // offender can be cancelled there.
      Json failure;
      failure["epoch_id"] = epoch;
      failure["state"] = "Failed";
      failure["error"] = error_code_name(e.code());
      failure["message"] = e.what();
      engine_detail::write_atomic(edir / "report.json", engine_detail::dump(failure));
      requeue(epoch);
      set_state(epoch, EpochState::kFailed);
      advance(epoch);
      throw;
    }
    if (s == EpochState::kFrozen) {
      Json params;
      params["budget"] = options.budget ? Json(options.budget->value()) : Json(nullptr);
      params["seed"] = options.seed;
      engine_detail::write_atomic(edir / "run.json", engine_detail::dump(params));
      SettlementFlow flow = solve(g, options.budget, options.seed);
      if (hooks.mutate_flow) hooks.mutate_flow(flow);
      engine_detail::write_atomic(edir / "flow.json", engine_detail::dump(to_json(flow)));
      set_state(epoch, EpochState::kSolved);
      step("solved");
    }
    const SettlementFlow flow = flow_from_json(engine_detail::read_json(edir / "flow.json"));
    const ValidationReport report = is_valid_flow(g, flow, ledger, ring);
    engine_detail::write_atomic(edir / "validation.json", engine_detail::dump(to_json(report)));
    if (!report.valid) {
      requeue(epoch);
      set_state(epoch, EpochState::kFailed);
      advance(epoch);
      RunResult result{epoch, EpochState::kFailed, epoch_report(epoch, g, flow, report, ledger)};
      engine_detail::write_atomic(edir / "report.json", engine_detail::dump(result.report));
      return result;
    }
    step("validated");
    Ledger working = ledger;
    const AppliedEpoch applied = apply_flow(working, g, flow, ring, hooks.apply);
    engine_detail::write_atomic(edir / "applied.json", engine_detail::dump(to_json(applied)));
    step("applied_written");
    write_ledger(applied.ledger_after);
    step("ledger_written");
    return finish(epoch, pool, ring, applied.ledger_before);
  }

  Json report(std::int64_t epoch) const {
    const auto path = epoch_dir(epoch) / "report.json";
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kState, "epoch " + std::to_string(epoch) + " has no report");
    }
    return engine_detail::read_json(path);
  }

  std::vector<SetOffNotice> notices(std::int64_t epoch) const {
    const auto path = epoch_dir(epoch) / "applied.json";
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kState, "epoch " + std::to_string(epoch) + " was not applied");
    }
    return applied_from_json(engine_detail::read_json(path)).notices;
  }

  // Most recent epoch with a report, if any.
  std::optional<std::int64_t> last_reported_epoch() const {
    for (std::int64_t e = current_epoch(); e >= 0; --e) {
      if (std::filesystem::exists(epoch_dir(e) / "report.json")) return e;
    }
    return std::nullopt;
  }

  // Graph of everything that would be cleared if the current epoch froze now.
  ObligationGraph preview_graph() const {
    IntentPool pool;
    pool.epoch_id = current_epoch();
    for (const auto& [id, open] : ledger().open_obligations) {
      pool.obligations.push_back(PooledObligation{open.obligation, open.outstanding, true});
    }
    for (const Intent& intent : pool_intents(pool.epoch_id)) pool.add(intent);
    const Ledger l = ledger();
    AggregateOptions agg;
    agg.ledger = &l;
    return aggregate(pool, keys(), config_.epoch, agg);
  }

  std::filesystem::path epoch_dir(std::int64_t epoch) const {
    return dir_ / "epochs" / std::to_string(epoch);
  }

 private:
  explicit Store(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write_config(const StoreConfig& c) const {
    Json j;
    j["unit"] = c.epoch.unit;
    j["default_source"] = c.epoch.default_source.str();
    j["default_currency"] = c.epoch.default_currency;
    j["quota"] = c.quota;
    engine_detail::write_atomic(dir_ / "config.json", engine_detail::dump(j));
  }

  StoreConfig read_config() const {
    const Json j = engine_detail::read_json(dir_ / "config.json");
    StoreConfig c;
    c.epoch.unit = j.at("unit").get<std::string>();
    c.epoch.default_source = AgentId(j.at("default_source").get<std::string>());
    c.epoch.default_currency = j.at("default_currency").get<std::string>();
    c.quota = j.at("quota").get<std::size_t>();
    return c;
  }

  void write_ledger(const Ledger& l) const {
    engine_detail::write_atomic(dir_ / "ledger.json", engine_detail::dump(to_json(l)));
  }

  void write_pool(std::int64_t epoch, const std::vector<Intent>& pool) const {
    std::filesystem::create_directories(epoch_dir(epoch));
    std::string text;
    for (const Intent& intent : pool) text += to_json(intent).dump() + "\n";
    engine_detail::write_atomic(epoch_dir(epoch) / "pool.jsonl", text);
  }

  void set_state(std::int64_t epoch, EpochState s) const {
    std::filesystem::create_directories(epoch_dir(epoch));
    engine_detail::write_atomic(epoch_dir(epoch) / "state", std::string(state_name(s)) + "\n");
  }

  void advance(std::int64_t epoch) const {
    engine_detail::write_atomic(dir_ / "current", std::to_string(epoch + 1) + "\n");
  }

  // A failed epoch's submissions go ahead of anything already queued.
  void requeue(std::int64_t epoch) const {
    std::vector<Intent> pool = pool_intents(epoch);
    std::unordered_set<std::string> seen;
    for (const Intent& x : pool) seen.insert(intent_id(x));
    for (Intent& x : pool_intents(epoch + 1)) {
      if (!seen.contains(intent_id(x))) pool.push_back(std::move(x));
    }
    write_pool(epoch + 1, pool);
  }

  RunResult finish(std::int64_t epoch, const IntentPool& pool, const KeyRing& ring,
                   const Ledger& ledger_before) {
    const auto edir = epoch_dir(epoch);
    AggregateOptions agg;
    agg.ledger = &ledger_before;
    const ObligationGraph g = aggregate(pool, ring, config_.epoch, agg);
    const SettlementFlow flow = flow_from_json(engine_detail::read_json(edir / "flow.json"));
    const ValidationReport report = is_valid_flow(g, flow, ledger_before, ring);
    RunResult result{epoch, EpochState::kApplied, epoch_report(epoch, g, flow, report, ledger_before)};
    engine_detail::write_atomic(edir / "report.json", engine_detail::dump(result.report));
    set_state(epoch, EpochState::kApplied);
    advance(epoch);
    return result;
  }

  Json epoch_report(std::int64_t epoch, const ObligationGraph& g, const SettlementFlow& flow,
                    const ValidationReport& report, const Ledger& ledger_before) const {
    std::unordered_map<std::string, AgentId> debtor_of;
    for (const auto& p : g.pool.obligations) debtor_of.emplace(p.obligation.id, p.obligation.debtor);
    Amount cleared;
    for (const auto& r : flow.records) {
      const auto it = debtor_of.find(r.edge_ref);
      if (it != debtor_of.end() && it->second == r.party) cleared += r.amount;
    }
    std::map<std::string, Amount> moved;
    for (const Transfer& t : flow.transfers) moved[t.asset] += t.amount;
    const Amount total = g.total_debt();

    Json j;
    j["epoch_id"] = epoch;
    j["state"] = report.valid ? "Applied" : "Failed";
    j["unit"] = g.config.unit;
    j["obligations"] = g.pool.obligations.size();
    j["total_debt"] = total.value();
    j["nid"] = compute_nid(g).value();
    j["cleared_debt"] = cleared.value();
    j["residual_debt"] = (total - cleared).value();
    j["liquidity_used"] = Json::object();
    for (const auto& [asset, amount] : moved) j["liquidity_used"][asset] = amount.value();
    j["records"] = flow.records.size();
    j["transfers"] = flow.transfers.size();
    j["excluded"] = Json::array();
    for (const auto& x : g.excluded) j["excluded"].push_back({{"id", x.id}, {"reason", x.reason}});
    j["validation"] = to_json(report);
    j["open_obligations_before"] = ledger_before.open_obligations.size();
    return j;
  }

  std::filesystem::path dir_;
  StoreConfig config_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace clearing

#endif  // CLEARING_ENGINE_HPP_
