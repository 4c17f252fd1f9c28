// Acceptance gate. Usage: acceptance <clearing-cli> <data-dir>
// Prints one PASS/FAIL line per criterion; exits nonzero if any fails.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "clearing/engine.hpp"
#include "support.hpp"

namespace {

using namespace clearing;
using testing::Scenario;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       ("clearing-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::int64_t residual(const SolveResult& r, const ObligationGraph& g, const std::string& debtor,
                      const std::string& creditor) {
  for (std::size_t i = 0; i < r.network.arcs.size(); ++i) {
    const auto& arc = r.network.arcs[i];
    if (arc.kind != ArcKind::kObligation) continue;
    const auto& e = g.edges[arc.edge];
    if (e.debtor == AgentId(debtor) && e.creditor == AgentId(creditor)) {
      return e.amount.value() - r.solution.arc_flows[i];
    }
  }
  return -1;
}

Outcome triangle_exactness() {
  const ObligationGraph g = testing::triangle().graph();
  solve_detailed(g, Amount(0));  // warm-up
  double best = 1e9;
  SolveResult r;
  for (int i = 0; i < 5; ++i) {
    const auto start = Clock::now();
    r = solve_detailed(g, Amount(0));
    best = std::min(best, ms_since(start));
  }
  const std::int64_t cleared = r.solution.cleared_debt.value();
  const std::int64_t ab = residual(r, g, "A", "B");
  const std::int64_t bc = residual(r, g, "B", "C");
  const std::int64_t ca = residual(r, g, "C", "A");
  const bool ok = cleared == 60 && ab == 0 && bc == 10 && ca == 25 && ab + bc + ca == 35 && best < 1.0;
  return {ok, fmt("cleared=%lld residual A>B=%lld B>C=%lld C>A=%lld total=%lld runtime=%.3fms",
                  static_cast<long long>(cleared), static_cast<long long>(ab),
                  static_cast<long long>(bc), static_cast<long long>(ca),
                  static_cast<long long>(ab + bc + ca), best)};
}

Outcome chain_clearing() {
  bool ok = true;
  std::string detail;
  for (const auto& [k, tail] : {std::pair{2, "Bill"}, std::pair{4, "Carol"}}) {
    const ObligationGraph g = testing::chain(k).graph();
    const SolveResult r = solve_detailed(g, std::nullopt);
    const auto& t = r.flow.transfers;
    const bool one = t.size() == 1 && t[0].from == AgentId("Alice") &&
                     t[0].to == AgentId(tail) && t[0].amount == Amount(20);
    ok = ok && r.solution.cleared_debt.value() == 20 * k && one;
    detail += fmt("k=%d cleared=%lld transfers=%zu%s; ", k,
                  static_cast<long long>(r.solution.cleared_debt.value()), t.size(),
                  t.empty() ? "" : (" " + t[0].from.str() + ">" + t[0].to.str() + " " +
                                    std::to_string(t[0].amount.value())).c_str());
  }
  return {ok, detail};
}

Outcome p2p_loan() {
  const Scenario s = testing::p2p_loan();
  const ObligationGraph g = s.graph();
  const SettlementFlow f = solve(g);
  Ledger ledger = s.ledger();
  const AppliedEpoch a = apply_flow(ledger, g, f, s.keys());
  const bool full = ledger.balances == s.ledger().balances && a.new_obligations.size() == 1 &&
                    a.new_obligations[0].debtor == AgentId("Alice") &&
                    a.new_obligations[0].creditor == AgentId("Carol") &&
                    testing::debtor_side_cleared(g, f) == g.total_debt();
  return {full, fmt("cleared=%lld/%lld new_obligations=%zu transfers=%zu",
                    static_cast<long long>(testing::debtor_side_cleared(g, f).value()),
                    static_cast<long long>(g.total_debt().value()), a.new_obligations.size(),
                    f.transfers.size())};
}

Outcome nid_saturation() {
  std::mt19937_64 rng(4);
  int graphs = 0, saturated = 0, short_of_full = 0, with_nid = 0;
  for (; graphs < 100; ++graphs) {
    const int n = 2 + static_cast<int>(rng() % 49);
    const int edges = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(200, n * (n - 1))));
    Scenario s = testing::random_scenario(rng, n, edges, 1 + static_cast<std::int64_t>(rng() % 1000));
    testing::tender_at_net_debtors(s);
    const ObligationGraph g = s.graph();
    const Amount nid = compute_nid(g);
    if (solve_detailed(g, nid).solution.cleared_debt == g.total_debt()) ++saturated;
    if (nid.is_zero()) continue;
    ++with_nid;
    if (solve_detailed(g, nid - Amount(1)).solution.cleared_debt < g.total_debt()) ++short_of_full;
  }
  return {saturated == graphs && short_of_full == with_nid,
          fmt("full clearing at NID %d/%d, below full at NID-1 %d/%d", saturated, graphs,
              short_of_full, with_nid)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(5);
  const auto start = Clock::now();
  int agree = 0, total = 0;
  for (; total < 250; ++total) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const int edges = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(10, n * (n - 1))));
    Scenario s = testing::random_scenario(rng, n, edges, 3);
    for (const NetPosition& p : net_positions(s.graph())) {
      if (p.net < 0 && rng() % 4 != 0) s.tender(p.agent.str(), 1 + static_cast<std::int64_t>(rng() % 3));
      if (p.net > 0 && rng() % 2 == 0) s.accept(p.agent.str(), 1 + static_cast<std::int64_t>(rng() % 3));
    }
    const ObligationGraph g = s.graph();
    const Amount budget(static_cast<std::int64_t>(rng() % 4));
    if (solve_detailed(g, budget).solution.cleared_debt == brute_force_oracle(g, budget)) ++agree;
  }
  const double elapsed = ms_since(start) / 1000.0;
  return {agree == total && total >= 200 && elapsed < 60.0,
          fmt("agree %d/%d in %.2fs", agree, total, elapsed)};
}

struct ValidityCase {
  Scenario scenario;
  ObligationGraph graph;
  SettlementFlow flow;
};

ValidityCase validity_case(std::mt19937_64& rng) {
  const int n = 2 + static_cast<int>(rng() % 14);
  const int edges = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(60, n * (n - 1))));
  Scenario s = testing::random_scenario(rng, n, edges, 1 + static_cast<std::int64_t>(rng() % 200));
  if (rng() % 2 == 0) testing::tender_at_net_debtors(s);
  if (rng() % 4 == 0) {
    const auto& o = s.pool().obligations.front().obligation;
    s.credit_line(o.creditor.str(), o.debtor.str(), 1 + static_cast<std::int64_t>(rng() % 50));
    s.overdraft(o.debtor.str(), o.creditor.str(), 1 + static_cast<std::int64_t>(rng() % 50));
  }
  ObligationGraph g = s.graph();
  const std::optional<Amount> budget =
      rng() % 3 == 0 ? std::nullopt : std::optional<Amount>(Amount(static_cast<std::int64_t>(rng() % 300)));
  SettlementFlow f = solve(g, budget, rng() % 2 == 0 ? 0 : rng());
  return {std::move(s), std::move(g), std::move(f)};
}

Outcome validity_predicate() {
  std::mt19937_64 rng(6);
  int valid = 0, rejected = 0, mutations = 0;
  const int graphs = 1000;
  for (int i = 0; i < graphs; ++i) {
    const ValidityCase c = validity_case(rng);
    auto check = [&](const SettlementFlow& f) {
      return is_valid_flow(c.graph, f, c.scenario.ledger(), c.scenario.keys());
    };
    if (check(c.flow).valid) ++valid;
    if (c.flow.records.empty()) continue;
    const std::size_t pick = rng() % c.flow.records.size();
    std::vector<SettlementFlow> variants(4, c.flow);
    variants[0].records[pick].amount += Amount(1);
    variants[1].records[pick].amount -= Amount(1);
    variants[2].records.erase(variants[2].records.begin() + static_cast<std::ptrdiff_t>(pick));
    // swapped party: the record is attributed to its edge's other endpoint
    SettlementRecord& swapped = variants[3].records[pick];
    for (const auto& other : c.flow.records) {
      if (other.edge_ref == swapped.edge_ref && other.party != swapped.party) {
        swapped.party = other.party;
        break;
      }
    }
    if (swapped.party == c.flow.records[pick].party) swapped.party = AgentId("Mallory");
    for (const SettlementFlow& f : variants) {
      ++mutations;
      const ValidationReport r = check(f);
      if (!r.valid && !r.violations.empty() && !r.violations[0].check.empty()) ++rejected;
    }
  }
  return {valid == graphs && rejected == mutations,
          fmt("valid %d/%d, mutations rejected %d/%d", valid, graphs, rejected, mutations)};
}

Outcome multiplier_curve_shape() {
  SyntheticGraphConfig config;
  config.n_firms = 500;
  config.n_edges = 2000;
  config.distribution = AmountDistribution::kLognormal;
  config.mu = 7.0;
  config.sigma = 1.2;
  config.seed = 42;
  SyntheticNetwork net = generate(config);
  add_default_liquidity(net);
  const Amount total = net.graph.total_debt();
  const Amount nid = compute_nid(net.graph);
  const double plateau = static_cast<double>(nid.value()) / static_cast<double>(total.value());
  std::vector<double> fractions;
  for (int i = 0; i < 29; ++i) fractions.push_back(std::min(1.0, 1.5 * plateau * i / 28.0));
  fractions.push_back(plateau);
  std::sort(fractions.begin(), fractions.end());

  const auto start = Clock::now();
  const auto curve = multiplier_curve(net.graph, fractions);
  const double elapsed = ms_since(start) / 1000.0;

  bool monotone = true, slope_ok = true, plateau_ok = true;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    monotone = monotone && curve[i].cleared >= curve[i - 1].cleared;
    // incremental slope in whole units: added debt cleared per added unit of liquidity
    if (curve[i].budget <= nid && curve[i].budget > curve[i - 1].budget) {
      slope_ok = slope_ok && (curve[i].cleared - curve[i - 1].cleared) >= (curve[i].budget - curve[i - 1].budget);
    }
  }
  for (const auto& p : curve) {
    if (p.budget >= nid) plateau_ok = plateau_ok && p.debt_cleared_fraction() == 1.0;
    if (p.budget < nid) plateau_ok = plateau_ok && p.debt_cleared_fraction() < 1.0;
  }
  const double first_slope = (curve[1].debt_cleared_fraction() - curve[0].debt_cleared_fraction()) /
                             (curve[1].liquidity_fraction - curve[0].liquidity_fraction);
  const bool budget_hits_nid = budget_for_fraction(plateau, total) == nid;
  return {monotone && slope_ok && plateau_ok && budget_hits_nid && elapsed < 30.0,
          fmt("points=%zu monotone=%d slope_ok=%d initial_slope=%.3f plateau@%.4f=%d "
              "setoff=%.4f sweep=%.2fs",
              curve.size(), monotone, slope_ok, first_slope, plateau, plateau_ok && budget_hits_nid,
              curve[0].debt_cleared_fraction(), elapsed)};
}

int sh(const std::string& command) {
  return std::system((command + " >/dev/null 2>&1").c_str());
}

Outcome replay(const std::string& cli, const fs::path& data) {
  std::vector<std::string> runs;
  for (int round = 0; round < 2; ++round) {
    const fs::path store = scratch("replay" + std::to_string(round));
    const std::string base = "'" + cli + "' --store '" + store.string() + "' ";
    int rc = sh(base + "register --keys '" + (data / "keys.json").string() + "'");
    rc |= sh(base + "fund --agent Alice --asset USD --amount 20");
    rc |= sh(base + "submit '" + (data / "triangle.jsonl").string() + "'");
    rc |= sh(base + "submit '" + (data / "chain.jsonl").string() + "'");
    rc |= sh(base + "freeze");
    rc |= sh(base + "run --seed 7");
    rc |= sh(base + "submit '" + (data / "p2p.jsonl").string() + "'");
    rc |= sh(base + "freeze");
    rc |= sh(base + "run --seed 7 --budget 15");
    if (rc != 0) return {false, "cli invocation failed in round " + std::to_string(round)};
    std::string bytes;
    for (const char* epoch : {"0", "1"}) {
      for (const char* file : {"flow.json", "report.json"}) {
        bytes += engine_detail::read_file(store / "epochs" / epoch / file);
      }
    }
    runs.push_back(bytes);
  }
  return {runs[0] == runs[1] && !runs[0].empty(),
          fmt("2 epochs x flow+report, %zu bytes, identical=%d", runs[0].size(), runs[0] == runs[1])};
}

Outcome atomicity() {
  std::vector<std::string> points{"validated", "applied_written"};
  for (std::string_view stage : kApplyStages) points.emplace_back(stage);
  int identical = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    SyntheticGraphConfig config;
    config.n_firms = 5 + trial % 10;
    config.n_edges = 3 * config.n_firms;
    config.seed = static_cast<std::uint64_t>(100 + trial);
    SyntheticNetwork net = generate(config);
    add_default_liquidity(net);

    Store store = Store::open(scratch("fault" + std::to_string(trial)));
    for (int i = 0; i < config.n_firms; ++i) {
      const AgentId firm(synthetic_firm_name(i));
      store.register_key(firm, synthetic_key(firm));
    }
    for (const Tender& t : net.pool.tenders) store.fund(t.sender, t.currency, t.max_amount);
    for (const auto& p : net.pool.obligations) store.submit(p.obligation);
    for (const Tender& t : net.pool.tenders) store.submit(t);
    store.freeze();

    const std::string before = engine_detail::read_file(store.dir() / "ledger.json");
    const std::string point = points[static_cast<std::size_t>(trial) % points.size()];
    EngineHooks hooks;
    hooks.at_step = [&](std::string_view at) {
      if (at == point) throw std::runtime_error("injected");
    };
    hooks.apply.at_stage = hooks.at_step;
    bool faulted = false;
    try {
      store.run({}, hooks);
    } catch (const std::runtime_error&) {
      faulted = true;
    }
    if (faulted && engine_detail::read_file(store.dir() / "ledger.json") == before) ++identical;
  }
  return {identical == trials, fmt("ledger identical after %d/%d injected faults", identical, trials)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <clearing-cli> <data-dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path data = argv[2];

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 triangle exactness", triangle_exactness},
      {"AC2 chain clearing", chain_clearing},
      {"AC3 p2p loan", p2p_loan},
      {"AC4 NID saturation", nid_saturation},
      {"AC5 oracle equivalence", oracle_equivalence},
      {"AC6 validity predicate", validity_predicate},
      {"AC7 multiplier curve", multiplier_curve_shape},
      {"AC8 deterministic replay", [&] { return replay(cli, data); }},
      {"AC9 atomicity", atomicity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / ("clearing-acceptance-" + std::to_string(::getpid())));
  return failed == 0 ? 0 : 1;
}
