// clearing: command-line front end for a file-backed clearing store.
//
// Errors are printed to stderr as one JSON object {"error": ..., "message": ...}
// and the process exits nonzero (1 failure, 2 usage, 3 epoch failed validation).

#include <iostream>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "clearing/engine.hpp"
#include "clearing/experiments.hpp"

namespace {

using namespace clearing;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitEpochFailed = 3;

int fail(std::string_view code, const std::string& message, int status = kExitFailure,
         const Json& detail = nullptr) {
  Json j;
  j["error"] = code;
  j["message"] = message;
  if (!detail.is_null()) j["detail"] = detail;
  std::cerr << j.dump() << "\n";
  return status;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(engine_detail::read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    engine_detail::write_atomic(path, text);
  }
}

// "0,0.01,0.3" or "start:stop:step".
std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(ErrorCode::kInvalidArgument, "bad fraction: " + s);
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Error(ErrorCode::kInvalidArgument, "range is start:stop:step");
    const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
    if (step <= 0) throw Error(ErrorCode::kInvalidArgument, "step must be positive");
    const auto count = static_cast<int>(std::floor((stop - start) / step + 1e-9));
    for (int i = 0; i <= count; ++i) out.push_back(start + step * i);
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  return out;
}

SyntheticGraphConfig synthetic_config(const Json& j, LiquidityPlacement& placement,
                                      std::uint64_t& solver_seed) {
  SyntheticGraphConfig c;
  c.n_firms = j.value("n_firms", c.n_firms);
  c.n_edges = j.value("n_edges", c.n_edges);
  const std::string dist = j.value("distribution", std::string("uniform"));
  if (dist == "uniform") {
    c.distribution = AmountDistribution::kUniform;
  } else if (dist == "lognormal") {
    c.distribution = AmountDistribution::kLognormal;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "distribution must be uniform or lognormal");
  }
  c.lo = j.value("lo", c.lo);
  c.hi = j.value("hi", c.hi);
  c.mu = j.value("mu", c.mu);
  c.sigma = j.value("sigma", c.sigma);
  c.seed = j.value("seed", c.seed);
  const std::string where = j.value("placement", std::string("net_debtors"));
  if (where == "net_debtors") {
    placement = LiquidityPlacement::kNetDebtors;
  } else if (where == "all_debtors") {
    placement = LiquidityPlacement::kAllDebtors;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "placement must be net_debtors or all_debtors");
  }
  solver_seed = j.value("solver_seed", std::uint64_t{0});
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilateral obligation clearing engine"};
  app.require_subcommand(1);
  std::string store_dir = "clearing-store";
  std::string unit;
  std::size_t quota = 0;
  app.add_option("--store", store_dir, "Store directory")->capture_default_str();
  app.add_option("--unit", unit, "Unit of account (fixed when the store is created)");
  app.add_option("--quota", quota, "Per-agent pool quota for a new store (0 = unlimited)");

  std::string submit_file;
  auto* submit = app.add_subcommand("submit", "Submit intents from a JSONL file");
  submit->add_option("file", submit_file, "Intent file, one JSON object per line")->required();

  auto* freeze = app.add_subcommand("freeze", "Freeze the open epoch");

  std::optional<std::int64_t> budget;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Solve, validate and apply the frozen epoch");
  run->add_option("--budget", budget, "Cap on liquidity injected, unit of account");
  run->add_option("--seed", seed, "Arc-order seed; 0 keeps canonical order")->capture_default_str();

  std::optional<std::int64_t> report_epoch;
  std::string format = "json";
  auto* report = app.add_subcommand("report", "Print an epoch report or its notices");
  report->add_option("--epoch", report_epoch, "Epoch id (default: latest reported)");
  report->add_option("--format", format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  auto* nid = app.add_subcommand("nid", "Net positions and NID of what is pending");

  std::string config_file, fractions_text = "0:0.3:0.01", out_file;
  auto* simulate = app.add_subcommand("simulate", "Liquidity-multiplier curve on a synthetic graph");
  simulate->add_option("--config", config_file, "Synthetic graph config (JSON)")->required();
  simulate->add_option("--fractions", fractions_text, "Comma list or start:stop:step")->capture_default_str();
  simulate->add_option("--out", out_file, "CSV output path (default stdout)");

  std::string agent, key_hex, keys_file, key_seed;
  auto* keygen = app.add_subcommand("keygen", "Print a new key as hex");
  keygen->add_option("--seed", key_seed, "Derive deterministically from this seed");

  auto* reg = app.add_subcommand("register", "Register verification keys");
  reg->add_option("--agent", agent, "Agent id");
  reg->add_option("--key", key_hex, "Hex key");
  reg->add_option("--keys", keys_file, "JSON object agent -> hex key");

  std::string sign_in, sign_out;
  auto* sign = app.add_subcommand("sign", "Sign intents in a JSONL file");
  sign->add_option("file", sign_in, "Unsigned intents")->required();
  sign->add_option("--keys", keys_file, "JSON object agent -> hex key")->required();
  sign->add_option("--out", sign_out, "Output path (default stdout)");

  std::string asset;
  std::int64_t fund_amount = 0;
  auto* fund = app.add_subcommand("fund", "Credit an agent's balance at a liquidity source");
  fund->add_option("--agent", agent, "Agent id")->required();
  fund->add_option("--asset", asset, "Asset code")->required();
  fund->add_option("--amount", fund_amount, "Amount in minor units")->required();

  std::string cancel_id;
  auto* cancel = app.add_subcommand("cancel", "Withdraw a pooled intent before freeze");
  cancel->add_option("id", cancel_id, "Intent id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitUsage);
  }

  try {
    if (*keygen) {
      SigningKey key{};
      if (key_seed.empty()) {
        ascertain_detail::ensure_sodium();
        crypto_auth_keygen(key.data());
      } else {
        key = derive_key(key_seed);
      }
      std::cout << to_hex(key) << "\n";
      return 0;
    }
    if (*sign) {
      std::map<AgentId, SigningKey> secrets;
      const Json table = engine_detail::read_json(keys_file);
      for (const auto& [name, hex] : table.items()) {
        secrets.emplace(AgentId(name), key_from_hex(hex.get<std::string>()));
      }
      std::string text;
      for (const std::string& line : read_lines(sign_in)) {
        Intent intent = parse_intent_line(line);
        const auto it = secrets.find(bound_party(intent));
        if (it == secrets.end()) {
          throw Error(ErrorCode::kInvalidArgument, "no key for " + bound_party(intent).str());
        }
        std::visit([&](auto& x) { x.ascertainment = ascertain(x, it->second); }, intent);
        text += to_json(intent).dump() + "\n";
      }
      write_output(sign_out, text);
      return 0;
    }
    if (*simulate) {
      LiquidityPlacement placement{};
      std::uint64_t solver_seed = 0;
      const SyntheticGraphConfig config =
          synthetic_config(engine_detail::read_json(config_file), placement, solver_seed);
      SyntheticNetwork net = generate(config);
      add_default_liquidity(net, placement);
      write_output(out_file, curve_csv(multiplier_curve(net.graph, parse_fractions(fractions_text), solver_seed)));
      return 0;
    }

    StoreConfig fresh;
    if (!unit.empty()) {
      fresh.epoch.unit = unit;
      fresh.epoch.default_currency = unit;
    }
    fresh.quota = quota;
    Store store = Store::open(store_dir, fresh);
    if (!unit.empty() && store.config().epoch.unit != unit) {
      throw Error(ErrorCode::kInvalidArgument,
                  "store unit is " + store.config().epoch.unit + ", not " + unit);
    }

    if (*submit) {
      Json rejected = Json::array();
      for (const std::string& line : read_lines(submit_file)) {
        std::string id = "?";
        try {
          const Intent intent = parse_intent_line(line);
          id = intent_id(intent);
          const std::int64_t epoch = store.submit(intent);
          std::cout << Json{{"id", id}, {"epoch", epoch}}.dump() << "\n";
        } catch (const Error& e) {
          rejected.push_back({{"id", id}, {"error", error_code_name(e.code())}, {"message", e.what()}});
        }
      }
      if (!rejected.empty()) {
        return fail("rejected", std::to_string(rejected.size()) + " intent(s) rejected", kExitFailure,
                    rejected);
      }
      return 0;
    }
    if (*freeze) {
      const std::int64_t epoch = store.freeze();
      std::cout << Json{{"epoch", epoch}, {"state", "Frozen"}}.dump() << "\n";
      return 0;
    }
    if (*run) {
      RunOptions options;
      if (budget) options.budget = Amount(*budget);
      options.seed = seed;
      const RunResult result = store.run(options);
      std::cout << engine_detail::dump(result.report);
      if (result.state == EpochState::kFailed) {
        return fail("validation", "epoch " + std::to_string(result.epoch_id) + " failed validation",
                    kExitEpochFailed, result.report.at("validation"));
      }
      return 0;
    }
    if (*report) {
      std::int64_t epoch = 0;
      if (report_epoch) {
        epoch = *report_epoch;
      } else if (auto last = store.last_reported_epoch()) {
        epoch = *last;
      } else {
        throw Error(ErrorCode::kState, "no epoch has been run yet");
      }
      if (format == "csv") {
        std::cout << notices_csv(store.notices(epoch));
      } else {
        std::cout << engine_detail::dump(store.report(epoch));
      }
      return 0;
    }
    if (*nid) {
      const ObligationGraph g = store.preview_graph();
      Json j;
      j["epoch"] = store.current_epoch();
      j["total_debt"] = g.total_debt().value();
      j["nid"] = compute_nid(g).value();
      j["positions"] = Json::array();
      for (const NetPosition& p : net_positions(g)) {
        j["positions"].push_back({{"agent", p.agent.str()},
                                  {"payables", p.payables.value()},
                                  {"receivables", p.receivables.value()},
                                  {"net", p.net}});
      }
      std::cout << engine_detail::dump(j);
      return 0;
    }
    if (*reg) {
      if (!keys_file.empty()) {
        const Json table = engine_detail::read_json(keys_file);
        for (const auto& [name, hex] : table.items()) {
          store.register_key(AgentId(name), key_from_hex(hex.get<std::string>()));
        }
      }
      if (!agent.empty()) {
        if (key_hex.empty()) throw Error(ErrorCode::kInvalidArgument, "--agent needs --key");
        store.register_key(AgentId(agent), key_from_hex(key_hex));
      }
      return 0;
    }
    if (*fund) {
      store.fund(AgentId(agent), asset, Amount(fund_amount));
      return 0;
    }
    if (*cancel) {
      store.cancel(cancel_id);
      return 0;
    }
  } catch (const Error& e) {
    return fail(error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
