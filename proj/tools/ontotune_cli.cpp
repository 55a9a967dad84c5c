// ontotune: trace-driven arm-selection pipeline over a knowledge-graph store.
//
// Subcommands:
//   ingest  validate a trace and populate a store with its queries/plans/arms
//   run     execute the batched online loop and write run artifacts
//   report  rebuild the curve table and summary from stored records alone
//   check   run the built-in verification suite

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ontotune/checks.hpp"
#include "ontotune/kg_store.hpp"
#include "ontotune/simulator.hpp"
#include "ontotune/trace.hpp"

namespace fs = std::filesystem;
using namespace ontotune;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
}

void remove_if_present(const fs::path& path) {
  std::error_code ec;
  fs::remove(path, ec);
}

int cmd_ingest(const std::string& trace_path, const std::string& store_path) {
  TraceBundle trace = load_trace(trace_path);
  KgStore store = KgStore::open(store_path);
  for (const auto& arm : trace.arms) store.put(arm);
  EnvironmentSnapshot env;
  env.env_id = "sim";
  env.dataset_tag = trace.name;
  env.hardware_tag = "trace-replay";
  store.put(env);
  for (const auto& e : trace.entries) {
    ParsedQuery pq = parse_sql_subset(e.sql_text);
    QueryRecord q;
    q.query_id = e.query_id;
    q.sql_text = e.sql_text;
    q.template_id = e.template_id;
    q.referenced_tables = pq.table_list();
    q.referenced_columns = pq.column_list();
    store.put(q);
    for (int a = 0; a < trace.arm_count; ++a) {
      PlanTree plan = ingest_plan(e.plan_docs[static_cast<std::size_t>(a)], q.referenced_columns,
                                  e.query_id + "/arm" + std::to_string(a));
      plan.query_id = e.query_id;
      store.put(plan);
    }
  }
  std::cout << trace.entries.size() << " queries, " << trace.arm_count << " arms\n";
  std::cout << store.plan_count() << " plans stored in " << store_path << "\n";
  return 0;
}

int cmd_run(const std::string& trace_path, const std::string& config_path,
            const std::string& out_dir, std::optional<std::uint64_t> seed_override,
            bool baseline_only, bool print_config) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  if (seed_override) cfg.seed = *seed_override;
  if (baseline_only) cfg.baseline_only = true;
  cfg.validate();
  if (print_config) {
    std::cout << cfg.to_text();
    return 0;
  }
  if (trace_path.empty()) throw ConfigError("run requires --trace");
  if (out_dir.empty()) throw ConfigError("run requires --out");

  TraceBundle trace = load_trace(trace_path, cfg.c_max);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  for (const char* name : {"store.ndjson", "baseline_store.ndjson", "report.tsv", "summary.json",
                           "decisions.ndjson", "checkpoint.json", "config.txt"})
    remove_if_present(out / name);

  KgStore store = KgStore::open(out / "store.ndjson");
  RunReport report = run_online(trace, cfg, store);

  if (!cfg.baseline_only) {
    // Companion baseline replay: its store alone reconstructs the default-arm
    // curve. Noise never applies to the baseline series.
    RunConfig bcfg = cfg;
    bcfg.baseline_only = true;
    bcfg.noise_std = 0.0;
    KgStore bstore = KgStore::open(out / "baseline_store.ndjson");
    run_online(trace, bcfg, bstore);
  }

  write_file(out / "report.tsv", report_table(report));
  write_file(out / "summary.json", report_summary(report, cfg).dump(2) + "\n");
  write_file(out / "config.txt", cfg.to_text());
  std::string decisions;
  for (const auto& d : report.decisions) decisions += d.to_json().dump() + "\n";
  write_file(out / "decisions.ndjson", decisions);
  if (report.checkpoint) report.checkpoint->save(out / "checkpoint.json");

  std::cout << report.query_count << " queries executed\n";
  std::cout << "baseline total: " << format_double(report.baseline_total) << " ms\n";
  if (!report.single_series) {
    std::cout << "learned total:  " << format_double(report.learned_total) << " ms\n";
    std::cout << "oracle total:   " << format_double(report.oracle_total) << " ms\n";
  }
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& out_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / "store.ndjson"))
    throw ValidationError("no store.ndjson under " + run_dir);
  KgStore store = KgStore::open(dir / "store.ndjson");
  if (store.execution_count() == 0) throw ValidationError("store has no execution records");

  std::optional<KgStore> baseline;
  if (fs::exists(dir / "baseline_store.ndjson"))
    baseline = KgStore::open(dir / "baseline_store.ndjson");

  RunReport report = series_from_stores(store, baseline ? &*baseline : nullptr);

  const fs::path out = out_dir.empty() ? dir / "reconstructed" : fs::path(out_dir);
  fs::create_directories(out);
  write_file(out / "report.tsv", report_table(report));
  nlohmann::json summary;
  summary["queries"] = report.query_count;
  summary["baseline_total_ms"] = report.baseline_total;
  if (!report.single_series) summary["learned_total_ms"] = report.learned_total;
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "reconstructed " << report.query_count << " queries -> " << out.string() << "\n";
  return 0;
}

int cmd_check(double gradient_fault) {
  CheckOptions opts;
  opts.gradient_fault = gradient_fault;
  auto results = run_builtin_checks(opts);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS" : "FAIL") << " " << r.name << ": " << r.detail << "\n";
    if (!r.passed) ++failed;
  }
  return std::min(failed, 125);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ontology-driven arm selection over trace replay"};
  app.require_subcommand(1);

  std::string trace_path, store_path, config_path, out_dir, run_dir;
  std::optional<std::uint64_t> seed;
  bool baseline_only = false;
  bool print_config = false;

  auto* ingest = app.add_subcommand("ingest", "validate a trace and populate a store");
  ingest->add_option("--trace", trace_path, "trace file")->required();
  ingest->add_option("--store", store_path, "store file to create or append")->required();

  auto* run = app.add_subcommand("run", "execute the online loop over a trace");
  run->add_option("--trace", trace_path, "trace file");
  run->add_option("--config", config_path, "key = value config file");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override the config seed");
  run->add_flag("--baseline-only", baseline_only, "replay the default arm only");
  run->add_flag("--print-config", print_config, "print the effective config and exit");

  auto* report = app.add_subcommand("report", "rebuild report files from stored records");
  report->add_option("--run", run_dir, "run directory")->required();
  report->add_option("--out", out_dir, "output directory (default <run>/reconstructed)");

  auto* check = app.add_subcommand("check", "run the built-in verification suite");
  double gradient_fault = 0.0;
  check->add_option("--inject-gradient-fault", gradient_fault,
                    "test hook: bias the analytic gradients by this amount")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(trace_path, store_path);
    if (run->parsed())
      return cmd_run(trace_path, config_path, out_dir, seed, baseline_only, print_config);
    if (report->parsed()) return cmd_report(run_dir, out_dir);
    if (check->parsed()) return cmd_check(gradient_fault);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
