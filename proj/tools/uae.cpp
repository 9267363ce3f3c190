// Command-line front end: ingest, gen-workload, train, estimate, eval, refine.
#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uae/data.hpp"
#include "uae/error.hpp"
#include "uae/evaluate.hpp"
#include "uae/model.hpp"
#include "uae/trainer.hpp"
#include "uae/workload.hpp"

namespace {

using namespace uae;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path));
  out << text;
}

struct IngestArgs {
  std::string csv;
  std::string out;
  std::string delimiter = ",";
  bool no_header = false;
  std::optional<std::string> numeric;
};

int run_ingest(const IngestArgs& a) {
  if (a.delimiter.size() != 1) throw ValidationError("delimiter must be a single character");
  CsvOptions opts;
  opts.header = !a.no_header;
  opts.delimiter = a.delimiter[0];
  if (a.numeric) opts.numeric_columns = split_list(*a.numeric);
  const auto table = ingest_csv(a.csv, opts);
  save_table(table, a.out);
  fmt::print("{} rows, {} columns -> {}\n", table.row_count(), table.num_columns(), a.out);
  return 0;
}

int run_schema(const std::string& table_path) {
  const auto table = load_table(table_path);
  fmt::print("{}\n", schema_summary(table.schema()).dump(2));
  return 0;
}

struct GenArgs {
  std::string table;
  std::string out;
  WorkloadSpec spec;
};

int run_gen_workload(const GenArgs& a) {
  const auto table = load_table(a.table);
  const auto w = generate_workload(table, a.spec);
  write_workload(a.out + ".train.jsonl", w.train);
  write_workload(a.out + ".test_in.jsonl", w.test_in_workload);
  write_workload(a.out + ".test_random.jsonl", w.test_random);
  fmt::print("{} train, {} in-workload test, {} random test queries -> {}.*.jsonl\n", w.train.size(),
             w.test_in_workload.size(), w.test_random.size(), a.out);
  return 0;
}

struct TrainArgs {
  std::string table;
  std::string workload;
  std::string init;
  std::string out;
  std::string mode = "hybrid";
  std::string checkpoint_dir;
  std::string log;
  int layers = 2;
  int units = 128;
  TrainingConfig config;
};

int run_train(TrainArgs a) {
  a.config.mode = parse_mode(a.mode);
  a.config.checkpoint_dir = a.checkpoint_dir;
  a.config.log_path = a.log;

  std::optional<EncodedTable> table;
  std::optional<ModelFile> warm;
  if (!a.table.empty()) table = load_table(a.table);
  if (!a.init.empty()) warm = load_model(a.init);
  if (!table && !warm) throw ValidationError("train needs --table or --init to know the schema");
  if (a.config.mode != TrainMode::query_only && !table) throw ValidationError("data training needs --table");

  TrainingData data;
  data.schema = table ? table->schema() : warm->schema;
  data.row_count = table ? table->row_count() : warm->row_count;
  if (table && a.config.mode != TrainMode::query_only) data.table = &*table;
  if (!a.workload.empty()) data.queries = read_workload(a.workload);

  ResMade model;
  if (warm) {
    if (table && schema_summary(warm->schema) != schema_summary(table->schema())) {
      throw ValidationError("--init model was trained on a different schema");
    }
    model = std::move(warm->model);
  } else {
    ModelConfig mc;
    mc.hidden_layers = a.layers;
    mc.hidden_units = a.units;
    mc.seed = a.config.seed;
    model = ResMade(mc, InputEncoding(data.schema));
  }
  const auto log = hybrid_train(model, data, a.config);
  save_model(a.out, model, data.schema, data.row_count);
  if (!log.empty()) {
    const auto& last = log.back();
    fmt::print("{} steps, final L={:.6f} (data {:.6f}, query {:.6f}) -> {}\n", log.size(), last.loss, last.data_loss,
               last.query_loss, a.out);
  } else {
    fmt::print("no steps run -> {}\n", a.out);
  }
  return 0;
}

std::vector<Query> plain_queries(const std::vector<LabeledQuery>& labeled) {
  std::vector<Query> out;
  out.reserve(labeled.size());
  for (const auto& q : labeled) out.push_back(q.query);
  return out;
}

struct EstimateArgs {
  std::string model;
  std::string workload;
  std::string out;
  SamplerConfig sampler;
};

int run_estimate(const EstimateArgs& a) {
  const auto mf = load_model(a.model);
  const auto queries = plain_queries(read_workload(a.workload));
  const auto est = estimate_queries(mf.model, mf.schema, mf.row_count, queries, a.sampler);
  std::string csv = "index,estimate,selectivity,latency_ms\n";
  for (std::size_t i = 0; i < est.size(); ++i) {
    csv += fmt::format("{},{:.17g},{:.17g},{:.3f}\n", i, est[i].cardinality, est[i].selectivity, est[i].ms);
  }
  if (a.out.empty()) {
    fmt::print("{}", csv);
  } else {
    write_text(a.out, csv);
  }
  return 0;
}

struct EvalArgs {
  std::vector<std::string> workloads;
  std::string model;
  std::string out;
  std::string report;
  SamplerConfig sampler;
};

int run_eval(const EvalArgs& a) {
  const auto mf = load_model(a.model);
  std::vector<ErrorReport> reports;
  std::string per_query = "suite,index,true,estimate,qerror,latency_ms\n";
  for (const auto& path : a.workloads) {
    const auto labeled = read_workload(path);
    const auto est = estimate_queries(mf.model, mf.schema, mf.row_count, plain_queries(labeled), a.sampler);
    std::vector<double> errors;
    std::vector<double> latency;
    const std::string suite = std::filesystem::path(path).filename().string();
    for (std::size_t i = 0; i < est.size(); ++i) {
      const double q = labeled_qerror(labeled[i].cardinality, est[i].selectivity, mf.row_count);
      errors.push_back(q);
      latency.push_back(est[i].ms);
      per_query += fmt::format("{},{},{},{:.17g},{:.17g},{:.3f}\n", suite, i, labeled[i].cardinality,
                               est[i].cardinality, q, est[i].ms);
    }
    reports.push_back({suite, summarize(errors), summarize(latency)});
  }
  fmt::print("{}", format_report_text(reports, true));
  if (!a.out.empty()) write_text(a.out, per_query);
  if (!a.report.empty()) write_text(a.report, format_report_csv(reports));
  return 0;
}

struct RefineArgs {
  std::string model;
  std::string data;
  std::string workload;
  std::string out;
  std::string delimiter = ",";
  bool no_header = false;
  int epochs = 15;
  TrainingConfig config;
};

int run_refine(RefineArgs a) {
  if (!a.data.empty() && !a.workload.empty()) throw ValidationError("refine takes new data or a new workload, not both");
  if (a.data.empty() && a.workload.empty()) throw ValidationError("refine needs --data or --workload");
  auto mf = load_model(a.model);
  std::uint64_t row_count = mf.row_count;
  if (!a.data.empty()) {
    if (a.delimiter.size() != 1) throw ValidationError("delimiter must be a single character");
    CsvOptions opts;
    opts.header = !a.no_header;
    opts.delimiter = a.delimiter[0];
    const auto records = read_csv(a.data, opts);
    EncodedTable rows(mf.schema, encode_records(mf.schema, records.rows));
    row_count += rows.row_count();
    incremental_ingest_data(mf.model, mf.schema, rows, row_count, a.epochs, a.config);
  } else {
    const auto queries = read_workload(a.workload);
    incremental_ingest_workload(mf.model, mf.schema, queries, row_count, a.epochs, a.config);
  }
  save_model(a.out, mf.model, mf.schema, row_count);
  fmt::print("refined for {} epochs -> {}\n", a.epochs, a.out);
  return 0;
}

void add_training_flags(CLI::App* cmd, TrainingConfig& c) {
  cmd->add_option("--lambda", c.lambda, "weight of the query loss")->capture_default_str();
  cmd->add_option("--tau", c.sampler.tau, "Gumbel-Softmax temperature")->capture_default_str();
  cmd->add_option("--samples", c.sampler.samples, "DPS samples per query")->capture_default_str();
  cmd->add_option("--lr", c.adam.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch", c.data_batch, "tuples per step")->capture_default_str();
  cmd->add_option("--query-batch", c.query_batch, "queries per step")->capture_default_str();
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardinality estimation with a deep autoregressive model trained on data and queries"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "dictionary-encode a CSV file");
  c_ingest->add_option("csv", ingest.csv, "input CSV")->required();
  c_ingest->add_option("--out", ingest.out, "table file")->required();
  c_ingest->add_option("--delimiter", ingest.delimiter, "field separator")->capture_default_str();
  c_ingest->add_flag("--no-header", ingest.no_header, "first line is data");
  c_ingest->add_option("--numeric", ingest.numeric, "comma-separated numeric columns (default: detect)");

  std::string schema_table;
  auto* c_schema = app.add_subcommand("schema", "print the schema of a table file");
  c_schema->add_option("--table", schema_table, "table file")->required();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-workload", "generate labeled training and test queries");
  c_gen->add_option("--table", gen.table, "table file")->required();
  c_gen->add_option("--out", gen.out, "output prefix")->required();
  c_gen->add_option("--bounded-column", gen.spec.bounded_column, "default: largest domain");
  c_gen->add_option("--target-volume", gen.spec.target_volume)->capture_default_str();
  c_gen->add_option("--center-lo", gen.spec.center_lo)->capture_default_str();
  c_gen->add_option("--center-hi", gen.spec.center_hi)->capture_default_str();
  c_gen->add_option("--min-filters", gen.spec.n_filters_min)->capture_default_str();
  c_gen->add_option("--train-count", gen.spec.train_count)->capture_default_str();
  c_gen->add_option("--test-count", gen.spec.test_count)->capture_default_str();
  c_gen->add_option("--seed", gen.spec.seed)->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train a model");
  c_train->add_option("--table", train.table, "table file");
  c_train->add_option("--workload", train.workload, "labeled queries (JSON Lines)");
  c_train->add_option("--init", train.init, "warm-start from this model");
  c_train->add_option("--out", train.out, "model file")->required();
  c_train->add_option("--mode", train.mode, "data-only, query-only or hybrid")->capture_default_str();
  c_train->add_option("--epochs", train.config.epochs)->capture_default_str();
  c_train->add_option("--layers", train.layers, "hidden layers")->capture_default_str();
  c_train->add_option("--units", train.units, "hidden units")->capture_default_str();
  c_train->add_option("--checkpoint-dir", train.checkpoint_dir, "write a model file per epoch");
  c_train->add_option("--log", train.log, "per-step CSV log");
  add_training_flags(c_train, train.config);

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "estimate cardinalities with progressive sampling");
  c_est->add_option("--model", est.model, "model file")->required();
  c_est->add_option("--workload", est.workload, "queries (JSON Lines)")->required();
  c_est->add_option("--samples", est.sampler.samples)->capture_default_str();
  c_est->add_option("--seed", est.sampler.seed)->capture_default_str();
  c_est->add_option("--out", est.out, "CSV output (default: stdout)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "q-error statistics over labeled queries");
  c_eval->add_option("--model", ev.model, "model file")->required();
  c_eval->add_option("--workload", ev.workloads, "labeled queries (JSON Lines), repeatable")->required();
  c_eval->add_option("--samples", ev.sampler.samples)->capture_default_str();
  c_eval->add_option("--seed", ev.sampler.seed)->capture_default_str();
  c_eval->add_option("--out", ev.out, "per-query CSV");
  c_eval->add_option("--report", ev.report, "summary CSV");

  RefineArgs refine;
  auto* c_refine = app.add_subcommand("refine", "incremental training on new data or a new workload");
  c_refine->add_option("--model", refine.model, "model file")->required();
  c_refine->add_option("--data", refine.data, "new rows (CSV)");
  c_refine->add_option("--workload", refine.workload, "new labeled queries (JSON Lines)");
  c_refine->add_option("--out", refine.out, "refined model file")->required();
  c_refine->add_option("--epochs", refine.epochs)->capture_default_str();
  c_refine->add_option("--delimiter", refine.delimiter)->capture_default_str();
  c_refine->add_flag("--no-header", refine.no_header);
  add_training_flags(c_refine, refine.config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_ingest) return run_ingest(ingest);
    if (*c_schema) return run_schema(schema_table);
    if (*c_gen) return run_gen_workload(gen);
    if (*c_train) return run_train(train);
    if (*c_est) return run_estimate(est);
    if (*c_eval) return run_eval(ev);
    if (*c_refine) return run_refine(refine);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 3;
  }
  return 2;
}
