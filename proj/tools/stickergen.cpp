// Copyright 2026 The Stickergen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// stickergen: command line front end.
//
// Commands share a work directory:
//
//   data/      gen-data          corpus, logs, train/test pairs, planted intents
//   index/     build-index       identifier bundle
//   users.bin  train-user-emb    frozen group vectors
//   intents.tsv resolve-intents  resolved query intent table
//   model.bin  train             sequence model checkpoint
//   reports/   eval-offline, simulate-online, ablate-ids

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "stickergen/pipeline.hpp"

namespace fs = std::filesystem;
using namespace stickergen;

namespace {

struct Common {
  std::string work = "work";
  std::string config_file;
  std::vector<std::string> sets;

  RunConfig resolve() const {
    RunConfig c;
    if (!config_file.empty()) c.merge_file(config_file);
    for (const auto& s : sets) c.set(s);
    return c;
  }
  std::string path(const std::string& rel) const { return (fs::path(work) / rel).string(); }
  std::string data(const std::string& file) const { return path("data/" + file); }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-w,--work", c.work, "work directory")->capture_default_str();
  cmd->add_option("-c,--config", c.config_file, "key=value config file");
  cmd->add_option("-s,--set", c.sets, "config override key=value (repeatable)");
}

void require_file(const std::string& path, const std::string& what, const std::string& producer) {
  if (!fs::exists(path)) throw DependencyError(what + " '" + path + "' not found (run " + producer + ")");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

void write_json(const std::string& path, const nlohmann::json& j) {
  ensure_dir(fs::path(path).parent_path().string());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

Corpus load_data_corpus(const Common& c) {
  require_file(c.data("corpus.jsonl"), "corpus", "gen-data");
  LoadReport rep;
  Corpus corpus = load_corpus(c.data("corpus.jsonl"), &rep);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  return corpus;
}

std::vector<Triplet> load_train(const Common& c, const Corpus& corpus) {
  require_file(c.data("train.jsonl"), "training triplets", "gen-data");
  return load_triplets(c.data("train.jsonl"), corpus);
}

std::vector<QueryJudgments> load_test(const Common& c, const Corpus& corpus) {
  require_file(c.data("test.jsonl"), "test judgments", "gen-data");
  return load_judgments(c.data("test.jsonl"), corpus);
}

/// The resolved table when present, else the one shipped with the data.
IntentTable load_intents(const Common& c) {
  if (fs::exists(c.path("intents.tsv"))) return IntentTable::load(c.path("intents.tsv"));
  require_file(c.data("intents.tsv"), "intent table", "resolve-intents or gen-data");
  return IntentTable::load(c.data("intents.tsv"));
}

StickerIndex load_index(const Common& c) {
  require_file(c.path("index/manifest.json"), "index bundle", "build-index");
  return StickerIndex::load(c.path("index"));
}

SeqModel load_model(const std::string& path, const StickerIndex& index) {
  require_file(path, "model checkpoint", "train");
  return SeqModel::load(path, index.vocab);
}

/// Table lookups with the rule detector for unseen queries; nothing persisted.
pipeline::RankingFn lookup_or_rules(const IntentTable& table, const Corpus& corpus) {
  auto lx = std::make_shared<IntentLexicons>(IntentLexicons::from_corpus(corpus));
  return [&table, lx](const std::string& q) {
    if (auto r = table.find(q)) return *r;
    return detect_rule_based(q, *lx);
  };
}

UserEmbeddingTable user_table(const Common& c, const RunConfig& cfg, const Corpus& corpus, const IntentTable& intents) {
  if (fs::exists(c.path("users.bin"))) return load_user_table(c.path("users.bin"));
  std::cerr << "note: " << c.path("users.bin") << " missing, training user embeddings in-process\n";
  require_file(c.data("logs.jsonl"), "click logs", "gen-data");
  auto logs = load_click_logs(c.data("logs.jsonl"), corpus);
  return pipeline::train_users(cfg, logs, corpus, pipeline::make_embedder(cfg), lookup_or_rules(intents, corpus)).table;
}

// -- Commands --------------------------------------------------------------------

int cmd_gen_data(const Common& c) {
  RunConfig cfg = c.resolve();
  auto ds = generate_synthetic(pipeline::synthetic_config(cfg));
  ensure_dir(c.path("data"));
  save_synthetic(c.path("data"), ds);
  auto st = ds.corpus.stats();
  nlohmann::json r = {{"stickers", st.stickers},          {"distinct_ips", st.distinct_ips},
                      {"distinct_entities", st.distinct_entities}, {"distinct_styles", st.distinct_styles},
                      {"logs", ds.logs.size()},           {"train_triplets", ds.train.size()},
                      {"test_pairs", ds.test.size()},     {"queries", ds.intents.size()}};
  write_json(c.path("reports/gen-data.json"), report_json(cfg, "gen-data", r));
  std::cout << "wrote " << c.path("data") << ": " << st.stickers << " stickers, " << ds.train.size()
            << " training triplets, " << ds.test.size() << " test pairs\n";
  return 0;
}

nlohmann::json index_summary(const StickerIndex& idx) {
  nlohmann::json j = {{"scheme", std::string(scheme_name(idx.config.scheme))},
                      {"stickers", idx.size()},
                      {"vocab_size", idx.vocab.size()},
                      {"truncated", idx.stats.truncated}};
  for (Property p : kAllProperties) {
    j["k_used"][std::string(property_name(p))] = idx.stats.k_used[index_of(p)];
    j["distinct_codes"][std::string(property_name(p))] = idx.stats.distinct_codes[index_of(p)];
  }
  return j;
}

int cmd_build_index(const Common& c) {
  RunConfig cfg = c.resolve();
  Corpus corpus = load_data_corpus(c);
  auto queries = pipeline::query_texts(load_train(c, corpus), load_test(c, corpus));
  auto idx = pipeline::build_index(cfg, corpus, pipeline::make_embedder(cfg), queries);
  ensure_dir(c.path("index"));
  idx.save(c.path("index"));
  write_json(c.path("reports/build-index.json"), report_json(cfg, "build-index", index_summary(idx)));
  std::cout << "wrote " << c.path("index") << " (" << scheme_name(idx.config.scheme) << ", vocab " << idx.vocab.size()
            << ")\n";
  return 0;
}

int cmd_train_user_emb(const Common& c) {
  RunConfig cfg = c.resolve();
  Corpus corpus = load_data_corpus(c);
  require_file(c.data("logs.jsonl"), "click logs", "gen-data");
  auto logs = load_click_logs(c.data("logs.jsonl"), corpus);
  IntentTable intents = load_intents(c);
  auto res = pipeline::train_users(cfg, logs, corpus, pipeline::make_embedder(cfg), lookup_or_rules(intents, corpus));
  save_user_table(c.path("users.bin"), res.table);
  write_curve(c.path("users_curve.tsv"), res.curve);
  nlohmann::json r = {{"steps", res.curve.size()},
                      {"first_loss", res.curve.front().loss.total},
                      {"last_loss", res.curve.back().loss.total}};
  write_json(c.path("reports/train-user-emb.json"), report_json(cfg, "train-user-emb", r));
  std::cout << "wrote " << c.path("users.bin") << " (loss " << res.curve.front().loss.total << " -> "
            << res.curve.back().loss.total << ")\n";
  return 0;
}

int cmd_resolve_intents(const Common& c, const std::vector<std::string>& extra) {
  RunConfig cfg = c.resolve();
  IntentMode mode = parse_intent_mode(cfg.str("intent.mode"));
  Corpus corpus = load_data_corpus(c);
  std::set<std::string> qs;
  if (extra.empty()) {
    for (const auto& t : load_train(c, corpus)) qs.insert(t.query);
    for (const auto& j : load_test(c, corpus)) qs.insert(j.query);
    if (fs::exists(c.data("logs.jsonl")))
      for (const auto& r : load_click_logs(c.data("logs.jsonl"), corpus)) qs.insert(r.query);
  } else {
    qs.insert(extra.begin(), extra.end());
  }
  IntentTable seed_table;
  if (mode == IntentMode::kTableFirst && fs::exists(c.data("intents.tsv")))
    seed_table = IntentTable::load(c.data("intents.tsv"));
  std::optional<LlmClient> llm;
  LlmConfig lc = LlmConfig::from_env();
  if (mode == IntentMode::kLlm || (mode == IntentMode::kTableFirst && !lc.endpoint.empty()))
    llm.emplace(lc, http_chat_transport(lc));
  IntentResolver resolver(seed_table, IntentLexicons::from_corpus(corpus), mode, llm);
  std::vector<std::string> list(qs.begin(), qs.end());
  auto ranks = resolver.resolve_all(list, cfg.positive("intent.concurrency"));
  if (!extra.empty())
    for (std::size_t i = 0; i < list.size(); ++i) std::cout << list[i] << "\t" << ranks[i].symbols() << "\n";
  resolver.table().save(c.path("intents.tsv"));
  nlohmann::json r = {{"queries", list.size()},
                      {"table_size", resolver.table().size()},
                      {"detector_calls", resolver.detector_calls()},
                      {"llm_parse_fallbacks", resolver.llm_parse_fallbacks()},
                      {"prompt_template", hex64(prompt_template_hash())}};
  write_json(c.path("reports/resolve-intents.json"), report_json(cfg, "resolve-intents", r));
  std::cerr << "resolved " << list.size() << " queries (" << resolver.detector_calls() << " detector calls)\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& out_path) {
  RunConfig cfg = c.resolve();
  Corpus corpus = load_data_corpus(c);
  auto train = load_train(c, corpus);
  StickerIndex idx = load_index(c);
  if (idx.size() != corpus.size()) throw ValidationError("index and corpus disagree on sticker count (rerun build-index)");
  IntentTable intents = load_intents(c);
  std::optional<UserEmbeddingTable> users;
  if (cfg.flag("train.ue")) users = user_table(c, cfg, corpus, intents);
  std::ofstream log(c.path("train_log.jsonl"));
  auto res = pipeline::train_model(cfg, idx, corpus, train, lookup_or_rules(intents, corpus), users ? &*users : nullptr,
                                   [&](const TrainingLogEntry& e) {
                                     nlohmann::json j = {{"epoch", e.epoch},
                                                         {"steps", e.steps},
                                                         {"indexing_loss", e.indexing_loss},
                                                         {"retrieval_loss", e.retrieval_loss}};
                                     log << j.dump() << "\n";
                                     std::cerr << "epoch " << e.epoch + 1 << ": indexing " << e.indexing_loss
                                               << ", retrieval " << e.retrieval_loss << "\n";
                                   });
  std::string path = out_path.empty() ? c.path("model.bin") : out_path;
  res.model->save(path, cfg.hash());
  nlohmann::json r = {{"model", out_path.empty() ? std::string("model.bin") : out_path}, {"steps", res.report.steps}, {"epochs", res.report.epochs.size()}};
  if (!res.report.epochs.empty()) {
    r["final_indexing_loss"] = res.report.epochs.back().indexing_loss;
    r["final_retrieval_loss"] = res.report.epochs.back().retrieval_loss;
  }
  write_json(c.path("reports/train.json"), report_json(cfg, "train", r));
  std::cout << "wrote " << path << "\n";
  return 0;
}

std::optional<UserGroup> parse_group_opt(const std::string& g) {
  if (g.empty()) return std::nullopt;
  try {
    return UserGroup::parse(g);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

int cmd_retrieve(const Common& c, const std::string& query, const std::string& group, const std::string& model_path,
                 const std::string& format) {
  RunConfig cfg = c.resolve();
  StickerIndex idx = load_index(c);
  SeqModel model = load_model(model_path.empty() ? c.path("model.bin") : model_path, idx);
  Corpus corpus = load_data_corpus(c);
  IntentTable intents = load_intents(c);
  auto g = parse_group_opt(group);
  IntentRanking ranking = lookup_or_rules(intents, corpus)(query);
  auto res = funnel_retrieve(model, idx, g, query, ranking, pipeline::retrieve_options(cfg));
  if (format == "table") {
    std::cout << "intent " << ranking.symbols() << "\n";
    write_result_table(std::cout, res);
  } else if (format == "jsonl") {
    write_result_jsonl(std::cout, res, g, query);
  } else {
    throw ConfigError("unknown format '" + format + "' (jsonl, table)");
  }
  return 0;
}

int cmd_eval_offline(const Common& c, const std::string& model_path, const std::string& report) {
  RunConfig cfg = c.resolve();
  StickerIndex idx = load_index(c);
  SeqModel model = load_model(model_path.empty() ? c.path("model.bin") : model_path, idx);
  Corpus corpus = load_data_corpus(c);
  auto test = load_test(c, corpus);
  IntentTable intents = load_intents(c);
  auto ranker = pipeline::make_ranker(model, idx, lookup_or_rules(intents, corpus), pipeline::retrieve_options(cfg));
  MetricTable t = run_offline_eval(ranker, test);
  write_metric_table(std::cout, {{"system", t}});
  write_json(report.empty() ? c.path("reports/eval-offline.json") : report, report_json(cfg, "eval-offline", t.to_json()));
  return 0;
}

int cmd_simulate_online(const Common& c, const std::string& model_p, const std::string& model_b,
                        const std::vector<std::string>& baseline_sets, const std::string& report) {
  RunConfig cfg = c.resolve();
  RunConfig cfg_b = cfg;
  for (const auto& s : baseline_sets) cfg_b.set(s);
  if (model_b.empty() && baseline_sets.empty())
    throw ConfigError("simulate-online needs --baseline MODEL and/or --baseline-set key=value");
  StickerIndex idx = load_index(c);
  SeqModel mp = load_model(model_p.empty() ? c.path("model.bin") : model_p, idx);
  SeqModel mb = load_model(model_b.empty() ? (model_p.empty() ? c.path("model.bin") : model_p) : model_b, idx);
  Corpus corpus = load_data_corpus(c);
  auto test = load_test(c, corpus);
  IntentTable intents = load_intents(c);
  auto rank = lookup_or_rules(intents, corpus);
  auto rep = run_online_sim(pipeline::make_ranker(mp, idx, rank, pipeline::retrieve_options(cfg)),
                            pipeline::make_ranker(mb, idx, rank, pipeline::retrieve_options(cfg_b)), test,
                            pipeline::sim_config(cfg));
  write_delta_report(std::cout, rep);
  auto payload = rep.to_json();
  payload["baseline_model"] = model_b;
  payload["baseline_config"] = cfg_b.to_json();
  write_json(report.empty() ? c.path("reports/simulate-online.json") : report,
             report_json(cfg, "simulate-online", payload));
  return 0;
}

int cmd_ablate_ids(const Common& c, const std::vector<std::string>& schemes) {
  RunConfig cfg = c.resolve();
  Corpus corpus = load_data_corpus(c);
  auto train = load_train(c, corpus);
  auto test = load_test(c, corpus);
  IntentTable intents = load_intents(c);
  auto rank = lookup_or_rules(intents, corpus);
  std::optional<UserEmbeddingTable> users;
  if (cfg.flag("train.ue")) users = user_table(c, cfg, corpus, intents);
  auto queries = pipeline::query_texts(train, test);
  auto embed = pipeline::make_embedder(cfg);
  std::vector<std::pair<std::string, MetricTable>> rows;
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : schemes) {
    RunConfig v = cfg;
    v.set("index.scheme", s);
    auto idx = pipeline::build_index(v, corpus, embed, queries);
    std::cerr << "[" << s << "] vocab " << idx.vocab.size() << ", training\n";
    auto trained = pipeline::train_model(v, idx, corpus, train, rank, users ? &*users : nullptr);
    auto t = run_offline_eval(pipeline::make_ranker(*trained.model, idx, rank, pipeline::retrieve_options(v)), test);
    rows.emplace_back(s, t);
    auto j = t.to_json();
    j["scheme"] = s;
    j["index"] = index_summary(idx);
    out.push_back(j);
  }
  write_metric_table(std::cout, rows);
  write_json(c.path("reports/ablate-ids.json"), report_json(cfg, "ablate-ids", out));
  return 0;
}

int cmd_inspect(const Common& c, const std::string& sticker, const std::string& model_path) {
  StickerIndex idx = load_index(c);
  if (!sticker.empty()) {
    auto i = idx.find(sticker);
    if (!i) throw ValidationError("sticker '" + sticker + "' is not in the index");
    nlohmann::json j = {{"sticker_id", sticker}};
    if (fs::exists(c.data("corpus.jsonl"))) {
      Corpus corpus = load_data_corpus(c);
      if (auto k = corpus.find(sticker))
        for (Property p : kAllProperties) j["text"][std::string(property_name(p))] = corpus[*k].text(p);
    }
    for (Property p : kAllProperties) j["code"][std::string(property_name(p))] = idx.code(*i, p);
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  nlohmann::json j = {{"index", index_summary(idx)}};
  std::string mp = model_path.empty() ? c.path("model.bin") : model_path;
  if (fs::exists(mp)) {
    auto ck = Checkpoint::load(mp);
    std::size_t scalars = 0;
    for (const auto& [n, m] : ck.tensors) scalars += std::size_t(m.size());
    j["model"] = {{"path", mp}, {"kind", ck.kind}, {"config_hash", hex64(ck.config_hash)},
                  {"vocab_matches", ck.vocab_hash == idx.vocab.hash()}, {"parameters", scalars}, {"meta", ck.meta}};
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative sticker retrieval toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus, logs and judgments");
  add_common(gen, common);

  auto* build = app.add_subcommand("build-index", "assign property identifiers and build prefix trees");
  add_common(build, common);

  auto* users = app.add_subcommand("train-user-emb", "train the group embedding table on click logs");
  add_common(users, common);

  std::vector<std::string> intent_queries;
  auto* intents = app.add_subcommand("resolve-intents", "rank query intents into the lookup table");
  add_common(intents, common);
  intents->add_option("-q,--query", intent_queries, "resolve only these queries and print them");

  std::string out_path, model_path, baseline_path, report_path, query, group, format = "jsonl", sticker;
  std::vector<std::string> baseline_sets;
  std::vector<std::string> schemes = {"atomic", "string", "rq", "pq"};
  bool no_ue = false, no_ial = false, no_ig = false;
  std::string user_tasks;

  auto ablation_train = [&](CLI::App* cmd) {
    cmd->add_flag("--no-ue", no_ue, "train without the user group token");
    cmd->add_flag("--no-ial", no_ial, "train without intent-weighted retrieval loss");
  };

  auto* train = app.add_subcommand("train", "train the sequence model on indexing and retrieval pairs");
  add_common(train, common);
  ablation_train(train);
  train->add_option("--user-tasks", user_tasks, "user embedding tasks, e.g. click or click,intent");
  train->add_option("-o,--out", out_path, "checkpoint path (default WORK/model.bin)");

  auto* retrieve = app.add_subcommand("retrieve", "retrieve stickers for one query");
  add_common(retrieve, common);
  retrieve->add_option("query", query, "query text")->required();
  retrieve->add_option("-g,--group", group, "user group, e.g. 20-29/female");
  retrieve->add_option("-m,--model", model_path, "checkpoint (default WORK/model.bin)");
  retrieve->add_option("-f,--format", format, "jsonl or table")->capture_default_str();
  retrieve->add_flag("--no-ig", no_ig, "single equal-weight pass instead of the funnel");

  auto* eval = app.add_subcommand("eval-offline", "MRR and Recall over the test judgments");
  add_common(eval, common);
  eval->add_option("-m,--model", model_path, "checkpoint (default WORK/model.bin)");
  eval->add_option("-r,--report", report_path, "report path");
  eval->add_flag("--no-ig", no_ig, "single equal-weight pass instead of the funnel");

  auto* sim = app.add_subcommand("simulate-online", "interleaved click simulation of two systems");
  add_common(sim, common);
  sim->add_option("-m,--model", model_path, "treatment checkpoint (default WORK/model.bin)");
  sim->add_option("-b,--baseline", baseline_path, "baseline checkpoint");
  sim->add_option("--baseline-set", baseline_sets, "config override for the baseline only");
  sim->add_option("-r,--report", report_path, "report path");

  auto* ablate = app.add_subcommand("ablate-ids", "compare identifier schemes end to end");
  add_common(ablate, common);
  ablate->add_option("--schemes", schemes, "schemes to compare")->capture_default_str();
  ablation_train(ablate);

  auto* inspect = app.add_subcommand("inspect", "summarize artifacts or show one sticker's identifiers");
  add_common(inspect, common);
  inspect->add_option("--sticker", sticker, "sticker id");
  inspect->add_option("-m,--model", model_path, "checkpoint (default WORK/model.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorClass::kConfig);
  }

  try {
    if (no_ue) common.sets.push_back("train.ue=false");
    if (no_ial) common.sets.push_back("train.ial=false");
    if (no_ig) common.sets.push_back("retrieve.funnel=false");
    if (!user_tasks.empty()) common.sets.push_back("user.tasks=" + user_tasks);
    if (*gen) return cmd_gen_data(common);
    if (*build) return cmd_build_index(common);
    if (*users) return cmd_train_user_emb(common);
    if (*intents) return cmd_resolve_intents(common, intent_queries);
    if (*train) return cmd_train(common, out_path);
    if (*retrieve) return cmd_retrieve(common, query, group, model_path, format);
    if (*eval) return cmd_eval_offline(common, model_path, report_path);
    if (*sim) return cmd_simulate_online(common, model_path, baseline_path, baseline_sets, report_path);
    if (*ablate) return cmd_ablate_ids(common, schemes);
    if (*inspect) return cmd_inspect(common, sticker, model_path);
  } catch (const Error& e) {
    std::cerr << "stickergen: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "stickergen: unexpected failure: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::kContract);
  }
  return 0;
}
