#include "hml/pipeline.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hml {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  require(obj.is_object(), ErrorKind::Config, where + " must be a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items()) {
    require(allowed.count(key) == 1, ErrorKind::Config, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& target) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_path(const json& obj, const char* key, std::optional<std::filesystem::path>& target,
               const std::filesystem::path& base) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  std::filesystem::path p = obj.at(key).get<std::string>();
  target = p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

void RunConfig::validate() const {
  generator.validate();
  train.validate();
  require(taxonomy.tss > 0.0 && taxonomy.tss < 1.0, ErrorKind::Config, "taxonomy.tss must lie in (0, 1)");
  require(taxonomy.num_layers >= 1, ErrorKind::Config, "taxonomy.num_layers must be at least 1");
  require(taxonomy.rare_singleton_ratio >= 0.0, ErrorKind::Config, "rare_singleton_ratio must be nonnegative");
  require(data.features.has_value() == data.labels.has_value(), ErrorKind::Config,
          "data.features and data.labels must be given together");
  for (const auto& p : {taxonomy.embeddings, taxonomy.vocab, data.features, data.labels}) {
    if (p) require(std::filesystem::exists(*p), ErrorKind::Config, "path does not exist: " + p->string());
  }
  require(ablation.jobs >= 1, ErrorKind::Config, "ablation.jobs must be at least 1");
}

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "config", {"seed", "generator", "taxonomy", "train", "data", "ablation"});
  RunConfig cfg;
  read(root, "seed", cfg.seed);

  if (root.contains("generator")) {
    const json& g = root["generator"];
    reject_unknown(g, "generator", {"num_coarse", "fine_per_coarse", "dim", "spread", "zipf_s", "p_coarse",
                                    "num_instances", "train_fraction", "val_fraction", "test_fraction",
                                    "embedding_dim", "embedding_noise"});
    auto& s = cfg.generator;
    read(g, "num_coarse", s.num_coarse);
    read(g, "fine_per_coarse", s.fine_per_coarse);
    read(g, "dim", s.dim);
    read(g, "spread", s.spread);
    read(g, "zipf_s", s.zipf_s);
    read(g, "p_coarse", s.p_coarse);
    read(g, "num_instances", s.num_instances);
    read(g, "train_fraction", s.train_fraction);
    read(g, "val_fraction", s.val_fraction);
    read(g, "test_fraction", s.test_fraction);
    read(g, "embedding_dim", s.embedding_dim);
    read(g, "embedding_noise", s.embedding_noise);
  }

  if (root.contains("taxonomy")) {
    const json& t = root["taxonomy"];
    reject_unknown(t, "taxonomy", {"tss", "num_layers", "rare_singleton_ratio", "overrides", "regroup",
                                   "recompute_after_override", "embeddings", "vocab"});
    auto& x = cfg.taxonomy;
    read(t, "tss", x.tss);
    read(t, "num_layers", x.num_layers);
    read(t, "rare_singleton_ratio", x.rare_singleton_ratio);
    read(t, "overrides", x.overrides);
    read(t, "recompute_after_override", x.recompute_after_override);
    if (t.contains("regroup")) {
      std::map<std::string, std::string> moves;
      read(t, "regroup", moves);
      for (const auto& [p, anchor] : moves) x.regroup.push_back({p, anchor});
    }
    read_path(t, "embeddings", x.embeddings, base_dir);
    read_path(t, "vocab", x.vocab, base_dir);
  }

  if (root.contains("train")) {
    const json& t = root["train"];
    reject_unknown(t, "train", {"hidden", "batch_size", "learning_rate", "momentum", "lr_decay",
                                "plateau_patience", "plateau_min_delta", "eval_every", "max_iterations",
                                "iteration_scale", "lambda", "gamma", "epsilon", "use_cr", "use_mr",
                                "cr_support", "omega_floor", "normalize_cb"});
    auto& x = cfg.train;
    read(t, "hidden", x.hidden);
    read(t, "batch_size", x.batch_size);
    read(t, "learning_rate", x.learning_rate);
    read(t, "momentum", x.momentum);
    read(t, "lr_decay", x.lr_decay);
    read(t, "plateau_patience", x.plateau_patience);
    read(t, "plateau_min_delta", x.plateau_min_delta);
    read(t, "eval_every", x.eval_every);
    read(t, "max_iterations", x.max_iterations);
    read(t, "iteration_scale", x.iteration_scale);
    read(t, "lambda", x.lambda);
    read(t, "gamma", x.gamma);
    read(t, "epsilon", x.epsilon);
    read(t, "use_cr", x.use_cr);
    read(t, "use_mr", x.use_mr);
    read(t, "omega_floor", x.omega_floor);
    read(t, "normalize_cb", x.normalize_cb);
    if (t.contains("cr_support")) {
      std::string support;
      read(t, "cr_support", support);
      require(support == "restricted" || support == "full", ErrorKind::Config,
              "train.cr_support must be \"restricted\" or \"full\"");
      x.cr_support = support == "full" ? CrSupport::Full : CrSupport::Restricted;
    }
  }

  if (root.contains("data")) {
    const json& d = root["data"];
    reject_unknown(d, "data", {"features", "labels"});
    read_path(d, "features", cfg.data.features, base_dir);
    read_path(d, "labels", cfg.data.labels, base_dir);
  }

  if (root.contains("ablation")) {
    const json& a = root["ablation"];
    reject_unknown(a, "ablation", {"lambdas", "layers", "seeds", "jobs"});
    read(a, "lambdas", cfg.ablation.lambdas);
    read(a, "layers", cfg.ablation.layers);
    read(a, "seeds", cfg.ablation.seeds);
    read(a, "jobs", cfg.ablation.jobs);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::string config_to_json(const RunConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  const auto& g = cfg.generator;
  root["generator"] = {{"num_coarse", g.num_coarse},       {"fine_per_coarse", g.fine_per_coarse},
                       {"dim", g.dim},                     {"spread", g.spread},
                       {"zipf_s", g.zipf_s},               {"p_coarse", g.p_coarse},
                       {"num_instances", g.num_instances}, {"train_fraction", g.train_fraction},
                       {"val_fraction", g.val_fraction},   {"test_fraction", g.test_fraction},
                       {"embedding_dim", g.embedding_dim}, {"embedding_noise", g.embedding_noise}};
  const auto& t = cfg.taxonomy;
  json regroup = json::object();
  for (const auto& m : t.regroup) regroup[m.predicate] = m.anchor;
  root["taxonomy"] = {{"tss", t.tss},
                      {"num_layers", t.num_layers},
                      {"rare_singleton_ratio", t.rare_singleton_ratio},
                      {"overrides", t.overrides},
                      {"regroup", regroup},
                      {"recompute_after_override", t.recompute_after_override}};
  if (t.embeddings) root["taxonomy"]["embeddings"] = std::filesystem::absolute(*t.embeddings).string();
  if (t.vocab) root["taxonomy"]["vocab"] = std::filesystem::absolute(*t.vocab).string();
  const auto& x = cfg.train;
  root["train"] = {{"hidden", x.hidden},
                   {"batch_size", x.batch_size},
                   {"learning_rate", x.learning_rate},
                   {"momentum", x.momentum},
                   {"lr_decay", x.lr_decay},
                   {"plateau_patience", x.plateau_patience},
                   {"plateau_min_delta", x.plateau_min_delta},
                   {"eval_every", x.eval_every},
                   {"max_iterations", x.max_iterations},
                   {"iteration_scale", x.iteration_scale},
                   {"lambda", x.lambda},
                   {"gamma", x.gamma},
                   {"epsilon", x.epsilon},
                   {"use_cr", x.use_cr},
                   {"use_mr", x.use_mr},
                   {"cr_support", x.cr_support == CrSupport::Full ? "full" : "restricted"},
                   {"omega_floor", x.omega_floor},
                   {"normalize_cb", x.normalize_cb}};
  if (cfg.data.features) {
    root["data"] = {{"features", std::filesystem::absolute(*cfg.data.features).string()},
                    {"labels", std::filesystem::absolute(*cfg.data.labels).string()}};
  }
  root["ablation"] = {{"lambdas", cfg.ablation.lambdas},
                      {"layers", cfg.ablation.layers},
                      {"seeds", cfg.ablation.seeds},
                      {"jobs", cfg.ablation.jobs}};
  return root.dump(2) + "\n";
}

LabeledDataset prepare_dataset(const RunConfig& cfg) {
  if (cfg.data.features) return read_dataset(*cfg.data.features, *cfg.data.labels);
  return generate_synthetic(cfg.generator, derive_seed(cfg.seed, "data"));
}

namespace {

PredicateTree cluster_and_layer(const std::vector<PredicateCount>& vocab, const EmbeddingTable& table,
                                const TaxonomyConfig& tax) {
  auto groups = cluster_predicates(vocab, table, tax.tss);
  std::map<std::string, long> counts;
  for (const auto& v : vocab) counts[v.predicate] = v.count;
  if (!tax.regroup.empty()) apply_regroup(groups, tax.regroup, counts, table, tax.recompute_after_override);
  LayerOptions options{tax.num_layers, tax.rare_singleton_ratio, tax.overrides};
  return build_layers(std::move(groups), counts, options, tax.tss);
}

}  // namespace

PredicateTree prepare_tree(const RunConfig& cfg, const LabeledDataset& dataset) {
  auto vocab = label_vocabulary(dataset, Split::Train);
  std::vector<std::string> names;
  for (const auto& v : vocab) names.push_back(v.predicate);
  EmbeddingTable table = cfg.taxonomy.embeddings
                             ? load_embeddings(*cfg.taxonomy.embeddings, names)
                             : label_embeddings(cfg.generator, dataset, derive_seed(cfg.seed, "label-embeddings"));
  return cluster_and_layer(vocab, table, cfg.taxonomy);
}

PredicateTree tree_from_files(const TaxonomyConfig& taxonomy) {
  require(taxonomy.embeddings && taxonomy.vocab, ErrorKind::Config,
          "clustering an external vocabulary needs both an embeddings file and a vocabulary file");
  auto vocab = read_vocab_counts(*taxonomy.vocab);
  require(!vocab.empty(), ErrorKind::Validation, "vocabulary file is empty");
  std::vector<std::string> names;
  for (const auto& v : vocab) names.push_back(v.predicate);
  EmbeddingTable table = load_embeddings(*taxonomy.embeddings, names);
  return cluster_and_layer(vocab, table, taxonomy);
}

void write_layer_recalls(const HmlResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Validation, "cannot write " + path.string());
  out << "layer,mean_recall\n";
  int max_layer = 0;
  for (int l : result.class_layer) max_layer = std::max(max_layer, l);
  for (int l = 1; l <= max_layer; ++l) out << l << ',' << format_double(result.layer_mean_recall(l)) << '\n';
}

namespace {

std::filesystem::path ckpt_path(const std::filesystem::path& dir, int k) {
  return dir / ("stage" + std::to_string(k) + ".ckpt");
}
std::filesystem::path tracker_path(const std::filesystem::path& dir, int k) {
  return dir / ("stage" + std::to_string(k) + ".tracker");
}

void persist_stage(const StageArtifacts& s, const std::filesystem::path& dir, double epsilon) {
  write_checkpoint(s.params, ckpt_path(dir, s.stage_index));
  TrackerSnapshot snap{s.iterations, epsilon, s.fisher, s.omega_raw, s.omega};
  write_tracker_snapshot(snap, tracker_path(dir, s.stage_index));
  if (!s.train_log.empty()) {
    write_train_log(s, dir / ("stage" + std::to_string(s.stage_index) + "_train_log.csv"));
  }

  ParamVector back = read_checkpoint(ckpt_path(dir, s.stage_index));
  require(back.values == s.params.values, ErrorKind::Integrity, "checkpoint re-read differs from memory");
  TrackerSnapshot tback = read_tracker_snapshot(tracker_path(dir, s.stage_index));
  require(tback.fisher == s.fisher && tback.omega == s.omega && tback.omega_raw == s.omega_raw,
          ErrorKind::Integrity, "tracker snapshot re-read differs from memory");
}

RunOutputs finish_run(const RunConfig& cfg, const LabeledDataset& dataset, const PredicateTree& tree,
                      const std::filesystem::path& dir, std::vector<StageArtifacts> completed) {
  const std::size_t already = completed.size();
  RunOutputs out;
  out.dir = dir;
  out.result = resume_hml(cfg.train, dataset, tree, cfg.seed, std::move(completed));
  for (std::size_t k = already; k < out.result.stages.size(); ++k) {
    persist_stage(out.result.stages[k], dir, cfg.train.epsilon);
  }
  write_metrics_csv(out.result.report, dataset.class_names, dir / "metrics.csv");
  write_layer_recalls(out.result, dir / "layers.csv");
  return out;
}

}  // namespace

RunOutputs run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        const std::optional<std::string>& verbatim_config) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  if (verbatim_config) {
    std::ofstream(out_dir / "config.json") << *verbatim_config;
  }
  std::ofstream(out_dir / "resolved_config.json") << config_to_json(cfg);

  LabeledDataset dataset = prepare_dataset(cfg);
  PredicateTree tree = prepare_tree(cfg, dataset);
  write_tree(tree, out_dir / "tree.tsv");
  return finish_run(cfg, dataset, tree, out_dir, {});
}

RunOutputs resume_training(const std::filesystem::path& run_dir) {
  const auto cfg_path = run_dir / "resolved_config.json";
  require(std::filesystem::exists(cfg_path), ErrorKind::Integrity,
          "cannot resume: " + cfg_path.string() + " is missing");
  RunConfig cfg = load_config(cfg_path);
  cfg.validate();
  LabeledDataset dataset = prepare_dataset(cfg);
  PredicateTree tree = prepare_tree(cfg, dataset);

  std::vector<StageDataset> stages = stage_split(dataset, tree, dataset.indices(Split::Train));
  std::vector<StageArtifacts> completed;
  std::set<ClassId> seen;
  for (int k = 1; k <= tree.num_layers(); ++k) {
    const bool has_ckpt = std::filesystem::exists(ckpt_path(run_dir, k));
    const bool has_tracker = std::filesystem::exists(tracker_path(run_dir, k));
    if (!has_ckpt && !has_tracker) break;
    require(has_ckpt && has_tracker, ErrorKind::Integrity,
            "stage " + std::to_string(k) + " has a checkpoint or tracker snapshot but not both");
    StageArtifacts s;
    s.stage_index = k;
    s.params = read_checkpoint(ckpt_path(run_dir, k));
    TrackerSnapshot snap = read_tracker_snapshot(tracker_path(run_dir, k));
    require(snap.fisher.size() == s.params.size(), ErrorKind::Integrity,
            "stage " + std::to_string(k) + " tracker snapshot does not match its checkpoint");
    s.fisher = std::move(snap.fisher);
    s.omega = std::move(snap.omega);
    s.omega_raw = std::move(snap.omega_raw);
    s.iterations = snap.iteration;
    const auto& st = stages[static_cast<std::size_t>(k - 1)];
    seen.insert(st.classes.begin(), st.classes.end());
    for (const auto& [c, n] : st.counts) seen.insert(c);
    s.seen_classes.assign(seen.begin(), seen.end());
    completed.push_back(std::move(s));
  }
  write_tree(tree, run_dir / "tree.tsv");
  return finish_run(cfg, dataset, tree, run_dir, std::move(completed));
}

}  // namespace hml
