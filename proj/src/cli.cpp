#include "hml/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "hml/pipeline.hpp"

namespace hml {

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> stages;
  std::optional<double> lambda;
  std::optional<double> tss;
  // train
  std::string resume;
  bool quiet = false;
  // eval
  std::string checkpoint;
  std::string tree;
  // cluster
  std::string embeddings;
  std::string vocab;
  // ablate
  std::vector<double> lambdas;
  std::vector<int> layers;
  std::vector<std::uint64_t> seeds;
  std::optional<int> jobs;
};

struct LoadedConfig {
  RunConfig cfg;
  std::optional<std::string> text;
};

LoadedConfig load(const Options& o) {
  LoadedConfig lc;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    require(static_cast<bool>(in), ErrorKind::Config, "cannot open config " + o.config);
    std::stringstream ss;
    ss << in.rdbuf();
    lc.text = ss.str();
    lc.cfg = parse_config(*lc.text, std::filesystem::path(o.config).parent_path());
  }
  if (o.seed) lc.cfg.seed = *o.seed;
  if (o.stages) lc.cfg.taxonomy.num_layers = *o.stages;
  if (o.lambda) lc.cfg.train.lambda = *o.lambda;
  if (o.tss) lc.cfg.taxonomy.tss = *o.tss;
  if (!o.embeddings.empty()) lc.cfg.taxonomy.embeddings = o.embeddings;
  if (!o.vocab.empty()) lc.cfg.taxonomy.vocab = o.vocab;
  if (!o.lambdas.empty()) lc.cfg.ablation.lambdas = o.lambdas;
  if (!o.layers.empty()) lc.cfg.ablation.layers = o.layers;
  if (!o.seeds.empty()) lc.cfg.ablation.seeds = o.seeds;
  if (o.jobs) lc.cfg.ablation.jobs = *o.jobs;
  lc.cfg.validate();
  return lc;
}

void print_tree_summary(const PredicateTree& tree, std::ostream& out) {
  out << "groups: " << tree.groups().size() << "  layers: " << tree.num_layers()
      << "  T_SS: " << tree.threshold() << '\n';
  for (std::size_t g = 0; g < tree.groups().size(); ++g) {
    out << "  group " << g << ":";
    for (const auto& m : tree.groups()[g].members) out << ' ' << m << "(L" << tree.layer(m) << ')';
    out << '\n';
  }
  for (int l = 1; l <= tree.num_layers(); ++l) {
    out << "layer " << l << ": " << tree.predicates_on(l).size() << " predicates\n";
  }
}

int cmd_cluster(const Options& o, std::ostream& out) {
  LoadedConfig lc = load(o);
  PredicateTree tree;
  if (lc.cfg.taxonomy.vocab) {
    tree = tree_from_files(lc.cfg.taxonomy);
  } else {
    LabeledDataset ds = prepare_dataset(lc.cfg);
    tree = prepare_tree(lc.cfg, ds);
  }
  std::filesystem::create_directories(o.out);
  const auto path = std::filesystem::path(o.out) / "tree.tsv";
  write_tree(tree, path);
  print_tree_summary(tree, out);
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  LoadedConfig lc = load(o);
  LabeledDataset ds = prepare_dataset(lc.cfg);
  std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  write_dataset(ds, dir / "features.csv", dir / "labels.csv");

  EmbeddingTable table = label_embeddings(lc.cfg.generator, ds, derive_seed(lc.cfg.seed, "label-embeddings"));
  std::ofstream emb(dir / "label_embeddings.txt");
  for (const auto& [token, vec] : table.entries()) {
    emb << token;
    for (double v : vec) emb << ' ' << format_double(v);
    emb << '\n';
  }
  std::ofstream vocab(dir / "vocab.tsv");
  for (const auto& v : label_vocabulary(ds, Split::Train)) vocab << v.predicate << '\t' << v.count << '\n';

  out << "instances: " << ds.size() << " (train " << ds.indices(Split::Train).size() << ", val "
      << ds.indices(Split::Val).size() << ", test " << ds.indices(Split::Test).size() << ")\n";
  for (int c = 0; c < ds.num_classes(); ++c) {
    out << "  " << std::setw(8) << ds.class_names[static_cast<std::size_t>(c)] << "  "
        << ds.counts[static_cast<std::size_t>(c)] << '\n';
  }
  out << "wrote " << dir.string() << '\n';
  return 0;
}

void print_result(const HmlResult& r, std::ostream& out) {
  out << std::fixed << std::setprecision(4);
  out << "mean_recall " << r.report.mean_recall << "  overall_recall " << r.report.overall_recall << "  mean_at "
      << r.report.mean_at << "  hierarchical_recall " << r.report.hierarchical_recall << '\n';
  int max_layer = 0;
  for (int l : r.class_layer) max_layer = std::max(max_layer, l);
  for (int l = 1; l <= max_layer; ++l) out << "layer " << l << " mean_recall " << r.layer_mean_recall(l) << '\n';
  out.unsetf(std::ios::floatfield);
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  RunOutputs run;
  if (!o.resume.empty()) {
    run = resume_training(o.resume);
  } else {
    LoadedConfig lc = load(o);
    run = run_training(lc.cfg, o.out, lc.text);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.quiet) {
    for (const auto& s : run.result.stages) {
      out << "stage " << s.stage_index << ": " << s.iterations << " iterations\n";
    }
    print_result(run.result, out);
    out << "run directory " << run.dir.string() << "  (" << secs << " s)\n";
  }
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  require(!o.checkpoint.empty(), ErrorKind::Usage, "eval needs --checkpoint");
  LoadedConfig lc = load(o);
  LabeledDataset ds = prepare_dataset(lc.cfg);
  PredicateTree tree = o.tree.empty() ? prepare_tree(lc.cfg, ds) : read_tree(o.tree);
  ParamVector params = read_checkpoint(o.checkpoint);
  require(params.arch.input_dim() == static_cast<std::size_t>(ds.dim) &&
              params.arch.num_classes() == static_cast<std::size_t>(ds.num_classes()),
          ErrorKind::Validation, "checkpoint does not match the dataset's feature or class dimensions");
  auto test = ds.indices(Split::Test);
  require(!test.empty(), ErrorKind::Validation, "dataset has no test split");

  HmlResult r;
  r.class_layer = class_layers(ds, tree);
  r.test_predictions = predict_all(params, ds, test);
  for (std::size_t i : test) r.test_labels.push_back(ds.observed_labels[i]);
  r.report = evaluate(r.test_predictions, r.test_labels, tree, ds.class_names);

  std::filesystem::create_directories(o.out);
  write_metrics_csv(r.report, ds.class_names, std::filesystem::path(o.out) / "metrics.csv");
  write_layer_recalls(r, std::filesystem::path(o.out) / "layers.csv");
  print_result(r, out);
  return 0;
}

struct Summary {
  double mean_recall = 0, overall_recall = 0, mean_at = 0;
};

Summary read_summary(const std::filesystem::path& metrics) {
  std::ifstream in(metrics);
  require(static_cast<bool>(in), ErrorKind::Validation, "missing " + metrics.string());
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  auto f = split(last, ',');
  require(f.size() == 5 && f[0] == "summary", ErrorKind::Format, "bad summary row in " + metrics.string());
  return {std::stod(f[1]), std::stod(f[2]), std::stod(f[3])};
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
  LoadedConfig lc = load(o);
  const auto& grid = lc.cfg.ablation;
  require(!grid.lambdas.empty() && !grid.layers.empty(), ErrorKind::Usage,
          "ablate needs nonempty lambda and layer grids (ablation.lambdas / ablation.layers or --lambdas / --layers)");
  std::vector<std::uint64_t> seeds = grid.seeds.empty() ? std::vector<std::uint64_t>{lc.cfg.seed} : grid.seeds;

  struct Job {
    double lambda;
    int layers;
    std::uint64_t seed;
    std::filesystem::path dir;
    bool ok = false;
    double seconds = 0.0;
  };
  std::vector<Job> jobs;
  const std::filesystem::path root(o.out);
  std::filesystem::create_directories(root);
  for (double lam : grid.lambdas) {
    for (int L : grid.layers) {
      for (auto s : seeds) {
        std::ostringstream name;
        name << "lambda" << lam << "_L" << L << "_seed" << s;
        jobs.push_back({lam, L, s, root / name.str()});
      }
    }
  }

  out.flush();
  err.flush();
  std::map<pid_t, std::pair<std::size_t, std::chrono::steady_clock::time_point>> running;
  std::size_t next = 0;
  auto reap_one = [&]() {
    int status = 0;
    pid_t pid = ::waitpid(-1, &status, 0);
    if (pid <= 0) return;
    auto it = running.find(pid);
    if (it == running.end()) return;
    Job& job = jobs[it->second.first];
    job.ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    job.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - it->second.second).count();
    running.erase(it);
  };
  while (next < jobs.size() || !running.empty()) {
    while (next < jobs.size() && static_cast<int>(running.size()) < grid.jobs) {
      const Job& job = jobs[next];
      RunConfig cfg = lc.cfg;
      cfg.train.lambda = job.lambda;
      cfg.taxonomy.num_layers = job.layers;
      cfg.seed = job.seed;
      std::cout.flush();
      pid_t pid = ::fork();
      require(pid >= 0, ErrorKind::Validation, "fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          run_training(cfg, job.dir);
        } catch (const std::exception& e) {
          std::ofstream(job.dir / "error.txt") << e.what() << '\n';
          code = 1;
        }
        std::cout.flush();
        ::_exit(code);
      }
      running[pid] = {next, std::chrono::steady_clock::now()};
      ++next;
    }
    reap_one();
  }

  const auto report_path = root / "ablation.csv";
  std::ofstream report(report_path);
  report << "lambda,layers,runs,failed,mean_recall,overall_recall,mean_at,wall_clock_s,status\n";
  for (std::size_t j = 0; j < jobs.size(); j += seeds.size()) {
    Summary mean;
    int ok = 0, failed = 0;
    double secs = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const Job& job = jobs[j + s];
      secs += job.seconds;
      if (!job.ok) {
        ++failed;
        continue;
      }
      Summary sm = read_summary(job.dir / "metrics.csv");
      mean.mean_recall += sm.mean_recall;
      mean.overall_recall += sm.overall_recall;
      mean.mean_at += sm.mean_at;
      ++ok;
    }
    std::string status = failed == 0 ? "ok" : (ok == 0 ? "failed" : "partial");
    report << format_double(jobs[j].lambda) << ',' << jobs[j].layers << ',' << seeds.size() << ',' << failed << ',';
    if (ok > 0) {
      report << format_double(mean.mean_recall / ok) << ',' << format_double(mean.overall_recall / ok) << ','
             << format_double(mean.mean_at / ok);
    } else {
      report << ",,";
    }
    report << ',' << format_double(secs) << ',' << status << '\n';
    out << "lambda " << jobs[j].lambda << "  layers " << jobs[j].layers << "  " << status;
    if (ok > 0) out << "  mean_recall " << mean.mean_recall / ok << "  mean_at " << mean.mean_at / ok;
    out << '\n';
  }
  out << "wrote " << report_path.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical memory learning toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "root seed (overrides the config)");
  };

  auto* cluster = app.add_subcommand("cluster", "cluster predicates into a layered tree");
  add_common(cluster);
  cluster->add_option("--tss", o.tss, "similarity threshold T_SS");
  cluster->add_option("--stages", o.stages, "number of tree layers");
  cluster->add_option("--embeddings", o.embeddings, "GloVe-style embedding file");
  cluster->add_option("--vocab", o.vocab, "predicate<TAB>count vocabulary file");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic long-tailed dataset");
  add_common(gen);

  auto* train = app.add_subcommand("train", "run stage-by-stage training");
  add_common(train);
  train->add_option("--stages", o.stages, "number of tree layers / stages");
  train->add_option("--lambda", o.lambda, "weight of the model-reconstruction term");
  train->add_option("--tss", o.tss, "similarity threshold T_SS");
  train->add_option("--resume", o.resume, "finish an interrupted run directory");
  train->add_flag("--quiet", o.quiet, "suppress the summary");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  eval->add_option("--tree", o.tree, "tree export (rebuilt from the config when absent)");
  eval->add_option("--stages", o.stages, "number of tree layers");
  eval->add_option("--tss", o.tss, "similarity threshold T_SS");

  auto* ablate = app.add_subcommand("ablate", "run a lambda x layer-count grid");
  add_common(ablate);
  ablate->add_option("--lambdas", o.lambdas, "lambda grid")->delimiter(',');
  ablate->add_option("--layers", o.layers, "layer-count grid")->delimiter(',');
  ablate->add_option("--seeds", o.seeds, "seeds averaged per setting")->delimiter(',');
  ablate->add_option("--jobs", o.jobs, "parallel worker processes");
  ablate->add_option("--tss", o.tss, "similarity threshold T_SS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*cluster) return cmd_cluster(o, out);
    if (*gen) return cmd_gen_data(o, out);
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*ablate) return cmd_ablate(o, out, err);
  } catch (const Error& e) {
    err << "hml: " << e.what() << '\n';
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "hml: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hml
