#include "hml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace hml {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  fail(ErrorKind::Format, "unknown split tag '" + std::string(text) + "'");
}

void GeneratorSpec::validate() const {
  require(num_coarse >= 1 && fine_per_coarse >= 1 && dim >= 1 && num_instances >= 1 && embedding_dim >= 1,
          ErrorKind::Config, "generator sizes must be positive");
  require(spread >= 0.0 && std::isfinite(spread), ErrorKind::Config, "spread must be finite and nonnegative");
  require(zipf_s >= 0.0, ErrorKind::Config, "zipf exponent must be nonnegative");
  require(p_coarse >= 0.0 && p_coarse <= 1.0, ErrorKind::Config, "p_coarse must lie in [0, 1]");
  require(train_fraction >= 0.0 && val_fraction >= 0.0 && test_fraction >= 0.0, ErrorKind::Config,
          "split fractions must be nonnegative");
  require(std::abs(train_fraction + val_fraction + test_fraction - 1.0) < 1e-9, ErrorKind::Config,
          "split fractions must sum to 1");
  require(embedding_noise >= 0.0, ErrorKind::Config, "embedding_noise must be nonnegative");
}

ClassId LabeledDataset::class_id(const std::string& name) const {
  auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end()) fail(ErrorKind::Validation, "unknown class '" + name + "'");
  return static_cast<ClassId>(it - class_names.begin());
}

std::vector<std::size_t> LabeledDataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == which) out.push_back(i);
  return out;
}

void LabeledDataset::validate() const {
  const std::size_t n = features.size();
  require(fine_labels.size() == n && observed_labels.size() == n && split.size() == n, ErrorKind::Validation,
          "dataset columns have different lengths");
  require(parent.size() == class_names.size(), ErrorKind::Validation, "parent table size mismatch");
  const int C = num_classes();
  std::vector<long> recount(static_cast<std::size_t>(C), 0);
  for (std::size_t i = 0; i < n; ++i) {
    require(features[i].size() == static_cast<std::size_t>(dim), ErrorKind::Validation, "feature row length mismatch");
    ClassId fine = fine_labels[i], obs = observed_labels[i];
    require(fine >= 0 && fine < C && obs >= 0 && obs < C, ErrorKind::Validation, "label out of range");
    bool ok = false;
    for (ClassId c = fine; c >= 0; c = parent[static_cast<std::size_t>(c)]) {
      if (c == obs) {
        ok = true;
        break;
      }
    }
    require(ok, ErrorKind::Validation, "observed label is not the fine label or one of its ancestors");
    ++recount[static_cast<std::size_t>(obs)];
  }
  require(recount == counts, ErrorKind::Validation, "class counts inconsistent with observed labels");
}

Vector zipf_weights(int n, double s) {
  Vector w(static_cast<std::size_t>(n));
  for (int r = 1; r <= n; ++r) w[static_cast<std::size_t>(r - 1)] = std::pow(static_cast<double>(r), -s);
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

namespace {

Vector random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

LabeledDataset generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int K = spec.num_coarse;
  const int F = spec.num_fine();

  LabeledDataset ds;
  ds.dim = spec.dim;
  for (int c = 0; c < K; ++c) {
    ds.class_names.push_back("c" + std::to_string(c));
    ds.parent.push_back(-1);
  }
  for (int j = 0; j < F; ++j) {
    ds.class_names.push_back("c" + std::to_string(j % K) + ".f" + std::to_string(j));
    ds.parent.push_back(j % K);
  }

  std::mt19937_64 proto_rng(derive_seed(seed, "prototypes"));
  std::vector<Vector> prototypes;
  for (int j = 0; j < F; ++j) prototypes.push_back(random_unit(proto_rng, spec.dim));

  std::mt19937_64 rng(derive_seed(seed, "instances"));
  Vector w = zipf_weights(F, spec.zipf_s);
  std::discrete_distribution<int> pick_fine(w.begin(), w.end());
  std::normal_distribution<double> noise(0.0, spec.spread);
  std::bernoulli_distribution coarsen(spec.p_coarse);

  const auto n = static_cast<std::size_t>(spec.num_instances);
  ds.features.reserve(n);
  ds.counts.assign(static_cast<std::size_t>(K + F), 0);
  for (std::size_t i = 0; i < n; ++i) {
    int j = pick_fine(rng);
    Vector x = prototypes[static_cast<std::size_t>(j)];
    for (double& v : x) v += noise(rng);
    ClassId fine = K + j;
    ClassId observed = coarsen(rng) ? j % K : fine;
    ds.features.push_back(std::move(x));
    ds.fine_labels.push_back(fine);
    ds.observed_labels.push_back(observed);
    ++ds.counts[static_cast<std::size_t>(observed)];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(seed, "split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(n))));
  ds.split.assign(n, Split::Test);
  for (std::size_t k = 0; k < n; ++k) {
    ds.split[order[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
  }
  return ds;
}

std::map<ClassId, long> class_counts(const LabeledDataset& dataset, std::span<const std::size_t> subset) {
  std::map<ClassId, long> out;
  for (std::size_t i : subset) {
    require(i < dataset.size(), ErrorKind::Validation, "class_counts: index out of range");
    ++out[dataset.observed_labels[i]];
  }
  return out;
}

std::vector<PredicateCount> label_vocabulary(const LabeledDataset& dataset, Split which) {
  std::vector<long> counts(static_cast<std::size_t>(dataset.num_classes()), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.split[i] != which) continue;
    for (ClassId c = dataset.observed_labels[i]; c >= 0; c = dataset.parent[static_cast<std::size_t>(c)]) {
      ++counts[static_cast<std::size_t>(c)];
    }
  }
  std::vector<PredicateCount> vocab;
  for (int c = 0; c < dataset.num_classes(); ++c) {
    vocab.push_back({dataset.class_names[static_cast<std::size_t>(c)], counts[static_cast<std::size_t>(c)]});
  }
  sort_by_frequency(vocab);
  return vocab;
}

EmbeddingTable label_embeddings(const GeneratorSpec& spec, const LabeledDataset& dataset, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "label-embeddings"));
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingTable table(static_cast<std::size_t>(spec.embedding_dim));
  std::vector<Vector> vecs(static_cast<std::size_t>(dataset.num_classes()));
  for (int c = 0; c < dataset.num_classes(); ++c) {
    ClassId p = dataset.parent[static_cast<std::size_t>(c)];
    if (p < 0) {
      vecs[static_cast<std::size_t>(c)] = random_unit(rng, spec.embedding_dim);
      continue;
    }
    Vector v = vecs[static_cast<std::size_t>(p)];
    const double scale = spec.embedding_noise / std::sqrt(static_cast<double>(spec.embedding_dim));
    for (double& x : v) x += scale * normal(rng);
    vecs[static_cast<std::size_t>(c)] = std::move(v);
  }
  for (int c = 0; c < dataset.num_classes(); ++c) {
    table.insert(dataset.class_names[static_cast<std::size_t>(c)], vecs[static_cast<std::size_t>(c)]);
  }
  return table;
}

void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& features_path,
                   const std::filesystem::path& labels_path) {
  std::ofstream feats(features_path);
  std::ofstream labels(labels_path);
  require(feats && labels, ErrorKind::Validation, "cannot write dataset files");
  for (const auto& row : dataset.features) {
    for (std::size_t k = 0; k < row.size(); ++k) feats << (k ? "," : "") << format_double(row[k]);
    feats << '\n';
  }
  for (int c = 0; c < dataset.num_classes(); ++c) {
    labels << "# class," << c << ',' << dataset.class_names[static_cast<std::size_t>(c)] << ','
           << dataset.parent[static_cast<std::size_t>(c)] << '\n';
  }
  labels << "id,fine,observed,split\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    labels << i << ',' << dataset.fine_labels[i] << ',' << dataset.observed_labels[i] << ','
           << to_string(dataset.split[i]) << '\n';
  }
}

LabeledDataset read_dataset(const std::filesystem::path& features_path, const std::filesystem::path& labels_path) {
  std::ifstream feats(features_path);
  std::ifstream labels(labels_path);
  require(feats && labels, ErrorKind::Validation, "cannot open dataset files");
  LabeledDataset ds;
  std::string line;
  while (std::getline(feats, line)) {
    if (trim(line).empty()) continue;
    Vector row;
    for (const auto& f : split(line, ',')) {
      char* end = nullptr;
      std::string s(trim(f));
      double v = std::strtod(s.c_str(), &end);
      require(end != s.c_str() && *end == '\0', ErrorKind::Format, "bad feature value '" + s + "'");
      row.push_back(v);
    }
    if (ds.features.empty()) ds.dim = static_cast<int>(row.size());
    require(row.size() == static_cast<std::size_t>(ds.dim), ErrorKind::Format, "ragged features file");
    ds.features.push_back(std::move(row));
  }
  bool header_seen = false;
  try {
    while (std::getline(labels, line)) {
      if (trim(line).empty()) continue;
      if (line.rfind("# class,", 0) == 0) {
        auto f = split(line.substr(8), ',');
        require(f.size() == 3 && std::stoi(f[0]) == static_cast<int>(ds.class_names.size()), ErrorKind::Format,
                "bad class table row '" + line + "'");
        ds.class_names.push_back(f[1]);
        ds.parent.push_back(std::stoi(f[2]));
        continue;
      }
      if (!header_seen) {
        header_seen = true;
        continue;
      }
      auto f = split(line, ',');
      require(f.size() == 4, ErrorKind::Format, "labels row needs 4 fields: '" + line + "'");
      require(std::stoul(f[0]) == ds.fine_labels.size(), ErrorKind::Format, "labels rows out of order");
      ds.fine_labels.push_back(std::stoi(f[1]));
      ds.observed_labels.push_back(std::stoi(f[2]));
      ds.split.push_back(parse_split(trim(f[3])));
    }
  } catch (const std::logic_error&) {
    fail(ErrorKind::Format, labels_path.string() + ": malformed number in '" + line + "'");
  }
  ds.counts.assign(ds.class_names.size(), 0);
  for (ClassId c : ds.observed_labels) {
    require(c >= 0 && c < ds.num_classes(), ErrorKind::Format, "label out of range");
    ++ds.counts[static_cast<std::size_t>(c)];
  }
  ds.validate();
  return ds;
}

}  // namespace hml
