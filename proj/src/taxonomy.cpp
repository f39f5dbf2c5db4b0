#include "hml/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace hml {

void sort_by_frequency(std::vector<PredicateCount>& vocab) {
  std::sort(vocab.begin(), vocab.end(), [](const PredicateCount& a, const PredicateCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.predicate < b.predicate;
  });
}

std::vector<PredicateGroup> cluster_predicates(const std::vector<PredicateCount>& vocab_by_freq,
                                               const EmbeddingTable& table, double threshold) {
  require(!vocab_by_freq.empty(), ErrorKind::Validation, "cluster_predicates: empty vocabulary");
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::Config, "T_SS must lie in (0, 1)");
  for (std::size_t i = 1; i < vocab_by_freq.size(); ++i) {
    const auto& prev = vocab_by_freq[i - 1];
    const auto& cur = vocab_by_freq[i];
    bool ordered = prev.count > cur.count || (prev.count == cur.count && prev.predicate < cur.predicate);
    require(ordered, ErrorKind::Validation,
            "cluster_predicates: vocabulary not sorted by frequency at '" + cur.predicate + "'");
  }

  std::vector<PredicateGroup> groups;
  for (const auto& [predicate, count] : vocab_by_freq) {
    const Vector& emb = table.at(predicate);
    int best = -1;
    double best_sim = -2.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double sim = cosine_similarity(groups[g].representation, emb);
      if (sim > best_sim) {
        best_sim = sim;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_sim >= threshold) {
      auto& group = groups[static_cast<std::size_t>(best)];
      double n = static_cast<double>(group.members.size());
      for (std::size_t i = 0; i < emb.size(); ++i) {
        group.representation[i] = (n * group.representation[i] + emb[i]) / (n + 1.0);
      }
      group.members.push_back(predicate);
    } else {
      groups.push_back(PredicateGroup{{predicate}, emb});
    }
  }
  return groups;
}

namespace {

Vector member_mean(const PredicateGroup& group, const EmbeddingTable& table) {
  Vector mean(table.dim(), 0.0);
  for (const auto& m : group.members) {
    const Vector& e = table.at(m);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += e[i];
  }
  for (double& x : mean) x /= static_cast<double>(group.members.size());
  return mean;
}

}  // namespace

void apply_regroup(std::vector<PredicateGroup>& groups, const std::vector<RegroupMove>& moves,
                   const std::map<std::string, long>& counts, const EmbeddingTable& table,
                   bool recompute) {
  auto find_group = [&](const std::string& p) -> std::size_t {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& m = groups[g].members;
      if (std::find(m.begin(), m.end(), p) != m.end()) return g;
    }
    fail(ErrorKind::Validation, "regroup: predicate '" + p + "' is not in any group");
  };
  auto count_of = [&](const std::string& p) {
    auto it = counts.find(p);
    return it == counts.end() ? 0L : it->second;
  };

  for (const auto& move : moves) {
    std::size_t from = find_group(move.predicate);
    std::size_t to = find_group(move.anchor);
    if (from == to) continue;
    auto& src = groups[from].members;
    src.erase(std::find(src.begin(), src.end(), move.predicate));
    auto& dst = groups[to].members;
    auto pos = std::find_if(dst.begin(), dst.end(), [&](const std::string& m) {
      long cm = count_of(m), cp = count_of(move.predicate);
      return cm < cp || (cm == cp && m > move.predicate);
    });
    dst.insert(pos, move.predicate);
    if (recompute) {
      groups[to].representation = member_mean(groups[to], table);
      if (!src.empty()) groups[from].representation = member_mean(groups[from], table);
    }
    if (src.empty()) groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(from));
  }
}

PredicateTree::PredicateTree(std::vector<PredicateGroup> groups, std::map<std::string, long> counts,
                             std::map<std::string, int> layer_of, int num_layers, double threshold)
    : groups_(std::move(groups)),
      counts_(std::move(counts)),
      layer_of_(std::move(layer_of)),
      num_layers_(num_layers),
      threshold_(threshold) {
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    require(!groups_[g].members.empty(), ErrorKind::Validation, "empty predicate group");
    for (const auto& m : groups_[g].members) {
      require(group_index_.emplace(m, static_cast<int>(g)).second, ErrorKind::Validation,
              "predicate '" + m + "' appears in more than one group");
      require(layer_of_.count(m) == 1, ErrorKind::Validation, "predicate '" + m + "' has no layer");
    }
  }
  require(group_index_.size() == layer_of_.size(), ErrorKind::Validation,
          "layer map and groups disagree on the predicate set");
}

int PredicateTree::layer(const std::string& predicate) const {
  auto it = layer_of_.find(predicate);
  if (it == layer_of_.end()) fail(ErrorKind::Validation, "unknown predicate '" + predicate + "'");
  return it->second;
}

long PredicateTree::count(const std::string& predicate) const {
  auto it = counts_.find(predicate);
  return it == counts_.end() ? 0 : it->second;
}

int PredicateTree::group_of(const std::string& predicate) const {
  auto it = group_index_.find(predicate);
  if (it == group_index_.end()) fail(ErrorKind::Validation, "unknown predicate '" + predicate + "'");
  return it->second;
}

std::optional<std::string> PredicateTree::coarse_parent(const std::string& predicate) const {
  const auto& root = groups_[static_cast<std::size_t>(group_of(predicate))].members.front();
  if (root == predicate || layer(root) >= layer(predicate)) return std::nullopt;
  return root;
}

std::vector<std::string> PredicateTree::predicates_on(int layer_index) const {
  std::vector<std::string> out;
  for (const auto& g : groups_)
    for (const auto& m : g.members)
      if (layer_of_.at(m) == layer_index) out.push_back(m);
  return out;
}

PredicateTree build_layers(std::vector<PredicateGroup> groups, const std::map<std::string, long>& counts,
                           const LayerOptions& options, double threshold) {
  const int L = options.num_layers;
  require(L >= 1, ErrorKind::Config, "num_layers must be at least 1");
  for (const auto& [p, layer] : options.overrides) {
    require(layer >= 1 && layer <= L, ErrorKind::Validation,
            "override for '" + p + "' forces layer " + std::to_string(layer) + " outside 1.." + std::to_string(L));
  }
  auto count_of = [&](const std::string& p) {
    auto it = counts.find(p);
    require(it != counts.end(), ErrorKind::Validation, "no count for predicate '" + p + "'");
    return it->second;
  };

  std::map<std::string, int> layer_of;
  std::vector<long> first_layer_counts;
  for (auto& group : groups) {
    require(!group.members.empty(), ErrorKind::Validation, "empty predicate group");
    std::stable_sort(group.members.begin(), group.members.end(), [&](const std::string& a, const std::string& b) {
      long ca = count_of(a), cb = count_of(b);
      return ca != cb ? ca > cb : a < b;
    });
    for (std::size_t k = 0; k < group.members.size(); ++k) {
      int layer = std::min(static_cast<int>(k) + 1, L);
      require(layer_of.emplace(group.members[k], layer).second, ErrorKind::Validation,
              "predicate '" + group.members[k] + "' appears in more than one group");
    }
    first_layer_counts.push_back(count_of(group.members.front()));
  }

  std::sort(first_layer_counts.begin(), first_layer_counts.end());
  double median = 0.0;
  const std::size_t n = first_layer_counts.size();
  if (n > 0) {
    median = n % 2 == 1 ? static_cast<double>(first_layer_counts[n / 2])
                        : 0.5 * static_cast<double>(first_layer_counts[n / 2 - 1] + first_layer_counts[n / 2]);
  }
  const double rare_cutoff = options.rare_singleton_ratio * median;
  for (const auto& group : groups) {
    if (group.members.size() == 1 && static_cast<double>(count_of(group.members.front())) < rare_cutoff) {
      layer_of[group.members.front()] = L;
    }
  }

  for (const auto& [p, layer] : options.overrides) {
    auto it = layer_of.find(p);
    require(it != layer_of.end(), ErrorKind::Validation, "override names unknown predicate '" + p + "'");
    it->second = layer;
  }

  std::map<std::string, long> kept_counts;
  for (const auto& [p, _] : layer_of) kept_counts[p] = count_of(p);
  return PredicateTree(std::move(groups), std::move(kept_counts), std::move(layer_of), L, threshold);
}

void write_tree(const PredicateTree& tree, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Validation, "cannot write " + path.string());
  out << "# group\tpredicate\tcount\tlayer\n";
  out << "# layers=" << tree.num_layers() << " threshold=" << format_double(tree.threshold()) << "\n";
  for (std::size_t g = 0; g < tree.groups().size(); ++g) {
    for (const auto& m : tree.groups()[g].members) {
      out << g << '\t' << m << '\t' << tree.count(m) << '\t' << tree.layer(m) << '\n';
    }
  }
}

PredicateTree read_tree(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Validation, "cannot open tree file " + path.string());
  std::vector<PredicateGroup> groups;
  std::map<std::string, long> counts;
  std::map<std::string, int> layers;
  int num_layers = 0;
  double threshold = 0.7;
  std::string line;
  int last_group = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream meta(line.substr(1));
      std::string kv;
      while (meta >> kv) {
        if (kv.rfind("layers=", 0) == 0) num_layers = std::stoi(kv.substr(7));
        if (kv.rfind("threshold=", 0) == 0) threshold = std::stod(kv.substr(10));
      }
      continue;
    }
    auto f = split(line, '\t');
    require(f.size() == 4, ErrorKind::Format, "tree row needs 4 tab-separated fields: '" + line + "'");
    int g = std::stoi(f[0]);
    require(g == last_group || g == last_group + 1, ErrorKind::Format, "tree groups must be contiguous");
    if (g != last_group) {
      groups.push_back({});
      last_group = g;
    }
    groups.back().members.push_back(f[1]);
    counts[f[1]] = std::stol(f[2]);
    int layer = std::stoi(f[3]);
    layers[f[1]] = layer;
    num_layers = std::max(num_layers, layer);
  }
  require(!groups.empty(), ErrorKind::Format, "tree file " + path.string() + " has no rows");
  return PredicateTree(std::move(groups), std::move(counts), std::move(layers), num_layers, threshold);
}

std::vector<PredicateCount> read_vocab_counts(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Validation, "cannot open vocabulary file " + path.string());
  std::vector<PredicateCount> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty() || line.front() == '#') continue;
    auto f = split(line, '\t');
    require(f.size() == 2, ErrorKind::Format, "vocabulary row needs 'predicate<TAB>count': '" + line + "'");
    vocab.push_back({std::string(trim(f[0])), std::stol(f[1])});
  }
  sort_by_frequency(vocab);
  return vocab;
}

}  // namespace hml
