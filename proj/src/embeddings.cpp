#include "hml/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace hml {

namespace {

bool all_zero(const Vector& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

void EmbeddingTable::insert(const std::string& token, Vector vec) {
  require(vec.size() == dim_, ErrorKind::Format,
          "embedding for '" + token + "' has length " + std::to_string(vec.size()) +
              ", expected " + std::to_string(dim_));
  require(!all_zero(vec), ErrorKind::Validation, "embedding for '" + token + "' is the zero vector");
  entries_[token] = std::move(vec);
}

const Vector& EmbeddingTable::at(const std::string& token) const {
  auto it = entries_.find(token);
  if (it == entries_.end()) fail(ErrorKind::MissingToken, "token '" + token + "' not in embedding table");
  return it->second;
}

EmbeddingTable resolve_vocab(const std::map<std::string, Vector>& words, std::size_t dim,
                             const std::vector<std::string>& vocab) {
  EmbeddingTable table(dim);
  for (const auto& entry : vocab) {
    auto direct = words.find(entry);
    if (direct != words.end()) {
      table.insert(entry, direct->second);
      continue;
    }
    std::istringstream parts(entry);
    std::string word;
    Vector mean(dim, 0.0);
    std::size_t n = 0;
    while (parts >> word) {
      auto it = words.find(word);
      if (it == words.end()) {
        fail(ErrorKind::MissingToken, "token '" + word + "' (from '" + entry + "') not in embedding file");
      }
      for (std::size_t i = 0; i < dim; ++i) mean[i] += it->second[i];
      ++n;
    }
    if (n == 0) fail(ErrorKind::MissingToken, "empty vocabulary entry");
    for (double& x : mean) x /= static_cast<double>(n);
    table.insert(entry, std::move(mean));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::vector<std::string>& vocab) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Validation, "cannot open embedding file " + path.string());

  std::map<std::string, Vector> words;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    Vector vec;
    std::string num;
    while (fields >> num) {
      char* end = nullptr;
      double v = std::strtod(num.c_str(), &end);
      if (end == num.c_str() || *end != '\0') {
        fail(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": bad number '" + num + "'");
      }
      vec.push_back(v);
    }
    if (dim == 0) dim = vec.size();
    if (vec.empty() || vec.size() != dim) {
      fail(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(dim) + " values, found " + std::to_string(vec.size()));
    }
    if (all_zero(vec)) fail(ErrorKind::Validation, "embedding for '" + token + "' is the zero vector");
    words[token] = std::move(vec);
  }
  require(dim > 0, ErrorKind::Format, "embedding file " + path.string() + " is empty");
  return resolve_vocab(words, dim, vocab);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorKind::Shape, "cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) fail(ErrorKind::Domain, "cosine_similarity of a zero vector");
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace hml
