#include "hml/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace hml {

std::size_t Architecture::num_params() const {
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) p += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return p;
}

void Architecture::validate() const {
  require(sizes.size() >= 2, ErrorKind::Config, "architecture needs an input and an output layer");
  for (auto s : sizes) require(s > 0, ErrorKind::Config, "architecture has a zero-sized layer");
}

namespace {

std::vector<DenseShape> layout(const Architecture& arch) {
  std::vector<DenseShape> shapes;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < arch.sizes.size(); ++l) {
    DenseShape s{arch.sizes[l], arch.sizes[l + 1], offset};
    offset += s.size();
    shapes.push_back(s);
  }
  return shapes;
}

std::string arch_string(const Architecture& arch) {
  std::string out;
  for (std::size_t i = 0; i < arch.sizes.size(); ++i) out += (i ? "," : "") + std::to_string(arch.sizes[i]);
  return out;
}

}  // namespace

ParamVector ParamVector::zeros(const Architecture& arch) {
  arch.validate();
  ParamVector p;
  p.arch = arch;
  p.shapes = layout(arch);
  p.values.assign(arch.num_params(), 0.0);
  return p;
}

StructuredParams to_structured(const ParamVector& params) {
  StructuredParams out;
  for (const auto& s : params.shapes) {
    std::vector<Vector> w(s.out, Vector(s.in));
    for (std::size_t o = 0; o < s.out; ++o)
      for (std::size_t i = 0; i < s.in; ++i) w[o][i] = params.values[s.weight_offset() + o * s.in + i];
    out.weights.push_back(std::move(w));
    out.biases.emplace_back(params.values.begin() + static_cast<std::ptrdiff_t>(s.bias_offset()),
                            params.values.begin() + static_cast<std::ptrdiff_t>(s.bias_offset() + s.out));
  }
  return out;
}

ParamVector from_structured(const Architecture& arch, const StructuredParams& structured, std::uint64_t seed) {
  ParamVector p = ParamVector::zeros(arch);
  p.seed = seed;
  require(structured.weights.size() == p.shapes.size() && structured.biases.size() == p.shapes.size(),
          ErrorKind::Shape, "structured parameters do not match the architecture");
  for (std::size_t l = 0; l < p.shapes.size(); ++l) {
    const auto& s = p.shapes[l];
    require(structured.weights[l].size() == s.out && structured.biases[l].size() == s.out, ErrorKind::Shape,
            "structured layer has the wrong output size");
    for (std::size_t o = 0; o < s.out; ++o) {
      require(structured.weights[l][o].size() == s.in, ErrorKind::Shape, "structured layer has the wrong input size");
      for (std::size_t i = 0; i < s.in; ++i) p.values[s.weight_offset() + o * s.in + i] = structured.weights[l][o][i];
      p.values[s.bias_offset() + o] = structured.biases[l][o];
    }
  }
  return p;
}

ParamVector init_params(const Architecture& arch, std::uint64_t seed) {
  ParamVector p = ParamVector::zeros(arch);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  for (const auto& s : p.shapes) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < s.in * s.out; ++k) p.values[s.weight_offset() + k] = dist(rng);
  }
  return p;
}

namespace {

void affine(const ParamVector& params, const DenseShape& s, std::span<const double> in, Vector& out) {
  out.assign(s.out, 0.0);
  const double* w = params.values.data() + s.weight_offset();
  const double* b = params.values.data() + s.bias_offset();
  for (std::size_t o = 0; o < s.out; ++o) {
    double acc = b[o];
    const double* row = w + o * s.in;
    for (std::size_t i = 0; i < s.in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

}  // namespace

ForwardRecord forward(const ParamVector& params, std::span<const double> x) {
  require(x.size() == params.arch.input_dim(), ErrorKind::Shape,
          "forward: input has length " + std::to_string(x.size()) + ", expected " +
              std::to_string(params.arch.input_dim()));
  ForwardRecord rec;
  rec.activations.reserve(params.shapes.size() + 1);
  rec.activations.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < params.shapes.size(); ++l) {
    Vector out;
    affine(params, params.shapes[l], rec.activations.back(), out);
    if (l + 1 < params.shapes.size()) {
      for (double& v : out) v = std::tanh(v);
    }
    rec.activations.push_back(std::move(out));
  }
  return rec;
}

Vector predict_logits(const ParamVector& params, std::span<const double> x) {
  return forward(params, x).activations.back();
}

ClassId predict_class(const ParamVector& params, std::span<const double> x) {
  Vector z = predict_logits(params, x);
  return static_cast<ClassId>(std::max_element(z.begin(), z.end()) - z.begin());
}

Vector softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorKind::Shape, "softmax of an empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (std::isnan(z)) fail(ErrorKind::Domain, "softmax: NaN logit");
    mx = std::max(mx, z);
  }
  Vector p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Vector log_softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorKind::Shape, "log_softmax of an empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (std::isnan(z)) fail(ErrorKind::Domain, "log_softmax: NaN logit");
    mx = std::max(mx, z);
  }
  double total = 0.0;
  for (double z : logits) total += std::exp(z - mx);
  const double lse = mx + std::log(total);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

void backward_into(const ParamVector& params, const ForwardRecord& record, std::span<const double> dloss_dlogits,
                   std::span<double> grad, double scale) {
  require(record.activations.size() == params.shapes.size() + 1, ErrorKind::Shape,
          "backward: record does not match the architecture");
  require(dloss_dlogits.size() == params.arch.num_classes(), ErrorKind::Shape, "backward: logit gradient length");
  require(grad.size() == params.size(), ErrorKind::Shape, "backward: gradient buffer length");

  Vector delta(dloss_dlogits.begin(), dloss_dlogits.end());
  for (double& d : delta) d *= scale;
  for (std::size_t l = params.shapes.size(); l-- > 0;) {
    const auto& s = params.shapes[l];
    const Vector& in = record.activations[l];
    double* gw = grad.data() + s.weight_offset();
    double* gb = grad.data() + s.bias_offset();
    for (std::size_t o = 0; o < s.out; ++o) {
      gb[o] += delta[o];
      double* row = gw + o * s.in;
      for (std::size_t i = 0; i < s.in; ++i) row[i] += delta[o] * in[i];
    }
    if (l == 0) break;
    const double* w = params.values.data() + s.weight_offset();
    Vector prev(s.in, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double* row = w + o * s.in;
      for (std::size_t i = 0; i < s.in; ++i) prev[i] += row[i] * delta[o];
    }
    for (std::size_t i = 0; i < s.in; ++i) prev[i] *= 1.0 - in[i] * in[i];  // tanh'
    delta = std::move(prev);
  }
}

ParamVector backward(const ParamVector& params, const ForwardRecord& record, std::span<const double> dloss_dlogits) {
  ParamVector grad = ParamVector::zeros(params.arch);
  grad.seed = params.seed;
  backward_into(params, record, dloss_dlogits, grad.values);
  return grad;
}

void write_checkpoint(const ParamVector& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Validation, "cannot write checkpoint " + path.string());
  out << "hml-checkpoint version=1 arch=" << arch_string(params.arch) << " classes=" << params.arch.num_classes()
      << " seed=" << params.seed << " params=" << params.size() << " checksum=" << std::hex << checksum(params.values)
      << std::dec << '\n';
  for (double v : params.values) out << to_hex(v) << '\n';
}

ParamVector read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Integrity, "cannot open checkpoint " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream fields(header);
  std::string magic;
  fields >> magic;
  require(magic == "hml-checkpoint", ErrorKind::Integrity, path.string() + ": not a checkpoint file");

  std::map<std::string, std::string> kv;
  std::string item;
  while (fields >> item) {
    auto eq = item.find('=');
    require(eq != std::string::npos, ErrorKind::Integrity, path.string() + ": malformed header field '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  for (const char* key : {"version", "arch", "classes", "seed", "params", "checksum"}) {
    require(kv.count(key) == 1, ErrorKind::Integrity, path.string() + ": header lacks '" + key + "'");
  }
  require(kv["version"] == "1", ErrorKind::Integrity, path.string() + ": unsupported version " + kv["version"]);

  Architecture arch;
  try {
    for (const auto& s : split(kv["arch"], ',')) arch.sizes.push_back(std::stoul(s));
    arch.validate();
  } catch (const std::exception&) {
    fail(ErrorKind::Integrity, path.string() + ": bad architecture '" + kv["arch"] + "'");
  }
  require(std::to_string(arch.num_classes()) == kv["classes"], ErrorKind::Integrity,
          path.string() + ": class count disagrees with architecture");

  ParamVector p = ParamVector::zeros(arch);
  p.seed = std::stoull(kv["seed"]);
  require(std::to_string(p.size()) == kv["params"], ErrorKind::Integrity,
          path.string() + ": parameter count disagrees with architecture");
  std::string line;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    require(k < p.size(), ErrorKind::Integrity, path.string() + ": more values than declared");
    try {
      p.values[k++] = from_hex(line);
    } catch (const Error&) {
      fail(ErrorKind::Integrity, path.string() + ": unreadable value on line " + std::to_string(k + 1));
    }
  }
  require(k == p.size(), ErrorKind::Integrity, path.string() + ": truncated (" + std::to_string(k) + " of " +
                                                   std::to_string(p.size()) + " values)");
  std::ostringstream sum;
  sum << std::hex << checksum(p.values);
  require(sum.str() == kv["checksum"], ErrorKind::Integrity, path.string() + ": checksum mismatch");
  return p;
}

}  // namespace hml
