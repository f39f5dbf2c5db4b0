#include "hml/trackers.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hml {

TrackerState TrackerState::zeros(std::size_t num_params, double epsilon) {
  require(epsilon > 0.0, ErrorKind::Config, "tracker epsilon must be positive");
  TrackerState s;
  s.fisher.assign(num_params, 0.0);
  s.omega_raw.assign(num_params, 0.0);
  s.epsilon = epsilon;
  return s;
}

Vector fisher_batch(const std::vector<Vector>& grads_loglik) {
  require(!grads_loglik.empty(), ErrorKind::Validation, "fisher_batch: empty batch");
  const std::size_t P = grads_loglik.front().size();
  Vector out(P, 0.0);
  for (const auto& g : grads_loglik) {
    require(g.size() == P, ErrorKind::Shape, "fisher_batch: gradients differ in length");
    for (std::size_t i = 0; i < P; ++i) out[i] += g[i] * g[i];
  }
  const double inv = 1.0 / static_cast<double>(grads_loglik.size());
  for (double& v : out) v *= inv;
  return out;
}

void fisher_update(TrackerState& state, std::span<const double> fisher_batch_t) {
  require(fisher_batch_t.size() == state.fisher.size(), ErrorKind::Shape, "fisher_update: length mismatch");
  const long t = state.iteration + 1;
  const double prev_weight = static_cast<double>(t - 1);
  const double inv = 1.0 / static_cast<double>(t);
  for (std::size_t i = 0; i < state.fisher.size(); ++i) {
    state.fisher[i] = (fisher_batch_t[i] + prev_weight * state.fisher[i]) * inv;
  }
  state.iteration = t;
}

Vector taylor_delta(std::span<const double> grad, std::span<const double> step) {
  require(grad.size() == step.size(), ErrorKind::Shape, "taylor_delta: length mismatch");
  Vector out(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = -grad[i] * step[i];
  return out;
}

void omega_accumulate(TrackerState& state, std::span<const double> delta_l, std::span<const double> step,
                      std::span<const double> fisher_t, double loss_before, double loss_after,
                      bool floor_negative) {
  require(state.epsilon > 0.0, ErrorKind::Config, "tracker epsilon must be positive");
  const std::size_t P = state.omega_raw.size();
  require(delta_l.size() == P && step.size() == P && fisher_t.size() == P, ErrorKind::Shape,
          "omega_accumulate: length mismatch");
  if (loss_after - loss_before > 0.0) return;
  for (std::size_t i = 0; i < P; ++i) {
    double contribution = floor_negative ? std::max(delta_l[i], 0.0) : delta_l[i];
    state.omega_raw[i] += contribution / (0.5 * fisher_t[i] * step[i] * step[i] + state.epsilon);
  }
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

Vector omega_normalize(std::span<const double> omega_raw, std::size_t num_params) {
  // Compensated sum, so a uniform vector gives a ratio of exactly 1.
  double total = 0.0, carry = 0.0;
  for (double v : omega_raw) {
    const double t = total + v;
    carry += std::abs(total) >= std::abs(v) ? (total - t) + v : (v - t) + total;
    total = t;
  }
  total += carry;
  Vector out(omega_raw.size(), 0.0);
  if (!(total > 0.0)) return out;
  const double P = static_cast<double>(num_params);
  for (std::size_t i = 0; i < omega_raw.size(); ++i) {
    if (omega_raw[i] <= 0.0) continue;
    out[i] = sigmoid(std::log10(P * omega_raw[i] / total));
  }
  return out;
}

double kl_quadratic(std::span<const double> fisher, std::span<const double> delta) {
  require(fisher.size() == delta.size(), ErrorKind::Shape, "kl_quadratic: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < fisher.size(); ++i) sum += fisher[i] * delta[i] * delta[i];
  return 0.5 * sum;
}

namespace {

void write_section(std::ostream& out, const char* name, const Vector& values) {
  out << "[" << name << "] count=" << values.size() << " checksum=" << std::hex << checksum(values) << std::dec
      << '\n';
  for (double v : values) out << to_hex(v) << '\n';
}

}  // namespace

void write_tracker_snapshot(const TrackerSnapshot& snapshot, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Validation, "cannot write tracker snapshot " + path.string());
  out << "hml-tracker version=1 params=" << snapshot.fisher.size() << " iteration=" << snapshot.iteration
      << " epsilon=" << to_hex(snapshot.epsilon) << '\n';
  write_section(out, "fisher", snapshot.fisher);
  write_section(out, "omega_raw", snapshot.omega_raw);
  write_section(out, "omega", snapshot.omega);
}

TrackerSnapshot read_tracker_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Integrity, "cannot open tracker snapshot " + path.string());
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  require(magic == "hml-tracker", ErrorKind::Integrity, path.string() + ": not a tracker snapshot");
  std::map<std::string, std::string> kv;
  std::string item;
  while (header >> item) {
    auto eq = item.find('=');
    require(eq != std::string::npos, ErrorKind::Integrity, path.string() + ": malformed header");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  require(kv["version"] == "1", ErrorKind::Integrity, path.string() + ": unsupported version");
  TrackerSnapshot snap;
  std::size_t P = 0;
  try {
    P = std::stoul(kv.at("params"));
    snap.iteration = std::stol(kv.at("iteration"));
    snap.epsilon = from_hex(kv.at("epsilon"));
  } catch (const std::exception&) {
    fail(ErrorKind::Integrity, path.string() + ": incomplete header");
  }

  std::map<std::string, Vector*> sections{{"fisher", &snap.fisher}, {"omega_raw", &snap.omega_raw},
                                          {"omega", &snap.omega}};
  for (const auto& expected : {"fisher", "omega_raw", "omega"}) {
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Integrity,
            path.string() + ": missing section " + expected);
    std::istringstream sh(line);
    std::string tag, count, sum;
    sh >> tag >> count >> sum;
    require(tag == std::string("[") + expected + "]", ErrorKind::Integrity,
            path.string() + ": expected section " + expected);
    require(count == "count=" + std::to_string(P), ErrorKind::Integrity, path.string() + ": section size mismatch");
    Vector& v = *sections[expected];
    v.reserve(P);
    for (std::size_t i = 0; i < P; ++i) {
      require(static_cast<bool>(std::getline(in, line)), ErrorKind::Integrity, path.string() + ": truncated");
      try {
        v.push_back(from_hex(line));
      } catch (const Error&) {
        fail(ErrorKind::Integrity, path.string() + ": unreadable value in section " + expected);
      }
    }
    std::ostringstream s;
    s << "checksum=" << std::hex << checksum(v);
    require(s.str() == sum, ErrorKind::Integrity, path.string() + ": checksum mismatch in section " + expected);
  }
  return snap;
}

}  // namespace hml
