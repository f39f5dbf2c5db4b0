#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hml/common.hpp"

namespace hml {

/// Layer widths from input to output, e.g. {16, 32, 16}. Hidden layers use
/// tanh, the output layer is affine.
struct Architecture {
  std::vector<std::size_t> sizes;

  std::size_t input_dim() const { return sizes.front(); }
  std::size_t num_classes() const { return sizes.back(); }
  std::size_t num_layers() const { return sizes.size() - 1; }
  std::size_t num_params() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct DenseShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t offset = 0;  // weights (out x in, row-major) then bias (out)

  std::size_t weight_offset() const { return offset; }
  std::size_t bias_offset() const { return offset + in * out; }
  std::size_t size() const { return in * out + out; }
};

/// Flat parameter (or gradient) vector with its layer layout.
struct ParamVector {
  Architecture arch;
  std::vector<DenseShape> shapes;
  Vector values;
  std::uint64_t seed = 0;

  static ParamVector zeros(const Architecture& arch);
  std::size_t size() const noexcept { return values.size(); }
};

struct StructuredParams {
  std::vector<std::vector<Vector>> weights;  // [layer][out][in]
  std::vector<Vector> biases;                // [layer][out]
};

StructuredParams to_structured(const ParamVector& params);
ParamVector from_structured(const Architecture& arch, const StructuredParams& structured, std::uint64_t seed = 0);

/// Weights ~ U(-1/sqrt(in), 1/sqrt(in)), biases zero.
ParamVector init_params(const Architecture& arch, std::uint64_t seed);

struct ForwardRecord {
  std::vector<Vector> activations;  // [0] = input, back() = logits

  const Vector& logits() const { return activations.back(); }
};

ForwardRecord forward(const ParamVector& params, std::span<const double> x);

/// Logits only, without keeping intermediate activations around.
Vector predict_logits(const ParamVector& params, std::span<const double> x);
ClassId predict_class(const ParamVector& params, std::span<const double> x);

Vector softmax(std::span<const double> logits);
Vector log_softmax(std::span<const double> logits);

/// Reverse-mode gradient of a scalar loss whose gradient w.r.t. the logits is
/// `dloss_dlogits`.
ParamVector backward(const ParamVector& params, const ForwardRecord& record, std::span<const double> dloss_dlogits);

/// Accumulates `scale` times the gradient into `grad`.
void backward_into(const ParamVector& params, const ForwardRecord& record, std::span<const double> dloss_dlogits,
                   std::span<double> grad, double scale = 1.0);

/// Text checkpoint: one header line, then one hexadecimal float per line.
void write_checkpoint(const ParamVector& params, const std::filesystem::path& path);
ParamVector read_checkpoint(const std::filesystem::path& path);

}  // namespace hml
