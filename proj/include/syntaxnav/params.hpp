#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "syntaxnav/tensor.hpp"

namespace syntaxnav {

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

// Named learned tensors plus the per-parameter RMSProp accumulator.
class ParameterSet {
 public:
  ParamId add(std::string name, Tensor value);

  ParamId id(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept;
  std::size_t scalar_count(std::string_view prefix) const;

  const std::string& name(ParamId p) const { return entries_.at(p.index).name; }
  const Tensor& value(ParamId p) const { return entries_.at(p.index).value; }
  Tensor& value(ParamId p) { return entries_.at(p.index).value; }
  const Tensor& accumulator(ParamId p) const { return entries_.at(p.index).accumulator; }
  Tensor& accumulator(ParamId p) { return entries_.at(p.index).accumulator; }

  std::vector<ParamId> ids() const;

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor accumulator;
  };
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Gradient buffer aligned with a ParameterSet; starts at zero.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);

  Tensor& operator[](ParamId p) { return grads_.at(p.index); }
  const Tensor& operator[](ParamId p) const { return grads_.at(p.index); }
  std::size_t size() const noexcept { return grads_.size(); }

  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  double squared_norm() const;

 private:
  std::vector<Tensor> grads_;
};

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = cols.
Tensor uniform_init(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

struct RmsPropConfig {
  double lr = 1e-4;
  double rho = 0.9;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global-norm clipping; 0 disables
};

// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(s) + eps)
void rmsprop_step(ParameterSet& params, const Gradients& grads, const RmsPropConfig& config);

// FNV-1a, used for config fingerprints.
std::uint64_t fnv1a64(std::string_view text);

struct CheckpointHeader {
  static constexpr std::uint32_t kFormatVersion = 1;
  std::uint32_t format_version = kFormatVersion;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;  // fnv1a64(config_text), filled on write
  std::uint64_t iteration = 0;
  std::string config_text;
};

struct Checkpoint {
  CheckpointHeader header;
  ParameterSet params;
};

// Byte layout is documented in docs/checkpoint-format.md.
void write_checkpoint(std::ostream& out, CheckpointHeader header, const ParameterSet& params);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParameterSet& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace syntaxnav
