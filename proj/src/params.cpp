#include "syntaxnav/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace syntaxnav {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

ParamId ParameterSet::add(std::string name, Tensor value) {
  if (index_.count(name) != 0) throw Error(Errc::ConfigInvalid, "duplicate parameter '" + name + "'");
  require_finite(value, name.c_str());
  const std::size_t idx = entries_.size();
  index_.emplace(name, idx);
  Tensor accum = Tensor::Zero(value.rows(), value.cols());
  entries_.push_back(Entry{std::move(name), std::move(value), std::move(accum)});
  return ParamId{idx};
}

ParamId ParameterSet::id(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(Errc::UnknownParameter, "no parameter named '" + std::string(name) + "'");
  return ParamId{it->second};
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

std::size_t ParameterSet::scalar_count(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.name.compare(0, prefix.size(), prefix) == 0) n += static_cast<std::size_t>(e.value.size());
  }
  return n;
}

std::vector<ParamId> ParameterSet::ids() const {
  std::vector<ParamId> out(entries_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ParamId{i};
  return out;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (ParamId p : params.ids()) {
    const Tensor& v = params.value(p);
    grads_.push_back(Tensor::Zero(v.rows(), v.cols()));
  }
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.grads_.size() != grads_.size()) throw Error(Errc::ShapeMismatch, "gradient sets differ in size");
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (auto& g : grads_) g *= s;
  return *this;
}

double Gradients::squared_norm() const {
  double n = 0;
  for (const auto& g : grads_) n += g.squaredNorm();
  return n;
}

Tensor uniform_init(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(cols, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

void rmsprop_step(ParameterSet& params, const Gradients& grads, const RmsPropConfig& config) {
  if (grads.size() != params.size()) throw Error(Errc::ShapeMismatch, "gradients not aligned with parameters");
  double scale = 1.0;
  if (config.clip_norm > 0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > config.clip_norm) scale = config.clip_norm / norm;
  }
  for (ParamId p : params.ids()) {
    const Tensor& g = grads[p];
    Tensor& theta = params.value(p);
    Tensor& s = params.accumulator(p);
    if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
      throw Error(Errc::ShapeMismatch, "gradient shape mismatch for '" + params.name(p) + "'");
    }
    const Tensor gs = scale * g;
    s = config.rho * s + (1.0 - config.rho) * gs.cwiseAbs2();
    theta.array() -= config.lr * gs.array() / (s.array().sqrt() + config.eps);
  }
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

constexpr char kMagic[8] = {'S', 'N', 'A', 'V', 'C', 'K', 'P', 'T'};
constexpr std::string_view kAccumulatorPrefix = "opt.rmsprop/";

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(Errc::CorruptCheckpoint, "truncated checkpoint");
  return v;
}

void put_string(std::ostream& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error(Errc::CorruptCheckpoint, "truncated string");
  return s;
}

void put_tensor(std::ostream& out, std::string_view name, const Tensor& t) {
  put_string(out, name);
  put<std::uint32_t>(out, 2);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) put<double>(out, t(r, c));
  }
}

std::pair<std::string, Tensor> get_tensor(std::istream& in) {
  std::string name = get_string(in);
  const auto rank = get<std::uint32_t>(in);
  if (rank != 2) throw Error(Errc::CorruptCheckpoint, "unsupported rank for '" + name + "'");
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw Error(Errc::CorruptCheckpoint, "implausible shape");
  Tensor t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = get<double>(in);
  }
  return {std::move(name), std::move(t)};
}

}  // namespace

void write_checkpoint(std::ostream& out, CheckpointHeader header, const ParameterSet& params) {
  header.config_hash = fnv1a64(header.config_text);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, header.format_version);
  put<std::uint64_t>(out, header.seed);
  put<std::uint64_t>(out, header.config_hash);
  put<std::uint64_t>(out, header.iteration);
  put_string(out, header.config_text);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(2 * params.size()));
  for (ParamId p : params.ids()) put_tensor(out, params.name(p), params.value(p));
  for (ParamId p : params.ids()) {
    put_tensor(out, std::string(kAccumulatorPrefix) + params.name(p), params.accumulator(p));
  }
  if (!out) throw Error(Errc::Io, "checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(Errc::CorruptCheckpoint, "bad magic");
  }
  Checkpoint ck;
  ck.header.format_version = get<std::uint32_t>(in);
  if (ck.header.format_version != CheckpointHeader::kFormatVersion) {
    throw Error(Errc::CorruptCheckpoint, "unsupported format version " + std::to_string(ck.header.format_version));
  }
  ck.header.seed = get<std::uint64_t>(in);
  ck.header.config_hash = get<std::uint64_t>(in);
  ck.header.iteration = get<std::uint64_t>(in);
  ck.header.config_text = get_string(in);
  if (fnv1a64(ck.header.config_text) != ck.header.config_hash) {
    throw Error(Errc::CorruptCheckpoint, "config hash mismatch");
  }
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, tensor] = get_tensor(in);
    if (name.compare(0, kAccumulatorPrefix.size(), kAccumulatorPrefix) == 0) {
      const std::string_view owner = std::string_view(name).substr(kAccumulatorPrefix.size());
      if (!ck.params.contains(owner)) throw Error(Errc::CorruptCheckpoint, "accumulator without parameter: " + name);
      const ParamId p = ck.params.id(owner);
      if (tensor.rows() != ck.params.value(p).rows() || tensor.cols() != ck.params.value(p).cols()) {
        throw Error(Errc::CorruptCheckpoint, "accumulator shape mismatch for '" + name + "'");
      }
      ck.params.accumulator(p) = std::move(tensor);
    } else {
      ck.params.add(std::move(name), std::move(tensor));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(Errc::CorruptCheckpoint, "trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, header, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace syntaxnav
