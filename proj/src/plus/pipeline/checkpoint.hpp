#pragma once

#include <cstring>
#include <type_traits>
#include <filesystem>
#include <fstream>

#include "plus/nn/params.hpp"
#include "plus/train/optim.hpp"

namespace plus::pipeline {

// Binary checkpoint: magic "PLUSCKPT", format version, embedded config JSON,
// epoch, named float32 parameter blobs, optional optimizer moments. All
// fields little-endian; parameters are stored as float32 regardless of the
// active precision.

constexpr char kCkptMagic[8] = {'P', 'L', 'U', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

struct CheckpointInfo {
  std::string config_json;
  std::int64_t epoch = 0;
  bool has_optimizer = false;
  std::uint64_t optimizer_steps = 0;
};

namespace detail {

template <typename V>
void put(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint truncated");
  return s;
}

template <typename T>
void put_f32_array(std::ostream& out, const T* data, std::int64_t n) {
  std::vector<float> buf(n);
  for (std::int64_t i = 0; i < n; ++i) buf[i] = static_cast<float>(data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

template <typename T>
void get_f32_array(std::istream& in, T* data, std::int64_t n) {
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw DataError("checkpoint truncated");
  for (std::int64_t i = 0; i < n; ++i) data[i] = static_cast<T>(buf[i]);
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& file, const nn::ParamSet<T>& params,
                     const train::AdamW<std::type_identity_t<T>>* opt, const std::string& config_json,
                     std::int64_t epoch) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + file.string());
  out.write(kCkptMagic, sizeof(kCkptMagic));
  detail::put<std::uint32_t>(out, kCkptVersion);
  detail::put<std::uint32_t>(out, 0);
  detail::put_string(out, config_json);
  detail::put<std::int64_t>(out, epoch);
  detail::put<std::uint64_t>(out, params.items().size());
  for (const auto& [name, t] : params.items()) {
    detail::put_string(out, name);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
    for (auto d : t.shape()) detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    detail::put_f32_array(out, t.ptr(), t.numel());
  }
  detail::put<std::uint8_t>(out, opt ? 1 : 0);
  if (opt) {
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(
                                        const_cast<train::AdamW<T>*>(opt)->steps_done()));
    auto& m = const_cast<train::AdamW<T>*>(opt)->moments_m();
    auto& v = const_cast<train::AdamW<T>*>(opt)->moments_v();
    for (std::size_t i = 0; i < m.size(); ++i) {
      detail::put_f32_array(out, m[i].data(), static_cast<std::int64_t>(m[i].size()));
      detail::put_f32_array(out, v[i].data(), static_cast<std::int64_t>(v[i].size()));
    }
  }
  if (!out) throw DataError("failed writing checkpoint " + file.string());
}

// Reads the embedded config without loading parameters.
inline std::string peek_checkpoint_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + file.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0) {
    throw DataError("not a checkpoint file: " + file.string());
  }
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kCkptVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  detail::get<std::uint32_t>(in);
  return detail::get_string(in);
}

// Loads parameters (and optimizer state when opt != nullptr) into an
// already-constructed model whose parameter names/shapes must match.
template <typename T>
CheckpointInfo load_checkpoint(const std::filesystem::path& file, nn::ParamSet<T>& params,
                               train::AdamW<std::type_identity_t<T>>* opt) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + file.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0) {
    throw DataError("not a checkpoint file: " + file.string());
  }
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kCkptVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  detail::get<std::uint32_t>(in);
  CheckpointInfo info;
  info.config_json = detail::get_string(in);
  info.epoch = detail::get<std::int64_t>(in);
  const auto n_params = detail::get<std::uint64_t>(in);
  if (n_params != params.items().size()) {
    throw DataError("checkpoint parameter count mismatch");
  }
  for (auto& [name, t] : params.items()) {
    const auto stored = detail::get_string(in);
    if (stored != name) throw DataError("checkpoint parameter order mismatch at " + stored);
    const auto ndim = detail::get<std::uint32_t>(in);
    if (ndim != t.ndim()) throw DataError("checkpoint rank mismatch for " + name);
    for (auto d : t.shape()) {
      if (detail::get<std::uint64_t>(in) != static_cast<std::uint64_t>(d)) {
        throw DataError("checkpoint shape mismatch for " + name);
      }
    }
    detail::get_f32_array(in, t.ptr_mut(), t.numel());
  }
  info.has_optimizer = detail::get<std::uint8_t>(in) != 0;
  if (info.has_optimizer) {
    info.optimizer_steps = detail::get<std::uint64_t>(in);
    if (opt) {
      opt->set_steps_done(static_cast<std::int64_t>(info.optimizer_steps));
      auto& m = opt->moments_m();
      auto& v = opt->moments_v();
      for (std::size_t i = 0; i < m.size(); ++i) {
        detail::get_f32_array(in, m[i].data(), static_cast<std::int64_t>(m[i].size()));
        detail::get_f32_array(in, v[i].data(), static_cast<std::int64_t>(v[i].size()));
      }
    }
  }
  return info;
}

}  // namespace plus::pipeline
