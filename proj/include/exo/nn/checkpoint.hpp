#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exo/errors.hpp"
#include "exo/io.hpp"
#include "exo/nn/model.hpp"

// Binary checkpoint layout (all integers and doubles little-endian):
//
//   offset  size  field
//   0       8     magic "EXOCKPT\0"
//   8       4     format version (uint32, currently 1)
//   12      8     header length H in bytes (uint64)
//   20      H     UTF-8 JSON header
//   20+H    8*N   payload: N doubles
//   end-8   8     FNV-1a 64 checksum of every preceding byte
//
// The header holds "layers" (kind + config per layer), "frozen" (layer
// indices), "step" (Adam step counter), "definition", "metadata" and
// "payload_doubles" (N). The payload walks the layers in order; for each
// parameter array it stores value, first moment, second moment, then each
// buffer (batch-norm running mean, running variance).

namespace exo::nn {

inline constexpr char kCheckpointMagic[8] = {'E', 'X', 'O', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T> void put(std::string &out, const T &v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T> T get(std::string_view in, std::size_t &pos) {
  if (pos + sizeof(T) > in.size())
    throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

template <class F> void walk_state(Model &m, F &&f) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (auto *p : m.layer(i).params()) {
      f(p->value);
      f(p->m);
      f(p->v);
    }
    for (auto *b : m.layer(i).buffers())
      f(*b);
  }
}

} // namespace detail

inline std::string checkpoint_bytes(const Model &model) {
  Model &m = const_cast<Model &>(model);
  nlohmann::ordered_json header;
  auto layers = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.size(); ++i)
    layers.push_back({{"kind", kind_name(m.layer(i).kind())}, {"config", m.layer(i).config()}});
  std::size_t n = 0;
  detail::walk_state(m, [&](std::vector<double> &v) { n += v.size(); });
  header["layers"] = std::move(layers);
  header["frozen"] = model.frozen_layers();
  header["step"] = model.step();
  header["definition"] = model.definition;
  header["metadata"] = model.metadata;
  header["payload_doubles"] = n;
  const std::string h = header.dump();

  std::string out;
  out.reserve(28 + h.size() + 8 * n);
  out.append(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put(out, kCheckpointVersion);
  detail::put(out, static_cast<std::uint64_t>(h.size()));
  out += h;
  detail::walk_state(m, [&](std::vector<double> &v) {
    out.append(reinterpret_cast<const char *>(v.data()), v.size() * sizeof(double));
  });
  detail::put(out, detail::fnv1a(out));
  return out;
}

/// Rebuilds a model from checkpoint bytes; any inconsistency throws
/// CheckpointError and nothing is returned.
inline Model model_from_checkpoint_bytes(std::string_view in) {
  if (in.size() < sizeof kCheckpointMagic + 4 + 8 + 8)
    throw CheckpointError("checkpoint truncated");
  if (std::memcmp(in.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  std::size_t pos = sizeof kCheckpointMagic;
  const auto version = detail::get<std::uint32_t>(in, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t stored = [&] {
    std::size_t p = in.size() - 8;
    return detail::get<std::uint64_t>(in, p);
  }();
  if (detail::fnv1a(in.substr(0, in.size() - 8)) != stored)
    throw CheckpointError("checkpoint checksum mismatch (file corrupt or truncated)");
  const auto hlen = detail::get<std::uint64_t>(in, pos);
  if (hlen > in.size() - pos - 8)
    throw CheckpointError("checkpoint header length exceeds file size");

  Model m;
  std::size_t expected = 0;
  try {
    const auto header = nlohmann::ordered_json::parse(in.substr(pos, hlen));
    pos += hlen;
    for (const auto &l : header.at("layers"))
      m.add(make_layer(parse_kind(l.at("kind").get<std::string>()), l.at("config")));
    m.set_frozen_layers(header.at("frozen").get<std::set<std::size_t>>());
    m.set_step(header.at("step").get<std::uint64_t>());
    m.definition = header.at("definition");
    m.metadata = header.at("metadata");
    expected = header.at("payload_doubles").get<std::size_t>();
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(std::string("checkpoint header invalid: ") + e.what());
  } catch (const CheckpointError &) {
    throw;
  } catch (const Error &e) {
    throw CheckpointError(std::string("checkpoint header invalid: ") + e.what());
  }
  std::size_t n = 0;
  detail::walk_state(m, [&](std::vector<double> &v) { n += v.size(); });
  if (n != expected || in.size() - pos - 8 != 8 * n)
    throw CheckpointError("checkpoint payload size does not match its layer definitions");
  detail::walk_state(m, [&](std::vector<double> &v) {
    std::memcpy(v.data(), in.data() + pos, v.size() * sizeof(double));
    pos += v.size() * sizeof(double);
  });
  return m;
}

inline void save_checkpoint(const Model &model, const std::filesystem::path &path) {
  try {
    io::write_file_atomic(path, checkpoint_bytes(model));
  } catch (const FormatError &e) {
    throw CheckpointError(e.what());
  }
}

inline Model load_checkpoint(const std::filesystem::path &path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const FormatError &e) {
    throw CheckpointError(e.what());
  }
  return model_from_checkpoint_bytes(bytes);
}

} // namespace exo::nn
