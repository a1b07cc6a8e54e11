#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include "divsr/error.hpp"
#include "divsr/model.hpp"

namespace divsr {

// Binary layout (host byte order, little-endian on every supported target):
//   "DIVSRCKP" | u32 version | u32 backbone | u32 social | u32 reserved
//   u64 dim | u64 layers | u64 seed | u64 users | u64 items | u64 trustee_rows
//   f64 user_table[users*dim] | f64 item_table[items*dim] | f64 trustee[rows*dim]
inline constexpr std::string_view kCheckpointMagic = "DIVSRCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("checkpoint truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void read_table(Matrix& t, std::uint64_t rows, std::uint64_t cols) {
    const auto n = rows * cols;
    if (pos_ + n * sizeof(double) > bytes_.size()) throw DataError("checkpoint truncated");
    t.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::memcpy(t.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline void put_table(std::string& buf, const Matrix& t) {
  buf.append(reinterpret_cast<const char*>(t.data()),
             static_cast<std::size_t>(t.size()) * sizeof(double));
}

}  // namespace detail

inline std::string serialize(const EmbeddingModel& m) {
  std::string buf(kCheckpointMagic);
  detail::put<std::uint32_t>(buf, kCheckpointVersion);
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(m.backbone));
  detail::put<std::uint32_t>(buf, m.social_enabled ? 1u : 0u);
  detail::put<std::uint32_t>(buf, 0u);
  detail::put<std::uint64_t>(buf, m.dim);
  detail::put<std::uint64_t>(buf, m.num_layers);
  detail::put<std::uint64_t>(buf, m.seed);
  detail::put<std::uint64_t>(buf, m.num_users());
  detail::put<std::uint64_t>(buf, m.num_items());
  detail::put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.trustee_table.rows()));
  detail::put_table(buf, m.user_table);
  detail::put_table(buf, m.item_table);
  detail::put_table(buf, m.trustee_table);
  return buf;
}

inline EmbeddingModel deserialize(std::string_view bytes) {
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw DataError("not a checkpoint (bad magic)");
  }
  detail::Reader r(bytes.substr(kCheckpointMagic.size()));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  EmbeddingModel m;
  const auto backbone = r.get<std::uint32_t>();
  if (backbone > static_cast<std::uint32_t>(Backbone::DiffNet)) throw DataError("bad backbone");
  m.backbone = static_cast<Backbone>(backbone);
  m.social_enabled = r.get<std::uint32_t>() != 0;
  r.get<std::uint32_t>();
  m.dim = r.get<std::uint64_t>();
  m.num_layers = r.get<std::uint64_t>();
  m.seed = r.get<std::uint64_t>();
  const auto users = r.get<std::uint64_t>();
  const auto items = r.get<std::uint64_t>();
  const auto trustee_rows = r.get<std::uint64_t>();
  r.read_table(m.user_table, users, m.dim);
  r.read_table(m.item_table, items, m.dim);
  r.read_table(m.trustee_table, trustee_rows, trustee_rows > 0 ? m.dim : 0);
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  return m;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_checkpoint(const std::string& path, const EmbeddingModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const auto bytes = serialize(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline EmbeddingModel load_checkpoint(const std::string& path) {
  return deserialize(read_file_bytes(path));
}

// 64-bit FNV-1a, hex encoded.
inline std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string digest(const EmbeddingModel& m) { return digest(serialize(m)); }

}  // namespace divsr
