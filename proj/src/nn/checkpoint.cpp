#include "stitch/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stitch::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'T', 'C', 'H', 'N', 'E', 'T', '\0'};
using Kind = CheckpointError::Kind;

template <typename V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename V>
  V get(const char* what) {
    if (pos_ + sizeof(V) > bytes_.size())
      throw CheckpointError(Kind::Truncated, std::string("checkpoint truncated while reading ") + what);
    V v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }

  void read_into(void* dst, std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size())
      throw CheckpointError(Kind::Truncated, std::string("checkpoint truncated while reading ") + what);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
std::string serialize(const DenseNet<T>& net) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, sizeof(T));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.head()));
  const auto& layers = net.params();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
  }
  for (const auto& l : layers) {
    out.append(reinterpret_cast<const char*>(l.weight.data()), sizeof(T) * l.weight.size());
    out.append(reinterpret_cast<const char*>(l.bias.data()), sizeof(T) * l.bias.size());
  }
  return out;
}

template <typename T>
DenseNet<T> deserialize(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof(kMagic)];
  r.read_into(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(Kind::BadMagic, "not a network checkpoint (bad magic bytes)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::Version, "unsupported checkpoint version " + std::to_string(version) +
                                             " (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto scalar = r.get<std::uint32_t>("scalar size");
  if (scalar != sizeof(T))
    throw CheckpointError(Kind::ScalarType, "checkpoint stores " + std::to_string(scalar) +
                                                "-byte scalars, expected " + std::to_string(sizeof(T)));
  const auto head = r.get<std::uint32_t>("head");
  if (head > static_cast<std::uint32_t>(Head::Softmax))
    throw CheckpointError(Kind::Shape, "unknown head id " + std::to_string(head));
  const auto n_layers = r.get<std::uint32_t>("layer count");
  if (n_layers == 0 || n_layers > r.remaining() / 8)
    throw CheckpointError(Kind::Truncated, "checkpoint layer table inconsistent with file size");

  std::vector<int> widths;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto fan_in = r.get<std::uint32_t>("shape table");
    const auto fan_out = r.get<std::uint32_t>("shape table");
    if (fan_in == 0 || fan_out == 0)
      throw CheckpointError(Kind::Shape, "layer " + std::to_string(i) + " has a zero dimension");
    if (i == 0) {
      widths.push_back(static_cast<int>(fan_in));
    } else if (static_cast<int>(fan_in) != widths.back()) {
      throw CheckpointError(Kind::Shape, "layer " + std::to_string(i) + " fan_in " + std::to_string(fan_in) +
                                             " does not match previous fan_out " + std::to_string(widths.back()));
    }
    widths.push_back(static_cast<int>(fan_out));
  }

  DenseNet<T> net(widths, static_cast<Head>(head));
  for (auto& l : net.params()) {
    r.read_into(l.weight.data(), sizeof(T) * l.weight.size(), "weights");
    r.read_into(l.bias.data(), sizeof(T) * l.bias.size(), "biases");
  }
  if (!r.at_end()) throw CheckpointError(Kind::Truncated, "trailing bytes after checkpoint payload");
  return net;
}

template <typename T>
void save_checkpoint(const DenseNet<T>& net, const std::filesystem::path& path) {
  const std::string bytes = serialize(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::Io, "write failed: " + path.string());
}

template <typename T>
DenseNet<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize<T>(ss.str());
}

template <typename T>
DenseNet<T> load_checkpoint(const std::filesystem::path& path, const std::vector<int>& expected, Head head) {
  DenseNet<T> net = load_checkpoint<T>(path);
  const auto& got = net.widths();
  if (got.size() != expected.size())
    throw CheckpointError(Kind::Shape, "checkpoint has " + std::to_string(got.size() - 1) + " layers, expected " +
                                           std::to_string(expected.size() - 1));
  for (std::size_t i = 0; i + 1 < got.size(); ++i) {
    if (got[i] != expected[i] || got[i + 1] != expected[i + 1])
      throw CheckpointError(Kind::Shape, "layer " + std::to_string(i) + ": checkpoint shape " +
                                             std::to_string(got[i]) + "x" + std::to_string(got[i + 1]) +
                                             ", expected " + std::to_string(expected[i]) + "x" +
                                             std::to_string(expected[i + 1]));
  }
  if (net.head() != head)
    throw CheckpointError(Kind::Shape, std::string("checkpoint head ") + std::string(to_string(net.head())) +
                                           ", expected " + std::string(to_string(head)));
  return net;
}

#define STITCH_INSTANTIATE(T)                                                                           \
  template std::string serialize(const DenseNet<T>&);                                                   \
  template DenseNet<T> deserialize(const std::string&);                                                 \
  template void save_checkpoint(const DenseNet<T>&, const std::filesystem::path&);                      \
  template DenseNet<T> load_checkpoint(const std::filesystem::path&);                                   \
  template DenseNet<T> load_checkpoint(const std::filesystem::path&, const std::vector<int>&, Head);

STITCH_INSTANTIATE(float)
STITCH_INSTANTIATE(double)

#undef STITCH_INSTANTIATE

}  // namespace stitch::nn
