#pragma once

// Checkpoint byte layout (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "STCHNET\0"
//   8       4     u32 format version (kCheckpointVersion)
//   12      4     u32 scalar size in bytes (4 = float, 8 = double)
//   16      4     u32 head (0 linear, 1 tanh, 2 softmax)
//   20      4     u32 layer count L
//   24      8L    shape table: u32 fan_in, u32 fan_out per layer
//   ...           payload: per layer, weight column-major (fan_in * fan_out
//                 scalars) followed by bias (fan_out scalars), IEEE-754 LE
//
// Nothing follows the payload; trailing bytes are a format error.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "stitch/error.hpp"
#include "stitch/nn/dense_net.hpp"

namespace stitch::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public FormatError {
 public:
  enum class Kind { Io, BadMagic, Version, Truncated, ScalarType, Shape };
  CheckpointError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

template <typename T>
void save_checkpoint(const DenseNet<T>& net, const std::filesystem::path& path);

template <typename T>
DenseNet<T> load_checkpoint(const std::filesystem::path& path);

/// Loads and checks the stored widths against `expected`; a mismatch raises
/// a Shape error naming the first differing layer.
template <typename T>
DenseNet<T> load_checkpoint(const std::filesystem::path& path, const std::vector<int>& expected, Head head);

template <typename T>
std::string serialize(const DenseNet<T>& net);
template <typename T>
DenseNet<T> deserialize(const std::string& bytes);

}  // namespace stitch::nn
