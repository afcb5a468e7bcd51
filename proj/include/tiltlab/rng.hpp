#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tiltlab {

// Seeded, stream-addressable generator. Identical (seed, stream_id, draw
// count) reproduces identical output bit-for-bit on every platform we target
// (mt19937_64 + our own Box-Muller; no libstdc++ distribution objects, whose
// algorithms are implementation-defined).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Uniform on (0, 1].
  double uniform();
  double gaussian();
  void fill_gaussian(std::span<double> out);
  // Uniform integer in [0, bound), rejection sampled.
  std::uint64_t integer(std::uint64_t bound);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream-id allocation scheme used by the harness: one block per matrix
// instance, a purpose slot within the block, and a lane for parallel work
// (e.g. one lane per simulated path).
inline std::uint64_t make_stream_id(std::uint64_t instance, std::uint64_t purpose,
                                    std::uint64_t lane = 0) {
  return (instance << 24) | (purpose << 16) | lane;
}

}  // namespace tiltlab
