#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace lrq {

/// Counter-based random stream. Draw i of stream (seed, id) is a pure function
/// of (seed, id, i), so results do not depend on scheduling.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential(double rate);

  /// Independent child stream; children of distinct indices never overlap.
  RngStream substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// Index drawn with probability weights[i] / total; zero weights are never chosen.
std::size_t draw_index(std::span<const double> weights, double total, RngStream& rng);

}  // namespace lrq
