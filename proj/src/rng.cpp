#include "lrq/rng.hpp"

#include <cmath>
#include <numbers>

namespace lrq {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix64(mix64(seed) ^ mix64(~stream_id))) {}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

double RngStream::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::exponential(double rate) { return -std::log(uniform()) / rate; }

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(seed_, mix64(stream_id_ * 0x9e3779b97f4a7c15ULL ^ mix64(index + 1)));
}

std::size_t draw_index(std::span<const double> weights, double total, RngStream& rng) {
  const double target = rng.uniform() * total;
  double cum = 0.0;
  std::size_t last = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cum += weights[i];
    last = i;
    if (target < cum) return i;
  }
  return last;  // rounding in the cumulative sum
}

}  // namespace lrq
