#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace ib {

// Counter-based pseudo-random generator (Philox4x32-10).
//
// Every consumer derives its own stream from (seed, purpose tag, indices...)
// so that results do not depend on evaluation order: example 7 / restart 3 of
// an attack draws the same init noise whether or not examples 0..6 were
// skipped by a short-circuit. Streams are cheap value types.
//
// Stream derivation: the 64-bit stream id is a splitmix64 fold of the tag and
// the indices; the seed keys the cipher. Distinct (tag, indices) paths give
// independent streams for all practical purposes.
class Rng {
 public:
  // Purpose tags for derived streams. Keep stable: they are part of the
  // reproducibility contract (checkpoints and CSVs depend on them).
  enum Tag : std::uint64_t {
    kParamInit = 1,   // (param index)
    kShuffle = 2,     // (epoch)
    kTrainNoise = 3,  // (epoch, iteration)
    kToySample = 4,   // (iteration)   toy resampled batches
    kEvalNoise = 5,   // (context-defined index)
    kAttackInit = 6,  // (example, restart)
    kAttackNoise = 7, // (example, restart)
    kLandscape = 8,   // (0: direction d2, 1: grid noise)
    kDataset = 9,     // (0) fixed synthetic eval sets
  };

  Rng(std::uint64_t seed, std::uint64_t stream);

  // Stream for (seed, tag, idx...). The canonical way to make an Rng.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; generates pairs, caches the spare.
  double normal();

  void fill_uniform(std::span<double> out, double lo, double hi);
  void fill_normal(std::span<double> out);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;   // counter: which 128-bit block comes next
  std::uint32_t buf_[4] = {};
  int pos_ = 4;               // next unread word in buf_, 4 = empty
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 step; also used for dataset fingerprint mixing.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a 64-bit hash of a byte range (dataset/config fingerprints).
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

}  // namespace ib
