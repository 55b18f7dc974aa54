#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "disco/common.hpp"

namespace disco {

// Deterministic random source. All distribution mappings are implemented
// here (not via std:: distributions, whose output is implementation-defined)
// so that identical seeds give identical streams everywhere the artifact runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform index in {0, ..., n-1}.
  std::size_t index(std::size_t n) {
    require(n > 0, ErrorCode::InvalidArgument, "index() needs n > 0");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::string save_state() const {
    std::ostringstream out;
    out << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    out.precision(17);
    out << spare_;
    return out.str();
  }

  void load_state(const std::string& state) {
    std::istringstream in(state);
    int has_spare = 0;
    in >> engine_ >> has_spare >> spare_;
    require(!in.fail(), ErrorCode::IoError, "bad rng state string");
    has_spare_ = has_spare != 0;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Named sub-stream derivation: one master seed fans out into independent
// streams ("env", "policy-noise", "relabel", "fitting-noise", ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index = 0) {
  return splitmix64(master ^ splitmix64(fnv1a64(stream) + 0x517cc1b727220a95ULL * index));
}

inline Rng derive_rng(std::uint64_t master, std::string_view stream,
                      std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

}  // namespace disco
