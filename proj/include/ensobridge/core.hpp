#pragma once

#include <cstdint>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace ensobridge {

// Exit-code classes used by the CLI: config 2, data 3, numerical 4.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Counter-based noise. Every draw is a pure function of its keys, so a
// trajectory does not depend on evaluation order or worker count.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_keys(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                        std::uint64_t c = 0);
double uniform01(std::uint64_t h);  // in (0, 1)
double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0);

// Sequential stream for training loops (init, shuffles, batch draws).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}
  std::uint64_t next();
  double uniform();
  double normal();
  std::size_t below(std::size_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n) on the shared worker count. Callers must make
// fn(i) independent of which thread runs it.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ensobridge
