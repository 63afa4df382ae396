#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hgp {

/// Factorization failed even at the top of the jitter ladder.
class NotPsdError : public std::runtime_error {
 public:
  NotPsdError(const std::string& msg, double max_jitter_tried, int attempts)
      : std::runtime_error(msg),
        max_jitter_tried(max_jitter_tried),
        attempts(attempts) {}

  double max_jitter_tried;
  int attempts;
};

/// A cavity variance fell below the configured floor.
class CavityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// EP could not update a single site during a sweep.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& msg, int sweep, std::vector<int> failed_sites)
      : std::runtime_error(msg), sweep(sweep), failed_sites(std::move(failed_sites)) {}

  int sweep;
  std::vector<int> failed_sites;
};

/// Bad experiment configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hgp
