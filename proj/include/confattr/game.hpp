#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "confattr/mask.hpp"

namespace confattr {

/// A cooperative game over p players queried one coalition at a time.
class CoalitionGame {
 public:
  virtual ~CoalitionGame() = default;

  virtual std::size_t players() const = 0;
  virtual double value(const CoalitionMask& coalition) = 0;

  /// Values for a batch, in input order. Implementations may evaluate
  /// concurrently but must return the same bits as sequential calls.
  virtual std::vector<double> values(std::span<const CoalitionMask> coalitions);

  /// Per-unit values nu_x(S); only games with has_local_values() support it.
  virtual bool has_local_values() const { return false; }
  virtual Eigen::VectorXd local_values(const CoalitionMask& coalition);
};

/// Adapts a plain function of the coalition into a game.
class FunctionGame final : public CoalitionGame {
 public:
  using Fn = std::function<double(const CoalitionMask&)>;

  FunctionGame(std::size_t players, Fn fn) : players_(players), fn_(std::move(fn)) {}

  std::size_t players() const override { return players_; }
  double value(const CoalitionMask& coalition) override {
    ++calls_;
    return fn_(coalition);
  }
  std::size_t calls() const noexcept { return calls_; }

 private:
  std::size_t players_;
  Fn fn_;
  std::size_t calls_ = 0;
};

/// Worker count from the THREADS environment variable, defaulting to the
/// available hardware parallelism (at least 1).
std::size_t configured_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace confattr
