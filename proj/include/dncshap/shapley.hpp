#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dncshap/error.hpp"

namespace dncshap {

// A coalition game over n players. Subsets are bitmasks (player i = bit i).
// Values are memoized so an expensive value function (a model call) is hit at
// most once per subset.
class CoalitionGame {
 public:
  CoalitionGame(int n, std::function<double(std::uint32_t)> value_fn)
      : n_(n), value_fn_(std::move(value_fn)) {
    if (n < 1 || n > 31) throw UserError("coalition game: player count must be in [1,31]");
  }

  int players() const { return n_; }
  std::uint32_t full_mask() const { return (1u << n_) - 1u; }

  double value(std::uint32_t subset) const {
    if (subset & ~full_mask()) throw UserError("coalition game: subset references unknown players");
    auto it = cache_.find(subset);
    if (it != cache_.end()) return it->second;
    const double v = value_fn_(subset);
    if (!std::isfinite(v)) throw NumericError("coalition game: value function returned non-finite value");
    cache_.emplace(subset, v);
    return v;
  }

  std::size_t evaluations() const { return cache_.size(); }

 private:
  int n_;
  std::function<double(std::uint32_t)> value_fn_;
  mutable std::unordered_map<std::uint32_t, double> cache_;
};

struct ShapleyVector {
  std::vector<double> values;
};

// v(coalition) - v(coalition \ {player}); the player must be present.
inline double marginal_contribution(const CoalitionGame& game, int player, std::uint32_t coalition) {
  const std::uint32_t bit = 1u << player;
  if (player < 0 || player >= game.players()) throw UserError("marginal_contribution: no such player");
  if (!(coalition & bit)) throw UserError("marginal_contribution: player not in coalition");
  return game.value(coalition) - game.value(coalition & ~bit);
}

// Closed form for the two-player game:
//   S_a = 1/2 (v_a - v_empty) + 1/2 (v_ab - v_b),  S_b symmetric.
// Their sum telescopes to v_ab - v_empty.
inline std::pair<double, double> two_player_shapley(double v_empty, double v_a, double v_b, double v_ab) {
  const double s_a = 0.5 * (v_a - v_empty) + 0.5 * (v_ab - v_b);
  const double s_b = 0.5 * (v_b - v_empty) + 0.5 * (v_ab - v_a);
  return {s_a, s_b};
}

// Classical Shapley values by full subset enumeration:
//   phi_i = sum over S not containing i of |S|!(n-|S|-1)!/n! (v(S+i) - v(S)).
// This is the exponential-time reference oracle; n is capped so a stray call
// cannot enumerate forever. Subsets are visited in increasing mask order,
// which for n = 2 reproduces two_player_shapley bit for bit.
inline ShapleyVector exact_shapley(const CoalitionGame& game) {
  const int n = game.players();
  if (n > 20) throw UserError("exact_shapley: refusing enumeration for n > 20 players");
  std::vector<double> fact(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) fact[i] = fact[i - 1] * i;

  ShapleyVector out;
  out.values.assign(static_cast<std::size_t>(n), 0.0);
  const std::uint32_t full = game.full_mask();
  for (int i = 0; i < n; ++i) {
    const std::uint32_t bit = 1u << i;
    double phi = 0.0;
    for (std::uint32_t s = 0; s <= full; ++s) {
      if (s & bit) continue;
      const int size = __builtin_popcount(s);
      const double weight = fact[size] * fact[n - 1 - size] / fact[n];
      phi += weight * (game.value(s | bit) - game.value(s));
    }
    out.values[static_cast<std::size_t>(i)] = phi;
  }
  return out;
}

}  // namespace dncshap
