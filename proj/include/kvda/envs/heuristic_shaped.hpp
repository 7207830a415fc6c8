#pragma once

#include <concepts>
#include <limits>

#include "kvda/core/mdp.hpp"

namespace kvda {

/// Two-player, zero-sum, deterministic game seen from player one. The
/// heuristic is from player one's perspective and includes any win bonus.
template <class G>
concept TwoPlayerGame = requires(const G g, const typename G::Position p, int move, std::string_view e) {
  { g.initial() } -> std::same_as<typename G::Position>;
  { g.legal_moves(p) } -> std::same_as<std::vector<int>>;
  { g.play(p, move) } -> std::same_as<typename G::Position>;
  { g.is_over(p) } -> std::same_as<bool>;
  { g.heuristic(p) } -> std::convertible_to<double>;
  { g.encode(p) } -> std::same_as<std::string>;
  { g.decode(e) } -> std::same_as<typename G::Position>;
};

/// A game turned into a single-agent MDP: the agent plays player one, a
/// deterministic one-step lookahead opponent replies, and the reward of a
/// transition is V^h(after reply) - V^h(before move), so returns telescope.
template <TwoPlayerGame G>
class HeuristicShapedMdp final : public Mdp {
 public:
  using Position = typename G::Position;

  HeuristicShapedMdp(G game, std::uint32_t horizon, std::string name)
      : game_(std::move(game)), horizon_(horizon), name_(std::move(name)) {
    if (horizon_ == 0) throw ConfigError("horizon must be positive");
  }

  std::string name() const override { return name_; }
  std::uint32_t horizon() const override { return horizon_; }
  const G& game() const { return game_; }

  StateHandle initial_state(Rng&) const override { return {game_.encode(game_.initial()), 0}; }

  bool is_terminal(const StateHandle& s) const override {
    return s.layer >= horizon_ || game_.is_over(game_.decode(s.encoding));
  }

  std::size_t num_actions(const StateHandle& s) const override {
    return is_terminal(s) ? 0 : game_.legal_moves(game_.decode(s.encoding)).size();
  }

  std::vector<Outcome> outcomes(const StateHandle& s, ActionId a) const override {
    const Position before = game_.decode(s.encoding);
    const auto moves = game_.legal_moves(before);
    if (a >= moves.size()) throw PreconditionError("illegal move");
    Position after = game_.play(before, moves[a]);
    if (!game_.is_over(after)) after = game_.play(after, opponent_move(after));
    const double r = static_cast<double>(game_.heuristic(after)) - static_cast<double>(game_.heuristic(before));
    return {{{game_.encode(after), s.layer + 1}, 1.0, r}};
  }

  /// The opponent's move maximizing its own heuristic value, i.e. minimizing
  /// player one's; ties go to the lowest move index.
  int opponent_move(const Position& p) const {
    const auto moves = game_.legal_moves(p);
    if (moves.empty()) throw PreconditionError("opponent has no legal move");
    int best = moves.front();
    double best_value = std::numeric_limits<double>::infinity();
    for (int m : moves) {
      const double v = static_cast<double>(game_.heuristic(game_.play(p, m)));
      if (v < best_value) {
        best_value = v;
        best = m;
      }
    }
    return best;
  }

  double heuristic(const StateHandle& s) const {
    return static_cast<double>(game_.heuristic(game_.decode(s.encoding)));
  }

 private:
  G game_;
  std::uint32_t horizon_;
  std::string name_;
};

}  // namespace kvda
