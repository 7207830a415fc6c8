#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "kvda/envs/heuristic_shaped.hpp"

namespace kvda {

/// Standard 7x6 Connect 4. Player one ('X', 1) moves first; player two is
/// 'O' (2). Moves are column indices.
class Connect4 {
 public:
  static constexpr int kCols = 7;
  static constexpr int kRows = 6;
  static constexpr double kWinBonus = 100.0;

  struct Position {
    std::array<std::uint8_t, kCols * kRows> cell{};  // row 0 is the bottom
    std::uint8_t to_move = 1;

    std::uint8_t at(int col, int row) const { return cell[static_cast<std::size_t>(row * kCols + col)]; }
    friend bool operator==(const Position&, const Position&) = default;
  };

  Position initial() const { return {}; }

  std::vector<int> legal_moves(const Position& p) const {
    std::vector<int> out;
    if (winner(p) != 0) return out;
    for (int c = 0; c < kCols; ++c)
      if (p.at(c, kRows - 1) == 0) out.push_back(c);
    return out;
  }

  Position play(Position p, int col) const {
    if (col < 0 || col >= kCols) throw PreconditionError("column out of range");
    for (int r = 0; r < kRows; ++r) {
      if (p.at(col, r) == 0) {
        p.cell[static_cast<std::size_t>(r * kCols + col)] = p.to_move;
        p.to_move = p.to_move == 1 ? 2 : 1;
        return p;
      }
    }
    throw PreconditionError("column is full");
  }

  bool is_over(const Position& p) const { return winner(p) != 0 || legal_moves(p).empty(); }

  /// 1 or 2 if that player has four in a line, else 0.
  int winner(const Position& p) const {
    const auto a = line_counts(p, 1), b = line_counts(p, 2);
    return a[4] > 0 ? 1 : (b[4] > 0 ? 2 : 0);
  }

  /// n2 + 5 n3 + 25 n4 for player one minus the same for player two, plus
  /// +-100 once a player has won. n_i counts maximal runs of exactly i stones
  /// along a row, column or diagonal (i stones / i); runs longer than four
  /// count as n4.
  double heuristic(const Position& p) const {
    const auto a = line_counts(p, 1), b = line_counts(p, 2);
    auto score = [](const std::array<int, 5>& n) { return n[2] + 5.0 * n[3] + 25.0 * n[4]; };
    double v = score(a) - score(b);
    if (a[4] > 0) v += kWinBonus;
    if (b[4] > 0) v -= kWinBonus;
    return v;
  }

  /// Maximal-run counts for `player`; index 4 holds runs of four or more.
  static std::array<int, 5> line_counts(const Position& p, std::uint8_t player) {
    std::array<int, 5> n{};
    static constexpr std::array<std::pair<int, int>, 4> kDirs{{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};
    for (const auto& [dc, dr] : kDirs) {
      for (int c = 0; c < kCols; ++c)
        for (int r = 0; r < kRows; ++r) {
          if (p.at(c, r) != player) continue;
          const int pc = c - dc, pr = r - dr;
          if (pc >= 0 && pc < kCols && pr >= 0 && pr < kRows && p.at(pc, pr) == player) continue;
          int len = 0;
          for (int x = c, y = r; x >= 0 && x < kCols && y >= 0 && y < kRows && p.at(x, y) == player;
               x += dc, y += dr)
            ++len;
          ++n[static_cast<std::size_t>(std::min(len, 4))];
        }
    }
    return n;
  }

  std::string encode(const Position& p) const {
    std::string e(p.cell.begin(), p.cell.end());
    e.push_back(static_cast<char>(p.to_move));
    return e;
  }

  Position decode(std::string_view e) const {
    if (e.size() != kCols * kRows + 1) throw PreconditionError("not a connect4 state");
    Position p;
    for (std::size_t i = 0; i < p.cell.size(); ++i) p.cell[i] = static_cast<std::uint8_t>(e[i]);
    p.to_move = static_cast<std::uint8_t>(e.back());
    return p;
  }

  /// Parses six rows, top row first, of '.', 'X' (player one), 'O'. Rejects
  /// floating stones and impossible stone counts.
  static Position from_rows(const std::vector<std::string>& rows) {
    if (rows.size() != kRows) throw PreconditionError("connect4 board needs 6 rows");
    Position p;
    int x = 0, o = 0;
    for (int i = 0; i < kRows; ++i) {
      if (rows[static_cast<std::size_t>(i)].size() != kCols) throw PreconditionError("connect4 row needs 7 cells");
      const int r = kRows - 1 - i;
      for (int c = 0; c < kCols; ++c) {
        const char ch = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        std::uint8_t v = 0;
        if (ch == 'X') {
          v = 1;
          ++x;
        } else if (ch == 'O') {
          v = 2;
          ++o;
        } else if (ch != '.') {
          throw PreconditionError("connect4 cells are '.', 'X' or 'O'");
        }
        p.cell[static_cast<std::size_t>(r * kCols + c)] = v;
      }
    }
    for (int c = 0; c < kCols; ++c)
      for (int r = 1; r < kRows; ++r)
        if (p.at(c, r) != 0 && p.at(c, r - 1) == 0) throw PreconditionError("floating stone in connect4 board");
    if (x != o && x != o + 1) throw PreconditionError("impossible stone counts");
    p.to_move = x == o ? 1 : 2;
    return p;
  }
};

using Connect4Mdp = HeuristicShapedMdp<Connect4>;

inline std::shared_ptr<const Connect4Mdp> make_connect4(std::uint32_t horizon = 200) {
  return std::make_shared<Connect4Mdp>(Connect4{}, horizon, "connect4");
}

}  // namespace kvda
