#ifndef PSEUDOFIN_LEVEL_HPP
#define PSEUDOFIN_LEVEL_HPP

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pseudofin {

// An ordinal below omega+omega. Fin(n) is n, OmegaPlus(n) is omega+n.
struct LevelOrdinal {
  enum class Tag : std::uint8_t { Fin = 0, OmegaPlus = 1 };

  Tag tag = Tag::Fin;
  std::uint32_t index = 0;

  static constexpr LevelOrdinal fin(std::uint32_t n) { return {Tag::Fin, n}; }
  static constexpr LevelOrdinal omega_plus(std::uint32_t n) { return {Tag::OmegaPlus, n}; }
  static constexpr LevelOrdinal omega() { return omega_plus(0); }

  constexpr bool is_finite() const { return tag == Tag::Fin; }

  // Never crosses from the finite block into the omega block.
  constexpr LevelOrdinal successor() const { return {tag, index + 1}; }

  friend constexpr auto operator<=>(const LevelOrdinal&, const LevelOrdinal&) = default;
  friend constexpr bool operator==(const LevelOrdinal&, const LevelOrdinal&) = default;

  // "3", "w", "w+2"
  std::string to_string() const {
    if (tag == Tag::Fin) return std::to_string(index);
    if (index == 0) return "w";
    return "w+" + std::to_string(index);
  }

  static LevelOrdinal parse(std::string_view text) {
    auto parse_nat = [&](std::string_view digits) -> std::uint32_t {
      if (digits.empty()) throw std::invalid_argument("bad level: '" + std::string(text) + "'");
      std::uint64_t value = 0;
      for (char c : digits) {
        if (c < '0' || c > '9') throw std::invalid_argument("bad level: '" + std::string(text) + "'");
        value = value * 10 + static_cast<std::uint64_t>(c - '0');
        if (value > UINT32_MAX) throw std::invalid_argument("level index overflow");
      }
      return static_cast<std::uint32_t>(value);
    };
    if (!text.empty() && (text.front() == 'w' || text.front() == 'W')) {
      if (text.size() == 1) return omega();
      if (text[1] != '+') throw std::invalid_argument("bad level: '" + std::string(text) + "'");
      return omega_plus(parse_nat(text.substr(2)));
    }
    return fin(parse_nat(text));
  }
};

}  // namespace pseudofin

#endif  // PSEUDOFIN_LEVEL_HPP
