#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace confattr {

/// Fixed-width bitset naming a covariate coalition S. Bit j set means
/// covariate j is in S. Width is the number of players p.
class CoalitionMask {
 public:
  CoalitionMask() = default;
  explicit CoalitionMask(std::size_t width);

  static CoalitionMask empty(std::size_t width) { return CoalitionMask(width); }
  static CoalitionMask full(std::size_t width);
  /// Low `width` bits of `bits` (width <= 64).
  static CoalitionMask from_bits(std::size_t width, std::uint64_t bits);
  static CoalitionMask from_indices(std::size_t width, const std::vector<std::size_t>& members);
  /// Parses the hex form produced by to_hex().
  static CoalitionMask from_hex(std::size_t width, const std::string& hex);

  std::size_t width() const noexcept { return width_; }
  std::size_t count() const noexcept;
  bool test(std::size_t j) const;
  void set(std::size_t j, bool value = true);

  CoalitionMask complement() const;
  CoalitionMask with(std::size_t j) const;
  CoalitionMask without(std::size_t j) const;

  /// Member indices in ascending order.
  std::vector<std::size_t> indices() const;
  /// Bits as an integer; only valid for width <= 64.
  std::uint64_t to_u64() const;
  /// Big-endian hex of the bit vector (most significant word first), fixed
  /// length ceil(width / 4) digits.
  std::string to_hex() const;

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  bool operator==(const CoalitionMask& other) const = default;
  /// Orders masks as unsigned integers of equal width; masks of different
  /// width order by width first.
  std::strong_ordering operator<=>(const CoalitionMask& other) const;

 private:
  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

struct CoalitionMaskHash {
  std::size_t operator()(const CoalitionMask& m) const noexcept;
};

}  // namespace confattr
