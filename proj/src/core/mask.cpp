#include "confattr/mask.hpp"

#include <bit>
#include <string>

#include "confattr/error.hpp"

namespace confattr {

namespace {

constexpr std::size_t kWordBits = 64;

std::size_t word_count(std::size_t width) { return (width + kWordBits - 1) / kWordBits; }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

CoalitionMask::CoalitionMask(std::size_t width) : width_(width), words_(word_count(width), 0) {}

CoalitionMask CoalitionMask::full(std::size_t width) {
  CoalitionMask m(width);
  for (std::size_t j = 0; j < width; ++j) m.set(j);
  return m;
}

CoalitionMask CoalitionMask::from_bits(std::size_t width, std::uint64_t bits) {
  if (width > kWordBits) throw Error(ErrorCode::WidthMismatch, "from_bits requires width <= 64");
  CoalitionMask m(width);
  if (width > 0) {
    const std::uint64_t keep = width == kWordBits ? ~0ULL : ((1ULL << width) - 1);
    m.words_[0] = bits & keep;
  }
  return m;
}

CoalitionMask CoalitionMask::from_indices(std::size_t width, const std::vector<std::size_t>& members) {
  CoalitionMask m(width);
  for (std::size_t j : members) m.set(j);
  return m;
}

CoalitionMask CoalitionMask::from_hex(std::size_t width, const std::string& hex) {
  CoalitionMask m(width);
  std::size_t bit = 0;
  for (auto it = hex.rbegin(); it != hex.rend(); ++it) {
    const int v = hex_value(*it);
    if (v < 0) throw Error(ErrorCode::InvalidConfig, "bad hex digit in mask '" + hex + "'");
    for (int b = 0; b < 4; ++b, ++bit) {
      if ((v >> b) & 1) {
        if (bit >= width) throw Error(ErrorCode::WidthMismatch, "mask '" + hex + "' exceeds width");
        m.set(bit);
      }
    }
  }
  return m;
}

std::size_t CoalitionMask::count() const noexcept {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

bool CoalitionMask::test(std::size_t j) const {
  if (j >= width_) throw Error(ErrorCode::WidthMismatch, "bit index out of range");
  return (words_[j / kWordBits] >> (j % kWordBits)) & 1ULL;
}

void CoalitionMask::set(std::size_t j, bool value) {
  if (j >= width_) throw Error(ErrorCode::WidthMismatch, "bit index out of range");
  const std::uint64_t bit = 1ULL << (j % kWordBits);
  if (value) {
    words_[j / kWordBits] |= bit;
  } else {
    words_[j / kWordBits] &= ~bit;
  }
}

CoalitionMask CoalitionMask::complement() const {
  CoalitionMask m(width_);
  for (std::size_t w = 0; w < words_.size(); ++w) m.words_[w] = ~words_[w];
  const std::size_t tail = width_ % kWordBits;
  if (tail != 0) m.words_.back() &= (1ULL << tail) - 1;
  return m;
}

CoalitionMask CoalitionMask::with(std::size_t j) const {
  CoalitionMask m = *this;
  m.set(j, true);
  return m;
}

CoalitionMask CoalitionMask::without(std::size_t j) const {
  CoalitionMask m = *this;
  m.set(j, false);
  return m;
}

std::vector<std::size_t> CoalitionMask::indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t bits = words_[w];
    while (bits != 0) {
      out.push_back(w * kWordBits + static_cast<std::size_t>(std::countr_zero(bits)));
      bits &= bits - 1;
    }
  }
  return out;
}

std::uint64_t CoalitionMask::to_u64() const {
  if (width_ > kWordBits) throw Error(ErrorCode::WidthMismatch, "to_u64 requires width <= 64");
  return words_.empty() ? 0 : words_[0];
}

std::string CoalitionMask::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const std::size_t digits = width_ == 0 ? 1 : (width_ + 3) / 4;
  std::string out(digits, '0');
  for (std::size_t d = 0; d < digits; ++d) {
    const std::size_t bit = d * 4;
    const std::uint64_t word = words_.empty() ? 0 : words_[bit / kWordBits];
    const unsigned nibble = static_cast<unsigned>((word >> (bit % kWordBits)) & 0xF);
    out[digits - 1 - d] = kDigits[nibble];
  }
  return out;
}

std::strong_ordering CoalitionMask::operator<=>(const CoalitionMask& other) const {
  if (auto c = width_ <=> other.width_; c != 0) return c;
  for (std::size_t w = words_.size(); w-- > 0;) {
    if (auto c = words_[w] <=> other.words_[w]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

std::size_t CoalitionMaskHash::operator()(const CoalitionMask& m) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ m.width();
  for (auto w : m.words()) {
    h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

}  // namespace confattr
