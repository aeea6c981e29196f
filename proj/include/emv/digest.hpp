#pragma once

// 64-bit FNV-1a content digest, rendered as 16 hex digits. Used to fingerprint
// configurations and parameter sets, not for security.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace emv {

class Digest {
 public:
  Digest& bytes(const void* data, std::size_t n);
  Digest& text(std::string_view s);
  Digest& number(double v);
  Digest& numbers(const std::vector<double>& v);

  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string digest_hex(std::string_view s);

}  // namespace emv
