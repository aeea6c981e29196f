#include "emv/digest.hpp"

#include <cstdio>
#include <cstring>

namespace emv {

Digest& Digest::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h_ ^= p[i];
    h_ *= 0x100000001b3ULL;
  }
  return *this;
}

Digest& Digest::text(std::string_view s) {
  const std::uint64_t n = s.size();
  bytes(&n, sizeof n);
  return bytes(s.data(), s.size());
}

Digest& Digest::number(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return bytes(&bits, sizeof bits);
}

Digest& Digest::numbers(const std::vector<double>& v) {
  const std::uint64_t n = v.size();
  bytes(&n, sizeof n);
  for (double x : v) number(x);
  return *this;
}

std::string Digest::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
  return buf;
}

std::string digest_hex(std::string_view s) { return Digest().text(s).hex(); }

}  // namespace emv
