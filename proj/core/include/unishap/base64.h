#ifndef UNISHAP_BASE64_H_
#define UNISHAP_BASE64_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace unishap {

std::string Base64Encode(const std::uint8_t* data, std::size_t size);
std::string Base64Encode(const std::vector<std::uint8_t>& bytes);

// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> Base64Decode(std::string_view text);

}  // namespace unishap

#endif  // UNISHAP_BASE64_H_
