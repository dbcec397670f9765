#ifndef FAIROT_SHA256_HPP
#define FAIROT_SHA256_HPP

#include <string>

namespace fairot {

// hex digest of the given bytes
std::string sha256_hex(const std::string& data);

std::string sha256_file_hex(const std::string& path);

} // namespace fairot

#endif
