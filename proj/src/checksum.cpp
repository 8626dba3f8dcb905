#include "crnn/checksum.hpp"

#include <cstdio>

namespace crnn {

void Fnv1a::add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h_ ^= p[i];
        h_ *= 1099511628211ull;
    }
}

std::uint64_t fnv1a(std::string_view bytes) {
    Fnv1a h;
    h.add_bytes(bytes.data(), bytes.size());
    return h.value();
}

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace crnn
