#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

namespace crnn {

/// 64-bit FNV-1a, used to fingerprint models and artifacts.
class Fnv1a {
public:
    void add_bytes(const void* data, std::size_t n);

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void add(const T& v) {
        add_bytes(&v, sizeof(T));
    }

    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 14695981039346656037ull;
};

std::uint64_t fnv1a(std::string_view bytes);
std::string to_hex(std::uint64_t v);

}  // namespace crnn
