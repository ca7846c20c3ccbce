#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "forge/error.hpp"

namespace forge::varint {

inline void put(std::string& out, std::uint64_t v) {
    while (v >= 0x80) {
        out += static_cast<char>((v & 0x7F) | 0x80);
        v >>= 7;
    }
    out += static_cast<char>(v);
}

inline void put_f64(std::string& out, double d) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) out += static_cast<char>((bits >> (8 * i)) & 0xFF);
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint64_t get() {
        std::uint64_t v = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            if (pos_ >= data_.size()) throw IoError("truncated varint");
            const auto b = static_cast<unsigned char>(data_[pos_++]);
            v |= std::uint64_t{b & 0x7Fu} << shift;
            if ((b & 0x80) == 0) return v;
        }
        throw IoError("varint too long");
    }

    double get_f64() {
        if (pos_ + 8 > data_.size()) throw IoError("truncated float");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t{static_cast<unsigned char>(data_[pos_++])} << (8 * i);
        double d = 0;
        std::memcpy(&d, &bits, sizeof d);
        return d;
    }

    std::string_view take(std::size_t n) {
        if (pos_ + n > data_.size()) throw IoError("truncated data");
        const auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const noexcept { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace forge::varint
