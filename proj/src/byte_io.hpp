#pragma once

// Little-endian byte serialisation shared by the record and checkpoint codecs.

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "amff/error.hpp"

namespace amff::detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    void put_le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    static constexpr std::size_t kHeader = static_cast<std::size_t>(-1);

    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    void set_record(std::size_t index) { record_ = index; }

    std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t u64() { return get_le(8); }
    double f32() {
        const float f = std::bit_cast<float>(u32());
        if (!std::isfinite(f)) fail(ErrorCode::Format, where() + ": non-finite value");
        return static_cast<double>(f);
    }
    double f64() {
        const double d = std::bit_cast<double>(u64());
        if (!std::isfinite(d)) fail(ErrorCode::Format, where() + ": non-finite value");
        return d;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::string where() const {
        return record_ == kHeader ? std::string("header") : "record " + std::to_string(record_);
    }

private:
    void need(std::size_t n) {
        if (remaining() < n) fail(ErrorCode::Format, where() + ": truncated");
    }
    std::uint64_t get_le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
    std::size_t record_ = kHeader;
};

}  // namespace amff::detail
