#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "salr/error.hpp"

namespace salr::detail {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swapping");

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    template <typename T>
    void put(T value) {
        append(&value, sizeof(T));
    }

    void put_bytes(std::span<const std::uint8_t> bytes) { append(bytes.data(), bytes.size()); }

    std::size_t size() const noexcept { return out_.size(); }

private:
    void append(const void* src, std::size_t n) {
        if (n == 0) return;
        const std::size_t at = out_.size();
        out_.resize(at + n);
        std::memcpy(out_.data() + at, src, n);
    }

    std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string format)
        : bytes_(bytes), format_(std::move(format)) {}

    template <typename T>
    T get(const char* section) {
        require(sizeof(T), section);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::span<const std::uint8_t> take(std::size_t n, const char* section) {
        require(n, section);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    void seek(std::size_t pos, const char* section) {
        if (pos > bytes_.size())
            throw FormatError(format_ + ": offset of " + section + " section past end of file");
        pos_ = pos;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void require(std::size_t n, const char* section) const {
        if (n > bytes_.size() - pos_) {
            throw FormatError(format_ + ": truncated in " + section + " section (need " +
                              std::to_string(n) + " bytes, have " +
                              std::to_string(bytes_.size() - pos_) + ")");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::string format_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path, const char* format);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes, const char* format);

} // namespace salr::detail
