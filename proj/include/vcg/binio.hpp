#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "vcg/errors.hpp"

namespace vcg {

// Little-endian byte-buffer writer for the packed snapshot formats.
class BinWriter {
public:
    void u16(uint16_t v) { put(&v, 2); }
    void u32(uint32_t v) { put(&v, 4); }
    void u64(uint64_t v) { put(&v, 8); }
    void f32(float v) { put(&v, 4); }
    void f64(double v) { put(&v, 8); }

    void magic(const char tag[5]) { buf_.insert(buf_.end(), tag, tag + 4); }

    void str16(const std::string& s) {
        if (s.size() > 0xFFFF) throw DataError("string too long for u16 length prefix");
        u16(static_cast<uint16_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    const std::vector<uint8_t>& bytes() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    void put(const void* p, size_t n) {
        static_assert(std::endian::native == std::endian::little,
                      "big-endian hosts need byte swaps here");
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }

    std::vector<uint8_t> buf_;
};

// Little-endian reader with truncation checks.
class BinReader {
public:
    BinReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
    explicit BinReader(const std::vector<uint8_t>& buf) : BinReader(buf.data(), buf.size()) {}

    uint16_t u16() { return get<uint16_t>(); }
    uint32_t u32() { return get<uint32_t>(); }
    uint64_t u64() { return get<uint64_t>(); }
    float f32() { return get<float>(); }
    double f64() { return get<double>(); }

    void expect_magic(const char tag[5]) {
        if (size_ - pos_ < 4) throw DataError("truncated file: missing magic");
        if (std::memcmp(data_ + pos_, tag, 4) != 0)
            throw DataError(std::string("bad magic, expected ") + tag);
        pos_ += 4;
    }

    std::string str16() {
        uint16_t n = u16();
        if (size_ - pos_ < n) throw DataError("truncated file: string");
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == size_; }
    size_t remaining() const { return size_ - pos_; }

private:
    template <typename T>
    T get() {
        static_assert(std::endian::native == std::endian::little,
                      "big-endian hosts need byte swaps here");
        if (size_ - pos_ < sizeof(T)) throw DataError("truncated file");
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

// Line-oriented text files; paths ending in ".gz" are gzip-compressed.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace vcg
