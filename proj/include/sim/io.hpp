#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sim {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ChecksumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit, fed incrementally while writing/reading.
class Fnv1a64 {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// Little-endian binary writer with a running checksum.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open for writing: " + path);
        path_ = path;
    }

    void write_bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed: " + path_);
        sum_.update(data, n);
    }

    void write_u32(std::uint32_t v) { write_le(v); }
    void write_u64(std::uint64_t v) { write_le(v); }
    void write_i64(std::int64_t v) { write_le(static_cast<std::uint64_t>(v)); }
    void write_f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        write_le(bits);
    }
    void write_f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        write_le(bits);
    }
    void write_string(const std::string& s) {
        write_u32(static_cast<std::uint32_t>(s.size()));
        write_bytes(s.data(), s.size());
    }

    // Appends the checksum of everything written so far and closes the file.
    void finish_with_checksum() {
        const std::uint64_t digest = sum_.digest();
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(digest >> (8 * i));
        out_.write(reinterpret_cast<const char*>(buf), 8);
        out_.close();
        if (!out_) throw IoError("close failed: " + path_);
    }

private:
    template <typename T>
    void write_le(T v) {
        unsigned char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buf[i] = static_cast<unsigned char>(v >> (8 * i));
        write_bytes(buf, sizeof(T));
    }

    std::ofstream out_;
    std::string path_;
    Fnv1a64 sum_;
};

// Reader counterpart. Loads the whole file; the trailing 8 bytes are the
// checksum of everything before them.
class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : path_(path) {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw IoError("cannot open for reading: " + path);
        const auto size = static_cast<std::size_t>(in.tellg());
        in.seekg(0);
        buf_.resize(size);
        if (size > 0) in.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(size));
        if (!in) throw IoError("read failed: " + path);
    }

    // Validates the trailing checksum over buf[0 .. size-8).
    void verify_checksum() const {
        if (buf_.size() < 8) throw ChecksumError("file too short for checksum: " + path_);
        Fnv1a64 sum;
        sum.update(buf_.data(), buf_.size() - 8);
        std::uint64_t stored = 0;
        for (int i = 0; i < 8; ++i)
            stored |= static_cast<std::uint64_t>(buf_[buf_.size() - 8 + i]) << (8 * i);
        if (stored != sum.digest()) throw ChecksumError("checksum mismatch: " + path_);
    }

    std::size_t payload_size() const {
        return buf_.size() >= 8 ? buf_.size() - 8 : 0;
    }

    void read_bytes(void* out, std::size_t n) {
        if (pos_ + n > payload_size()) throw IoError("truncated read: " + path_);
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }

    std::uint32_t read_u32() { return static_cast<std::uint32_t>(read_le(4)); }
    std::uint64_t read_u64() { return read_le(8); }
    std::int64_t read_i64() { return static_cast<std::int64_t>(read_le(8)); }
    float read_f32() {
        const auto bits = static_cast<std::uint32_t>(read_le(4));
        float v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    double read_f64() {
        const auto bits = read_le(8);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string read_string() {
        const auto n = read_u32();
        std::string s(n, '\0');
        read_bytes(s.data(), n);
        return s;
    }

    bool at_payload_end() const { return pos_ == payload_size(); }

private:
    std::uint64_t read_le(std::size_t n) {
        unsigned char buf[8] = {};
        read_bytes(buf, n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        return v;
    }

    std::string path_;
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

}  // namespace sim
