/*! @file
 * @brief Little-endian, versioned binary container for dumping built structures
 *
 * Layout: magic "FMMS", version u32, l_max u32, section count u32, then per section a
 * 4-byte tag, a u64 payload length and the payload. Arrays inside payloads are a u64
 * element count followed by the elements, all little-endian; reals are IEEE-754 bit
 * patterns so round trips are bit-exact.
 */
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fmmds
{

inline constexpr std::uint32_t kContainerVersion = 1;

class ByteWriter
{
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i32(std::int32_t v) { u32(std::uint32_t(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    template<class T, class Put>
    void array(std::span<const T> values, Put&& put)
    {
        u64(values.size());
        for (const auto& v : values)
        {
            put(*this, v);
        }
    }
    void array_u32(std::span<const std::uint32_t> v);
    void array_u64(std::span<const std::uint64_t> v);
    void array_f64(std::span<const double> v);

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t> release() { return std::move(bytes_); }

private:
    void put(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i)
        {
            bytes_.push_back(std::uint8_t(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> bytes_;
};

//! Throws FormatError when reading past the end.
class ByteReader
{
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes)
        : bytes_(bytes)
    {
    }

    std::uint8_t  u8() { return std::uint8_t(get(1)); }
    std::uint32_t u32() { return std::uint32_t(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int32_t  i32() { return std::int32_t(u32()); }
    double        f64() { return std::bit_cast<double>(get(8)); }

    //! Reads an element count and checks that at least count * minElementBytes remain.
    std::size_t array_length(std::size_t minElementBytes);
    std::vector<std::uint32_t> array_u32();
    std::vector<std::uint64_t> array_u64();
    std::vector<double>        array_f64();

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    std::uint64_t get(int n);

    std::span<const std::uint8_t> bytes_;
    std::size_t                   pos_{0};
};

struct ContainerSection
{
    std::array<char, 4>       tag{};
    std::vector<std::uint8_t> payload;

    static std::array<char, 4> make_tag(std::string_view name);
};

struct Container
{
    std::uint32_t                 version{kContainerVersion};
    std::uint32_t                 l_max{0};
    std::vector<ContainerSection> sections;

    //! nullptr if absent
    const ContainerSection* find(std::string_view tag) const;
};

void write_container(std::ostream& os, const Container& container);
Container read_container(std::istream& is);

std::vector<std::uint8_t> container_bytes(const Container& container);
Container container_from_bytes(std::span<const std::uint8_t> bytes);

} // namespace fmmds
