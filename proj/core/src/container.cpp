#include "fmmds/container.hpp"

#include "fmmds/errors.hpp"

#include <algorithm>
#include <istream>
#include <iterator>
#include <ostream>

namespace fmmds
{

void ByteWriter::array_u32(std::span<const std::uint32_t> v)
{
    array(v, [](ByteWriter& w, std::uint32_t x) { w.u32(x); });
}

void ByteWriter::array_u64(std::span<const std::uint64_t> v)
{
    array(v, [](ByteWriter& w, std::uint64_t x) { w.u64(x); });
}

void ByteWriter::array_f64(std::span<const double> v)
{
    array(v, [](ByteWriter& w, double x) { w.f64(x); });
}

std::uint64_t ByteReader::get(int n)
{
    if (bytes_.size() - pos_ < std::size_t(n)) { throw FormatError("truncated binary container"); }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
    {
        v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += n;
    return v;
}

std::size_t ByteReader::array_length(std::size_t minElementBytes)
{
    std::uint64_t n = u64();
    if (minElementBytes > 0 && n > (bytes_.size() - pos_) / minElementBytes)
    {
        throw FormatError("array length exceeds the remaining payload");
    }
    return std::size_t(n);
}

std::vector<std::uint32_t> ByteReader::array_u32()
{
    std::vector<std::uint32_t> v(array_length(4));
    for (auto& x : v)
    {
        x = u32();
    }
    return v;
}

std::vector<std::uint64_t> ByteReader::array_u64()
{
    std::vector<std::uint64_t> v(array_length(8));
    for (auto& x : v)
    {
        x = u64();
    }
    return v;
}

std::vector<double> ByteReader::array_f64()
{
    std::vector<double> v(array_length(8));
    for (auto& x : v)
    {
        x = f64();
    }
    return v;
}

std::array<char, 4> ContainerSection::make_tag(std::string_view name)
{
    if (name.size() != 4) { throw DomainError("section tags are exactly four characters"); }
    return {name[0], name[1], name[2], name[3]};
}

const ContainerSection* Container::find(std::string_view tag) const
{
    auto it = std::find_if(sections.begin(), sections.end(), [&](const ContainerSection& s) {
        return std::string_view(s.tag.data(), 4) == tag;
    });
    return it == sections.end() ? nullptr : &*it;
}

std::vector<std::uint8_t> container_bytes(const Container& container)
{
    ByteWriter w;
    for (char c : std::string_view("FMMS"))
    {
        w.u8(std::uint8_t(c));
    }
    w.u32(container.version);
    w.u32(container.l_max);
    w.u32(std::uint32_t(container.sections.size()));
    for (const auto& s : container.sections)
    {
        for (char c : s.tag)
        {
            w.u8(std::uint8_t(c));
        }
        w.u64(s.payload.size());
        for (auto b : s.payload)
        {
            w.u8(b);
        }
    }
    return w.release();
}

Container container_from_bytes(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes);
    char       magic[4];
    for (char& c : magic)
    {
        c = char(r.u8());
    }
    if (std::string_view(magic, 4) != "FMMS") { throw FormatError("not an FMMS container"); }

    Container c;
    c.version = r.u32();
    if (c.version != kContainerVersion)
    {
        throw FormatError("unsupported container version " + std::to_string(c.version));
    }
    c.l_max                = r.u32();
    std::uint32_t sections = r.u32();
    for (std::uint32_t i = 0; i < sections; ++i)
    {
        ContainerSection s;
        for (char& t : s.tag)
        {
            t = char(r.u8());
        }
        std::size_t n = r.array_length(1);
        s.payload.resize(n);
        for (auto& b : s.payload)
        {
            b = r.u8();
        }
        c.sections.push_back(std::move(s));
    }
    if (!r.at_end()) { throw FormatError("trailing bytes after the last section"); }
    return c;
}

void write_container(std::ostream& os, const Container& container)
{
    auto bytes = container_bytes(container);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) { throw FormatError("failed to write container"); }
}

Container read_container(std::istream& is)
{
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return container_from_bytes(bytes);
}

} // namespace fmmds
