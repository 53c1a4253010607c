#include "sprayeval/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace sprayeval {
namespace {

constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_header(std::vector<std::uint8_t>& out, const char* magic, const std::vector<Index>& shape) {
    out.insert(out.end(), magic, magic + 4);
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(shape.size()));
    out.push_back(0);
    out.push_back(0);
    for (Index e : shape) {
        if (e > std::numeric_limits<std::uint32_t>::max()) throw ArgumentError("extent does not fit in u32");
        put_u32(out, static_cast<std::uint32_t>(e));
    }
}

struct Header {
    std::vector<Index> shape;
    std::uint64_t count = 1;
    std::size_t payload_offset = 0;
};

Header parse_header(std::span<const std::uint8_t> bytes, const char* magic) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), magic, 4) != 0) {
        throw FormatError(std::string("missing ") + magic + " magic");
    }
    if (bytes[4] != kVersion) throw FormatError("unsupported version " + std::to_string(bytes[4]));
    const int rank = bytes[5];
    if (rank != 2 && rank != 3) throw FormatError("unsupported rank " + std::to_string(rank));
    if (bytes[6] != 0 || bytes[7] != 0) throw FormatError("reserved header bytes must be zero");
    if (bytes.size() < 8 + 4 * static_cast<std::size_t>(rank)) throw FormatError("truncated header");

    Header h;
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t e = get_u32(bytes.data() + 8 + 4 * i);
        if (e == 0) throw FormatError("zero extent in header");
        h.shape.push_back(static_cast<Index>(e));
        h.count *= e;
        if (h.count > (std::uint64_t{1} << 40)) throw FormatError("header extents are implausibly large");
    }
    h.payload_offset = 8 + 4 * static_cast<std::size_t>(rank);
    return h;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + 4 * t.shape().size() + 4 * static_cast<std::size_t>(t.size()));
    put_header(out, "TNSR", t.shape());
    for (Index i = 0; i < t.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(t.data()[i]));
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    const Header h = parse_header(bytes, "TNSR");
    const std::uint64_t payload = bytes.size() - h.payload_offset;
    if (payload != h.count * 4) {
        throw CorruptionError("TNSR payload is " + std::to_string(payload) + " bytes, header implies " +
                              std::to_string(h.count * 4));
    }
    Tensor::Array data(static_cast<Index>(h.count));
    const std::uint8_t* p = bytes.data() + h.payload_offset;
    for (Index i = 0; i < data.size(); ++i) data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    if (!data.allFinite()) throw CorruptionError("TNSR payload contains non-finite values");
    return Tensor(h.shape, std::move(data));
}

std::vector<std::uint8_t> encode_mask(const LabelMask& m) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + static_cast<std::size_t>(m.size()));
    put_header(out, "LMSK", {m.height(), m.width()});
    out.insert(out.end(), m.labels().data(), m.labels().data() + m.size());
    return out;
}

LabelMask decode_mask(std::span<const std::uint8_t> bytes, int num_classes) {
    const Header h = parse_header(bytes, "LMSK");
    if (h.shape.size() != 2) throw FormatError("LMSK must have rank 2");
    if (bytes.size() - h.payload_offset != h.count) throw CorruptionError("LMSK payload length mismatch");
    LabelMask::Matrix labels(h.shape[0], h.shape[1]);
    std::memcpy(labels.data(), bytes.data() + h.payload_offset, h.count);
    return LabelMask(std::move(labels), num_classes);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) { write_file_bytes(path, encode_tensor(t)); }

Tensor read_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_tensor(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const CorruptionError& e) {
        throw CorruptionError(path.string() + ": " + e.what());
    }
}

void write_mask(const LabelMask& m, const std::filesystem::path& path) { write_file_bytes(path, encode_mask(m)); }

LabelMask read_mask(const std::filesystem::path& path, int num_classes) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_mask(bytes, num_classes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace sprayeval
