#include "flexdecode/matfile.hpp"

#include "flexdecode/io.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>

namespace flexdecode::io {

namespace {

enum : std::uint32_t {
    miINT8 = 1,
    miUINT8 = 2,
    miINT16 = 3,
    miUINT16 = 4,
    miINT32 = 5,
    miUINT32 = 6,
    miSINGLE = 7,
    miDOUBLE = 9,
    miINT64 = 12,
    miUINT64 = 13,
    miMATRIX = 14,
    miCOMPRESSED = 15,
};

constexpr std::uint8_t kFirstNumericClass = 6;  // mxDOUBLE_CLASS
constexpr std::uint8_t kLastNumericClass = 15;  // mxUINT64_CLASS
constexpr std::uint32_t kComplexFlag = 0x0800;

struct Element {
    std::uint32_t type = 0;
    const unsigned char* data = nullptr;
    std::size_t size = 0;
};

template <typename T>
T load(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

class Reader {
public:
    Reader(const unsigned char* p, std::size_t n, std::string where) : p_(p), end_(p + n), where_(std::move(where)) {}

    bool done() const { return p_ >= end_; }

    Element next(bool padded) {
        need(8);
        const auto first = load<std::uint32_t>(p_);
        Element e;
        if ((first >> 16) != 0) {
            // Small data element: type and size packed into the first word.
            e.type = first & 0xffff;
            e.size = first >> 16;
            if (e.size > 4) fail("bad small element");
            e.data = p_ + 4;
            p_ += 8;
            return e;
        }
        e.type = first;
        e.size = load<std::uint32_t>(p_ + 4);
        p_ += 8;
        need(e.size);
        e.data = p_;
        std::size_t step = e.size;
        if (padded) step = (step + 7) / 8 * 8;
        p_ += std::min<std::size_t>(step, static_cast<std::size_t>(end_ - p_));
        return e;
    }

private:
    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end_ - p_) < n) fail("truncated data element");
    }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(where_ + ": " + msg); }

    const unsigned char* p_;
    const unsigned char* end_;
    std::string where_;
};

std::vector<unsigned char> inflate_all(const unsigned char* data, std::size_t size, const std::string& where) {
    std::vector<unsigned char> out(std::max<std::size_t>(size * 4, 1024));
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw ParseError(where + ": zlib init failed");
    zs.next_in = const_cast<unsigned char*>(data);
    zs.avail_in = static_cast<uInt>(size);
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (zs.total_out == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + zs.total_out;
        zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ParseError(where + ": corrupt compressed element");
        }
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw ParseError(where + ": truncated compressed element");
        }
    }
    out.resize(zs.total_out);
    inflateEnd(&zs);
    return out;
}

double numeric_at(const Element& e, std::size_t i) {
    const unsigned char* p = e.data;
    switch (e.type) {
        case miINT8: return load<std::int8_t>(p + i);
        case miUINT8: return load<std::uint8_t>(p + i);
        case miINT16: return load<std::int16_t>(p + 2 * i);
        case miUINT16: return load<std::uint16_t>(p + 2 * i);
        case miINT32: return load<std::int32_t>(p + 4 * i);
        case miUINT32: return load<std::uint32_t>(p + 4 * i);
        case miSINGLE: return load<float>(p + 4 * i);
        case miDOUBLE: return load<double>(p + 8 * i);
        case miINT64: return static_cast<double>(load<std::int64_t>(p + 8 * i));
        case miUINT64: return static_cast<double>(load<std::uint64_t>(p + 8 * i));
        default: return 0.0;
    }
}

std::size_t type_width(std::uint32_t type) {
    switch (type) {
        case miINT8:
        case miUINT8: return 1;
        case miINT16:
        case miUINT16: return 2;
        case miINT32:
        case miUINT32:
        case miSINGLE: return 4;
        case miDOUBLE:
        case miINT64:
        case miUINT64: return 8;
        default: return 0;
    }
}

MatVariable parse_matrix(const Element& m, const std::string& where) {
    Reader r(m.data, m.size, where);
    MatVariable var;
    const Element flags = r.next(true);
    if (flags.type != miUINT32 || flags.size < 8) throw ParseError(where + ": bad array flags");
    const auto word = load<std::uint32_t>(flags.data);
    const auto cls = static_cast<std::uint8_t>(word & 0xff);
    const Element dims = r.next(true);
    if (dims.type != miINT32 || dims.size % 4 != 0) throw ParseError(where + ": bad dimensions");
    std::vector<std::int32_t> shape(dims.size / 4);
    for (std::size_t i = 0; i < shape.size(); ++i) shape[i] = load<std::int32_t>(dims.data + 4 * i);
    const Element name = r.next(true);
    var.name.assign(reinterpret_cast<const char*>(name.data), name.size);

    if (cls < kFirstNumericClass || cls > kLastNumericClass) {
        var.unsupported = "not a numeric array (class " + std::to_string(cls) + ")";
        return var;
    }
    if (word & kComplexFlag) {
        var.unsupported = "complex array";
        return var;
    }
    if (shape.size() != 2) {
        var.unsupported = std::to_string(shape.size()) + "-D array";
        return var;
    }
    const Element real = r.next(true);
    const std::size_t width = type_width(real.type);
    const auto rows = static_cast<std::size_t>(shape[0]);
    const auto cols = static_cast<std::size_t>(shape[1]);
    if (width == 0 || real.size != rows * cols * width) {
        throw ParseError(where + ": variable '" + var.name + "' payload does not match its dimensions");
    }
    var.data.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    // Column-major on disk.
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < rows; ++i) {
            var.data(static_cast<Index>(i), static_cast<Index>(j)) = numeric_at(real, j * rows + i);
        }
    }
    return var;
}

}  // namespace

std::vector<MatVariable> read_mat_file(const std::filesystem::path& path) {
    const std::string bytes = read_text(path);
    const std::string where = path.string();
    if (bytes.size() < 128) throw ParseError(where + ": too short for a MAT file");
    if (bytes.compare(0, 6, "MATLAB") != 0) throw ParseError(where + ": missing MATLAB header text");
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
    const auto version = load<std::uint16_t>(base + 124);
    if (bytes[126] == 'M' && bytes[127] == 'I') throw ParseError(where + ": big-endian MAT files are not supported");
    if (bytes[126] != 'I' || bytes[127] != 'M') throw ParseError(where + ": bad endian indicator");
    if (version == 0x0200) throw ParseError(where + ": MAT v7.3 (HDF5) files are not supported; re-save with -v7");
    if (version != 0x0100) throw ParseError(where + ": unknown MAT version");

    std::vector<MatVariable> vars;
    Reader r(base + 128, bytes.size() - 128, where);
    while (!r.done()) {
        // Top-level elements follow each other without padding: miMATRIX
        // sizes are multiples of 8 already and miCOMPRESSED sizes are exact.
        const Element e = r.next(false);
        if (e.type == miCOMPRESSED) {
            const std::vector<unsigned char> raw = inflate_all(e.data, e.size, where);
            Reader inner(raw.data(), raw.size(), where);
            while (!inner.done()) {
                const Element m = inner.next(true);
                if (m.type == miMATRIX) vars.push_back(parse_matrix(m, where));
            }
        } else if (e.type == miMATRIX) {
            vars.push_back(parse_matrix(e, where));
        }
    }
    return vars;
}

const MatVariable& find_variable(const std::vector<MatVariable>& vars, const std::string& name) {
    std::string available;
    for (const auto& v : vars) {
        if (v.name == name) {
            if (!v.unsupported.empty()) throw ValidationError("variable '" + name + "': " + v.unsupported);
            return v;
        }
        available += (available.empty() ? "" : ", ") + v.name;
    }
    throw ValidationError("variable '" + name + "' not found; file has: " + (available.empty() ? "(none)" : available));
}

}  // namespace flexdecode::io
