#include "uhdres/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace uhdres {

uint32_t crc32_ieee(const uint8_t* data, size_t n, uint32_t seed) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr uint32_t kVersion = 1;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    Reader(const uint8_t* p, size_t n, const std::string& path) : p_(p), n_(n), path_(path) {}

    const uint8_t* take(size_t k) {
        if (pos_ + k > n_) throw CkptTruncatedError(path_ + ": truncated checkpoint file");
        const uint8_t* r = p_ + pos_;
        pos_ += k;
        return r;
    }
    uint16_t u16() {
        const uint8_t* b = take(2);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }
    uint32_t u32() {
        const uint8_t* b = take(4);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    uint8_t u8() { return *take(1); }

private:
    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
    std::string path_;
};

}  // namespace

void write_ckpt_file(const std::string& path, const CkptFile& file) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'U', 'H', 'D', 'R'});
    put_u32(out, kVersion);
    out.push_back(file.elem_tag);
    put_u32(out, static_cast<uint32_t>(file.entries.size()));
    for (const auto& e : file.entries) {
        if (e.name.size() > 0xFFFF) throw ContractError("checkpoint key too long: " + e.name);
        put_u16(out, static_cast<uint16_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(static_cast<uint8_t>(e.shape.size()));
        int64_t numel = 1;
        for (int64_t ext : e.shape) {
            put_u32(out, static_cast<uint32_t>(ext));
            numel *= ext;
        }
        check_contract(numel == static_cast<int64_t>(e.data.size()),
                       "checkpoint entry size mismatch for " + e.name);
        if (file.elem_tag == 1) {
            size_t base = out.size();
            out.resize(base + e.data.size() * 8);
            std::memcpy(out.data() + base, e.data.data(), e.data.size() * 8);
        } else {
            std::vector<float> f(e.data.size());
            for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(e.data[i]);
            size_t base = out.size();
            out.resize(base + f.size() * 4);
            std::memcpy(out.data() + base, f.data(), f.size() * 4);
        }
    }
    put_u32(out, crc32_ieee(out.data(), out.size()));

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

CkptFile read_ckpt_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    if (bytes.size() < 17) throw CkptTruncatedError(path + ": truncated checkpoint file");
    if (std::memcmp(bytes.data(), "UHDR", 4) != 0)
        throw CkptFormatError(path + ": bad magic bytes (not a checkpoint)");

    // checksum covers everything before the trailing CRC field
    uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    uint32_t computed = crc32_ieee(bytes.data(), bytes.size() - 4);
    if (stored != computed) throw CkptChecksumError(path + ": CRC-32 mismatch");

    Reader r(bytes.data(), bytes.size() - 4, path);
    r.take(4);  // magic
    uint32_t version = r.u32();
    if (version != kVersion)
        throw CkptVersionError(path + ": unsupported checkpoint version " + std::to_string(version));
    CkptFile file;
    file.elem_tag = r.u8();
    if (file.elem_tag > 1) throw CkptFormatError(path + ": unknown element-type tag");
    uint32_t count = r.u32();
    size_t elem_size = file.elem_tag == 1 ? 8 : 4;
    for (uint32_t i = 0; i < count; ++i) {
        CkptEntry e;
        uint16_t name_len = r.u16();
        const uint8_t* nm = r.take(name_len);
        e.name.assign(reinterpret_cast<const char*>(nm), name_len);
        uint8_t rank = r.u8();
        int64_t numel = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            uint32_t ext = r.u32();
            e.shape.push_back(static_cast<int64_t>(ext));
            numel *= ext;
        }
        const uint8_t* raw = r.take(static_cast<size_t>(numel) * elem_size);
        e.data.resize(static_cast<size_t>(numel));
        if (file.elem_tag == 1) {
            std::memcpy(e.data.data(), raw, static_cast<size_t>(numel) * 8);
        } else {
            std::vector<float> f(static_cast<size_t>(numel));
            std::memcpy(f.data(), raw, static_cast<size_t>(numel) * 4);
            for (size_t k = 0; k < f.size(); ++k) e.data[k] = static_cast<double>(f[k]);
        }
        file.entries.push_back(std::move(e));
    }
    return file;
}

}  // namespace uhdres
