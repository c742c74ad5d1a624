#pragma once

#include "uhdres/model.hpp"

namespace uhdres {

// Checkpoint container errors, one class per failure mode.
class CkptFormatError : public FormatError {
public:
    using FormatError::FormatError;
};
class CkptVersionError : public FormatError {
public:
    using FormatError::FormatError;
};
class CkptTruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};
class CkptChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};
class CkptElemTypeError : public FormatError {
public:
    using FormatError::FormatError;
};
class CkptUnknownKeyError : public FormatError {
public:
    using FormatError::FormatError;
};
class CkptMissingKeyError : public FormatError {
public:
    using FormatError::FormatError;
};
class CkptShapeError : public FormatError {
public:
    using FormatError::FormatError;
};

// Type-erased tensor entry; doubles carry both element types bit-exactly.
struct CkptEntry {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

struct CkptFile {
    uint8_t elem_tag = 0;  // 0 = f32, 1 = f64
    std::vector<CkptEntry> entries;
};

// Binary container: magic "UHDR" | version u32 LE | element-type tag u8 |
// entry count u32 | entries (name len u16 + UTF-8 name + rank u8 + extents
// u32 each + raw little-endian scalars) | CRC-32 of everything before it.
void write_ckpt_file(const std::string& path, const CkptFile& file);
CkptFile read_ckpt_file(const std::string& path);
uint32_t crc32_ieee(const uint8_t* data, size_t n, uint32_t seed = 0);

namespace detail {

template <typename T>
constexpr uint8_t elem_tag() {
    return sizeof(T) == 8 ? 1 : 0;
}

inline std::vector<double> encode_config(const UHDResConfig& c) {
    std::vector<double> v;
    v.push_back(static_cast<double>(c.initial_channels));
    for (int64_t d : c.level_depths) v.push_back(static_cast<double>(d));
    v.push_back(static_cast<double>(c.expansion));
    for (int64_t k : c.msca_kernels) v.push_back(static_cast<double>(k));
    v.push_back(static_cast<double>(c.strip_kernel));
    v.push_back(static_cast<double>(c.cam_reduction));
    v.push_back(c.use_msca ? 1.0 : 0.0);
    v.push_back(c.use_samu ? 1.0 : 0.0);
    v.push_back(c.use_sru ? 1.0 : 0.0);
    v.push_back(c.use_sgfn ? 1.0 : 0.0);
    return v;
}

inline UHDResConfig decode_config(const std::vector<double>& v) {
    if (v.size() != 14) throw CkptFormatError("checkpoint meta.config has unexpected length");
    UHDResConfig c;
    size_t i = 0;
    c.initial_channels = static_cast<int64_t>(v[i++]);
    c.level_depths = {static_cast<int64_t>(v[i]), static_cast<int64_t>(v[i + 1]),
                      static_cast<int64_t>(v[i + 2])};
    i += 3;
    c.expansion = static_cast<int64_t>(v[i++]);
    c.msca_kernels = {static_cast<int64_t>(v[i]), static_cast<int64_t>(v[i + 1]),
                      static_cast<int64_t>(v[i + 2])};
    i += 3;
    c.strip_kernel = static_cast<int64_t>(v[i++]);
    c.cam_reduction = static_cast<int64_t>(v[i++]);
    c.use_msca = v[i++] != 0.0;
    c.use_samu = v[i++] != 0.0;
    c.use_sru = v[i++] != 0.0;
    c.use_sgfn = v[i++] != 0.0;
    return c;
}

}  // namespace detail

// Serializes parameters, batch-norm buffers and the architecture description
// ("meta.config") so checkpoints are self-contained.
template <typename T>
void save_checkpoint(const UHDResModel<T>& model, const std::string& path) {
    CkptFile file;
    file.elem_tag = detail::elem_tag<T>();
    file.entries.push_back(
        {"meta.config", {static_cast<int64_t>(14)}, detail::encode_config(model.config())});
    for (const auto& p : model.store().params()) {
        CkptEntry e;
        e.name = p.name;
        e.shape = p.value.shape();
        e.data.assign(p.value.data().begin(), p.value.data().end());
        file.entries.push_back(std::move(e));
    }
    for (const auto& [name, buf] : model.store().buffers()) {
        CkptEntry e;
        e.name = name;
        e.shape = buf.shape();
        e.data.assign(buf.data().begin(), buf.data().end());
        file.entries.push_back(std::move(e));
    }
    write_ckpt_file(path, file);
}

template <typename T>
UHDResModel<T> load_checkpoint(const std::string& path) {
    CkptFile file = read_ckpt_file(path);
    if (file.elem_tag != detail::elem_tag<T>())
        throw CkptElemTypeError(path + ": element type tag " + std::to_string(file.elem_tag) +
                                " does not match this build");
    const CkptEntry* meta = nullptr;
    for (const auto& e : file.entries)
        if (e.name == "meta.config") meta = &e;
    if (!meta) throw CkptMissingKeyError(path + ": missing key 'meta.config'");

    UHDResModel<T> model(detail::decode_config(meta->data), /*seed=*/0);
    std::vector<bool> filled_params(model.store().params().size(), false);
    std::vector<bool> filled_buffers(model.store().buffers().size(), false);

    for (const auto& e : file.entries) {
        if (e.name == "meta.config") continue;
        bool placed = false;
        auto& params = model.store().params();
        for (size_t i = 0; i < params.size(); ++i) {
            if (params[i].name != e.name) continue;
            if (params[i].value.shape() != e.shape)
                throw CkptShapeError(path + ": shape mismatch for key '" + e.name + "': file " +
                                     shape_str(e.shape) + " vs model " +
                                     shape_str(params[i].value.shape()));
            auto dst = params[i].value.data();
            for (size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(e.data[k]);
            filled_params[i] = true;
            placed = true;
            break;
        }
        if (placed) continue;
        auto& buffers = model.store().buffers();
        for (size_t i = 0; i < buffers.size(); ++i) {
            if (buffers[i].first != e.name) continue;
            if (buffers[i].second.shape() != e.shape)
                throw CkptShapeError(path + ": shape mismatch for key '" + e.name + "'");
            auto dst = buffers[i].second.data();
            for (size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(e.data[k]);
            filled_buffers[i] = true;
            placed = true;
            break;
        }
        if (!placed) throw CkptUnknownKeyError(path + ": unknown key '" + e.name + "'");
    }
    for (size_t i = 0; i < filled_params.size(); ++i)
        if (!filled_params[i])
            throw CkptMissingKeyError(path + ": missing key '" + model.store().params()[i].name + "'");
    for (size_t i = 0; i < filled_buffers.size(); ++i)
        if (!filled_buffers[i])
            throw CkptMissingKeyError(path + ": missing key '" +
                                      model.store().buffers()[i].first + "'");
    return model;
}

}  // namespace uhdres
