#include "uhdres/image.hpp"

#include <fstream>

namespace uhdres {

namespace {

// PPM token reader: skips whitespace and '#' comments between header fields.
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (!std::isspace(ch)) {
            tok.push_back(static_cast<char>(ch));
            break;
        }
    }
    while ((ch = in.get()) != EOF && !std::isspace(ch)) tok.push_back(static_cast<char>(ch));
    return tok;
}

}  // namespace

ImageBuffer read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path);

    std::string magic = next_token(in);
    if (magic == "P3") throw FormatError(path + ": ASCII (P3) pixmaps are not supported, use binary P6");
    if (magic != "P6") throw FormatError(path + ": not a P6 pixmap (magic '" + magic + "')");

    std::string ws = next_token(in), hs = next_token(in), ms = next_token(in);
    if (ws.empty() || hs.empty() || ms.empty()) throw FormatError(path + ": truncated header");
    long w = 0, h = 0, maxval = 0;
    try {
        w = std::stol(ws);
        h = std::stol(hs);
        maxval = std::stol(ms);
    } catch (const std::exception&) {
        throw FormatError(path + ": malformed header fields");
    }
    if (w <= 0 || h <= 0) throw FormatError(path + ": invalid extents");
    if (maxval != 255) throw FormatError(path + ": unsupported maxval " + std::to_string(maxval) + " (need 255)");

    ImageBuffer img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<size_t>(w) * static_cast<size_t>(h) * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size()))
        throw FormatError(path + ": truncated pixel data");
    return img;
}

void write_ppm(const ImageBuffer& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open image file for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!out) throw IoError("failed writing image file: " + path);
}

}  // namespace uhdres
