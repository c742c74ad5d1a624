#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uhdres/tensor.hpp"

namespace uhdres {

// 8-bit interleaved RGB image as stored on disk. In-memory tensors are
// channel-first real arrays in [0,1] (divide by 255).
struct ImageBuffer {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<uint8_t> rgb;  // h*w*3 interleaved

    int64_t pixel_count() const { return height * width; }
};

// Binary P6 portable pixmap, maxval 255. Bad magic, wrong maxval and
// truncation raise distinct errors.
ImageBuffer read_ppm(const std::string& path);
void write_ppm(const ImageBuffer& img, const std::string& path);

template <typename T>
Tensor<T> image_to_tensor(const ImageBuffer& img) {
    int64_t h = img.height, w = img.width;
    Tensor<T> t = Tensor<T>::zeros({1, 3, h, w});
    T* p = t.ptr();
    for (int64_t i = 0; i < h * w; ++i)
        for (int64_t c = 0; c < 3; ++c)
            p[c * h * w + i] = static_cast<T>(img.rgb[static_cast<size_t>(i * 3 + c)]) / T(255);
    return t;
}

// Values are clamped to [0,1] and rounded to the nearest 8-bit level.
template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t) {
    const Shape& s = t.shape();
    check_shape(s.size() == 4 && s[0] == 1 && s[1] == 3, "expected a (1,3,h,w) image tensor");
    ImageBuffer img;
    img.height = s[2];
    img.width = s[3];
    img.rgb.resize(static_cast<size_t>(img.height * img.width * 3));
    const T* p = t.ptr();
    int64_t hw = img.height * img.width;
    for (int64_t i = 0; i < hw; ++i)
        for (int64_t c = 0; c < 3; ++c) {
            double v = static_cast<double>(p[c * hw + i]);
            v = std::min(1.0, std::max(0.0, v));
            img.rgb[static_cast<size_t>(i * 3 + c)] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

}  // namespace uhdres
