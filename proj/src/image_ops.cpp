#include "dicti/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace dicti {

namespace {

void require_target(Size target) {
    if (target.width <= 0 || target.height <= 0) {
        throw ContractViolation("resize: target must be positive, got " + to_string(target));
    }
}

int nearest_source(int dst, int dst_len, int src_len) {
    const double s = (dst + 0.5) * static_cast<double>(src_len) / dst_len - 0.5;
    return std::clamp(static_cast<int>(std::lround(s)), 0, src_len - 1);
}

template <typename Grid, typename Get, typename Set>
void nearest_into(const Grid& src, Grid& dst, Get get, Set set) {
    for (int y = 0; y < dst.height(); ++y) {
        const int sy = nearest_source(y, dst.height(), src.height());
        for (int x = 0; x < dst.width(); ++x) {
            set(dst, x, y, get(src, nearest_source(x, dst.width(), src.width()), sy));
        }
    }
}

Size top_square(Size s) {
    const int side = std::min(s.width, s.height);
    return {side, side};
}

}  // namespace

RgbImage resize_bilinear(const RgbImage& image, Size target) {
    require_target(target);
    if (image.size() == target) return image;
    RgbImage out(target.width, target.height);
    const double sx = static_cast<double>(image.width()) / target.width;
    const double sy = static_cast<double>(image.height()) / target.height;
    for (int y = 0; y < target.height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < target.width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double wx = fx - x0;
            std::uint8_t* dst = out.at(x, y);
            for (int c = 0; c < 3; ++c) {
                const double top = image.at(x0, y0)[c] * (1 - wx) + image.at(x1, y0)[c] * wx;
                const double bot = image.at(x0, y1)[c] * (1 - wx) + image.at(x1, y1)[c] * wx;
                dst[c] = static_cast<std::uint8_t>(
                    std::clamp(std::lround(top * (1 - wy) + bot * wy), 0L, 255L));
            }
        }
    }
    return out;
}

LabelMap resize_nearest(const LabelMap& labels, Size target) {
    require_target(target);
    if (labels.size() == target) return labels;
    LabelMap out(target.width, target.height);
    nearest_into(
        labels, out, [](const LabelMap& m, int x, int y) { return m.get(x, y); },
        [](LabelMap& m, int x, int y, std::uint8_t v) { m.set(x, y, v); });
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, Size target) {
    require_target(target);
    if (mask.size() == target) return mask;
    BinaryMask out(target);
    nearest_into(
        mask, out, [](const BinaryMask& m, int x, int y) { return m.get(x, y); },
        [](BinaryMask& m, int x, int y, bool v) { m.set(x, y, v); });
    return out;
}

RgbImage crop_top_square(const RgbImage& image) {
    const Size sq = top_square(image.size());
    const int x_off = (image.width() - sq.width) / 2;
    RgbImage out(sq.width, sq.height);
    for (int y = 0; y < sq.height; ++y) {
        std::copy_n(image.at(x_off, y), static_cast<std::size_t>(sq.width) * 3, out.at(0, y));
    }
    return out;
}

LabelMap crop_top_square(const LabelMap& labels) {
    const Size sq = top_square(labels.size());
    const int x_off = (labels.width() - sq.width) / 2;
    LabelMap out(sq.width, sq.height);
    for (int y = 0; y < sq.height; ++y) {
        for (int x = 0; x < sq.width; ++x) out.set(x, y, labels.get(x + x_off, y));
    }
    return out;
}

Letterbox Letterbox::fit(Size source, Size target) {
    require_target(source);
    require_target(target);
    const double scale = std::min(static_cast<double>(target.width) / source.width,
                                  static_cast<double>(target.height) / source.height);
    Size content{std::clamp(static_cast<int>(std::lround(source.width * scale)), 1, target.width),
                 std::clamp(static_cast<int>(std::lround(source.height * scale)), 1,
                            target.height)};
    return Letterbox{source, target, content};
}

RgbImage Letterbox::apply(const RgbImage& image) const {
    require_same_size(image.size(), source, "Letterbox::apply");
    const RgbImage scaled = resize_bilinear(image, content);
    RgbImage out(target.width, target.height);
    for (int y = 0; y < content.height; ++y) {
        std::copy_n(scaled.at(0, y), static_cast<std::size_t>(content.width) * 3, out.at(0, y));
    }
    return out;
}

BinaryMask Letterbox::apply(const BinaryMask& mask) const {
    require_same_size(mask.size(), source, "Letterbox::apply");
    const BinaryMask scaled = resize_nearest(mask, content);
    BinaryMask out(target);
    for (int y = 0; y < content.height; ++y) {
        for (int x = 0; x < content.width; ++x) out.set(x, y, scaled.get(x, y));
    }
    return out;
}

RgbImage Letterbox::invert(const RgbImage& boxed) const {
    require_same_size(boxed.size(), target, "Letterbox::invert");
    RgbImage cropped(content.width, content.height);
    for (int y = 0; y < content.height; ++y) {
        std::copy_n(boxed.at(0, y), static_cast<std::size_t>(content.width) * 3,
                    cropped.at(0, y));
    }
    return resize_bilinear(cropped, source);
}

}  // namespace dicti
