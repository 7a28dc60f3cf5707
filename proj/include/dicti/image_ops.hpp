#pragma once

#include "dicti/image.hpp"

namespace dicti {

// Resampling helpers. RGB uses bilinear interpolation with half-pixel centers;
// label maps and masks use nearest neighbour so no new labels appear.
RgbImage resize_bilinear(const RgbImage& image, Size target);
LabelMap resize_nearest(const LabelMap& labels, Size target);
BinaryMask resize_nearest(const BinaryMask& mask, Size target);

/// Keeps the top `width x width` region (or the full image if it is wider
/// than tall, in which case the central square is kept).
RgbImage crop_top_square(const RgbImage& image);
LabelMap crop_top_square(const LabelMap& labels);

/// Scales the longer side to `target`'s bound while preserving aspect ratio,
/// then pads the remainder (bottom/right) with black. `inverse` maps back.
struct Letterbox {
    Size source;
    Size target;
    Size content;  // scaled image footprint inside target, anchored top-left

    static Letterbox fit(Size source, Size target);

    [[nodiscard]] RgbImage apply(const RgbImage& image) const;
    [[nodiscard]] BinaryMask apply(const BinaryMask& mask) const;
    [[nodiscard]] RgbImage invert(const RgbImage& boxed) const;
};

}  // namespace dicti
