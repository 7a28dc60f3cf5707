#include "dicti/maskgen.hpp"

#include <algorithm>
#include <cmath>

namespace dicti {

LabelSet::LabelSet(std::initializer_list<int> labels) {
    for (int l : labels) insert(l);
}

LabelSet LabelSet::from_vector(const std::vector<int>& labels) {
    LabelSet out;
    for (int l : labels) out.insert(l);
    return out;
}

void LabelSet::insert(int label) {
    if (label < 1 || label > kMaxLabel) {
        throw ContractViolation("label set members must be in [1, 24], got " +
                                std::to_string(label));
    }
    bits_.set(static_cast<std::size_t>(label));
}

std::vector<int> LabelSet::to_vector() const {
    std::vector<int> out;
    for (int l = 1; l <= kMaxLabel; ++l) {
        if (bits_.test(static_cast<std::size_t>(l))) out.push_back(l);
    }
    return out;
}

StructuringElement StructuringElement::disk(int radius) {
    if (radius < 0) throw ContractViolation("structuring element radius must be >= 0");
    StructuringElement se;
    se.radius_ = radius;
    se.half_widths_.resize(static_cast<std::size_t>(2 * radius + 1));
    const long long r2 = static_cast<long long>(radius) * radius;
    for (int dy = -radius; dy <= radius; ++dy) {
        // Integer search avoids sqrt rounding at exact boundary points.
        int hw = 0;
        while (static_cast<long long>(hw + 1) * (hw + 1) + static_cast<long long>(dy) * dy <= r2) {
            ++hw;
        }
        se.half_widths_[static_cast<std::size_t>(dy + radius)] = hw;
        for (int dx = -hw; dx <= hw; ++dx) se.offsets_.emplace_back(dx, dy);
    }
    return se;
}

void MaskGenConfig::validate() const {
    if (d < 0) throw ContractViolation("d: dilation radius must be >= 0");
    if (e < 0) throw ContractViolation("e: erosion radius must be >= 0");
    if (f < 0) throw ContractViolation("f: head erosion radius must be >= 0");
    if (body_labels.intersects(preserved_labels)) {
        throw ContractViolation("body_labels and preserved_labels overlap");
    }
    if (body_labels.intersects(head_labels)) {
        throw ContractViolation("body_labels and head_labels overlap");
    }
    if (preserved_labels.intersects(head_labels)) {
        throw ContractViolation("preserved_labels and head_labels overlap");
    }
}

BinaryMask mask_from_labels(const LabelMap& labels, const LabelSet& include) {
    BinaryMask out(labels.size());
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            if (include.contains(labels.get(x, y))) out.set(x, y, true);
        }
    }
    return out;
}

namespace {

// Per-row prefix counts: prefix[y][x] = number of set pixels in row y, columns [0, x).
std::vector<std::vector<int>> row_prefix_counts(const BinaryMask& mask) {
    std::vector<std::vector<int>> prefix(static_cast<std::size_t>(mask.height()));
    for (int y = 0; y < mask.height(); ++y) {
        auto& row = prefix[static_cast<std::size_t>(y)];
        row.assign(static_cast<std::size_t>(mask.width()) + 1, 0);
        for (int x = 0; x < mask.width(); ++x) {
            row[static_cast<std::size_t>(x) + 1] = row[static_cast<std::size_t>(x)] + (mask.get(x, y) ? 1 : 0);
        }
    }
    return prefix;
}

enum class Morph { Dilate, Erode };

// The disk decomposes into one horizontal span per dy, so each output pixel
// needs 2r+1 span queries against the row prefix counts.
BinaryMask morph(const BinaryMask& mask, int radius, Morph op) {
    if (radius < 0) throw ContractViolation("morphology radius must be >= 0");
    if (radius == 0) return mask;
    const StructuringElement se = StructuringElement::disk(radius);
    const auto prefix = row_prefix_counts(mask);
    const int w = mask.width();
    const int h = mask.height();
    BinaryMask out(mask.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool result = op == Morph::Erode;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = y + dy;
                const int hw = se.half_width(dy);
                const int lo = x - hw;
                const int hi = x + hw;  // inclusive
                if (op == Morph::Dilate) {
                    if (yy < 0 || yy >= h) continue;
                    const auto& row = prefix[static_cast<std::size_t>(yy)];
                    const int a = std::max(lo, 0);
                    const int b = std::min(hi, w - 1);
                    if (a <= b && row[static_cast<std::size_t>(b) + 1] - row[static_cast<std::size_t>(a)] > 0) {
                        result = true;
                        break;
                    }
                } else {
                    if (yy < 0 || yy >= h || lo < 0 || hi >= w) {
                        result = false;
                        break;
                    }
                    const auto& row = prefix[static_cast<std::size_t>(yy)];
                    if (row[static_cast<std::size_t>(hi) + 1] - row[static_cast<std::size_t>(lo)] != hi - lo + 1) {
                        result = false;
                        break;
                    }
                }
            }
            if (result) out.set(x, y, true);
        }
    }
    return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) { return morph(mask, radius, Morph::Dilate); }

BinaryMask erode(const BinaryMask& mask, int radius) { return morph(mask, radius, Morph::Erode); }

BinaryMask inpainting_mask(const LabelMap& labels, const MaskGenConfig& cfg) {
    cfg.validate();
    const BinaryMask body = mask_from_labels(labels, cfg.body_labels);
    const BinaryMask preserved = mask_from_labels(labels, cfg.preserved_labels);
    return dilate(body, cfg.d) - erode(preserved, cfg.e);
}

BinaryMask head_mask(const LabelMap& labels, const MaskGenConfig& cfg) {
    cfg.validate();
    return erode(mask_from_labels(labels, cfg.head_labels), cfg.f);
}

MaskPair generate_masks(const LabelMap& labels, const MaskGenConfig& cfg) {
    return {inpainting_mask(labels, cfg), head_mask(labels, cfg)};
}

}  // namespace dicti
