#pragma once

#include <bitset>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "dicti/image.hpp"

namespace dicti {

/// Subset of body-part labels 0..24.
class LabelSet {
public:
    LabelSet() = default;
    LabelSet(std::initializer_list<int> labels);

    static LabelSet from_vector(const std::vector<int>& labels);

    [[nodiscard]] bool contains(int label) const {
        return label >= 0 && label <= kMaxLabel && bits_.test(static_cast<std::size_t>(label));
    }
    void insert(int label);
    [[nodiscard]] bool empty() const { return bits_.none(); }
    [[nodiscard]] bool intersects(const LabelSet& other) const { return (bits_ & other.bits_).any(); }
    [[nodiscard]] std::vector<int> to_vector() const;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;

private:
    std::bitset<kMaxLabel + 1> bits_;
};

/// Closed disk {(dx, dy) : dx^2 + dy^2 <= r^2}.
class StructuringElement {
public:
    static StructuringElement disk(int radius);

    [[nodiscard]] int radius() const { return radius_; }
    [[nodiscard]] const std::vector<std::pair<int, int>>& offsets() const { return offsets_; }
    /// half_width(dy) is the largest |dx| in row dy; valid for |dy| <= radius.
    [[nodiscard]] int half_width(int dy) const { return half_widths_[static_cast<std::size_t>(dy + radius_)]; }

private:
    int radius_ = 0;
    std::vector<std::pair<int, int>> offsets_;
    std::vector<int> half_widths_;
};

/// Label grouping and radii for mask generation.
///
/// Default groups follow the 24-part DensePose index convention:
///   1-2 torso, 3-4 hands, 5-6 feet, 7-14 legs, 15-22 arms, 23-24 head.
struct MaskGenConfig {
    int d = 70;  // body dilation radius
    int e = 10;  // preservation-area erosion radius
    int f = 5;   // head erosion radius
    LabelSet body_labels{1, 2, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22};
    LabelSet preserved_labels{3, 4, 5, 6};
    LabelSet head_labels{23, 24};

    /// Throws ContractViolation naming the offending field.
    void validate() const;
};

BinaryMask mask_from_labels(const LabelMap& labels, const LabelSet& include);

/// Morphology with out-of-image pixels treated as false.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

/// Dilated body region minus the eroded preservation region (hands, feet).
BinaryMask inpainting_mask(const LabelMap& labels, const MaskGenConfig& cfg);
/// Eroded head region restored from the source after synthesis.
BinaryMask head_mask(const LabelMap& labels, const MaskGenConfig& cfg);

struct MaskPair {
    BinaryMask inpaint;
    BinaryMask head;
};

MaskPair generate_masks(const LabelMap& labels, const MaskGenConfig& cfg);

}  // namespace dicti
