#include "dicti/image.hpp"

#include <algorithm>

namespace dicti {

std::string to_string(const Size& s) {
    return std::to_string(s.width) + "x" + std::to_string(s.height);
}

void require_same_size(Size a, Size b, const char* what) {
    if (a != b) {
        throw ContractViolation(std::string(what) + ": dimension mismatch (" + to_string(a) +
                                " vs " + to_string(b) + ")");
    }
}

namespace {

void require_positive(int width, int height, const char* what) {
    if (width <= 0 || height <= 0) {
        throw ContractViolation(std::string(what) + ": dimensions must be positive, got " +
                                std::to_string(width) + "x" + std::to_string(height));
    }
}

}  // namespace

RgbImage::RgbImage(int width, int height) : size_{width, height} {
    require_positive(width, height, "RgbImage");
    pixels_.assign(size_.area() * 3, 0);
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> pixels)
    : size_{width, height}, pixels_(std::move(pixels)) {
    require_positive(width, height, "RgbImage");
    if (pixels_.size() != size_.area() * 3) {
        throw ContractViolation("RgbImage: pixel buffer holds " + std::to_string(pixels_.size()) +
                                " bytes, expected " + std::to_string(size_.area() * 3));
    }
}

BinaryMask::BinaryMask(int width, int height, bool fill) : size_{width, height} {
    require_positive(width, height, "BinaryMask");
    bits_.assign(size_.area(), fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
    require_same_size(size_, other.size_, "BinaryMask::subset_of");
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] && !other.bits_[i]) return false;
    }
    return true;
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
    require_same_size(size_, other.size_, "BinaryMask::operator&");
    BinaryMask out(size_);
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
    return out;
}

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
    require_same_size(size_, other.size_, "BinaryMask::operator|");
    BinaryMask out(size_);
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
    return out;
}

BinaryMask BinaryMask::operator-(const BinaryMask& other) const {
    require_same_size(size_, other.size_, "BinaryMask::operator-");
    BinaryMask out(size_);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        out.bits_[i] = static_cast<std::uint8_t>(bits_[i] & (other.bits_[i] ^ 1));
    }
    return out;
}

BinaryMask BinaryMask::operator~() const {
    BinaryMask out(size_);
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] ^ 1;
    return out;
}

LabelMap::LabelMap(int width, int height, std::vector<std::uint8_t> labels)
    : size_{width, height}, labels_(std::move(labels)) {
    require_positive(width, height, "LabelMap");
    if (labels_.size() != size_.area()) {
        throw ContractViolation("LabelMap: grid holds " + std::to_string(labels_.size()) +
                                " labels, expected " + std::to_string(size_.area()));
    }
    for (std::uint8_t l : labels_) {
        if (l > kMaxLabel) {
            throw ContractViolation("LabelMap: label " + std::to_string(l) +
                                    " outside [0, 24]");
        }
    }
}

LabelMap::LabelMap(int width, int height, std::uint8_t fill) : size_{width, height} {
    require_positive(width, height, "LabelMap");
    if (fill > kMaxLabel) throw ContractViolation("LabelMap: fill label outside [0, 24]");
    labels_.assign(size_.area(), fill);
}

void LabelMap::set(int x, int y, std::uint8_t label) {
    if (label > kMaxLabel) {
        throw ContractViolation("LabelMap: label " + std::to_string(label) + " outside [0, 24]");
    }
    labels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
            static_cast<std::size_t>(x)] = label;
}

}  // namespace dicti
