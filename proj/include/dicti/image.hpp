#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dicti {

/// Raised when inputs violate an operation's preconditions (shape mismatch,
/// out-of-range parameters). Distinct from runtime failures of external
/// collaborators such as the synthesis backend.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Size {
    int width = 0;
    int height = 0;

    [[nodiscard]] std::size_t area() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    friend bool operator==(const Size&, const Size&) = default;
};

std::string to_string(const Size& s);

/// Interleaved 8-bit RGB image, row-major.
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height);
    RgbImage(int width, int height, std::vector<std::uint8_t> pixels);

    [[nodiscard]] int width() const { return size_.width; }
    [[nodiscard]] int height() const { return size_.height; }
    [[nodiscard]] Size size() const { return size_; }
    [[nodiscard]] bool empty() const { return pixels_.empty(); }

    [[nodiscard]] const std::uint8_t* at(int x, int y) const {
        return pixels_.data() + index(x, y);
    }
    [[nodiscard]] std::uint8_t* at(int x, int y) { return pixels_.data() + index(x, y); }

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        std::uint8_t* p = at(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    [[nodiscard]] const std::vector<std::uint8_t>& bytes() const { return pixels_; }
    [[nodiscard]] std::vector<std::uint8_t>& bytes() { return pixels_; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    [[nodiscard]] std::size_t index(int x, int y) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
                static_cast<std::size_t>(x)) * 3;
    }

    Size size_;
    std::vector<std::uint8_t> pixels_;
};

/// Per-pixel boolean region.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);
    explicit BinaryMask(Size size, bool fill = false) : BinaryMask(size.width, size.height, fill) {}

    [[nodiscard]] int width() const { return size_.width; }
    [[nodiscard]] int height() const { return size_.height; }
    [[nodiscard]] Size size() const { return size_; }

    [[nodiscard]] bool get(int x, int y) const {
        return bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
                     static_cast<std::size_t>(x)] != 0;
    }
    /// Out-of-image coordinates read as false.
    [[nodiscard]] bool get_or_false(int x, int y) const {
        if (x < 0 || y < 0 || x >= size_.width || y >= size_.height) return false;
        return get(x, y);
    }
    void set(int x, int y, bool v) {
        bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
              static_cast<std::size_t>(x)] = v ? 1 : 0;
    }

    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] bool any() const { return count() > 0; }

    /// True when every set pixel of `this` is also set in `other`.
    [[nodiscard]] bool subset_of(const BinaryMask& other) const;

    [[nodiscard]] BinaryMask operator&(const BinaryMask& other) const;
    [[nodiscard]] BinaryMask operator|(const BinaryMask& other) const;
    /// Set difference: this AND NOT other.
    [[nodiscard]] BinaryMask operator-(const BinaryMask& other) const;
    [[nodiscard]] BinaryMask operator~() const;

    [[nodiscard]] const std::vector<std::uint8_t>& raw() const { return bits_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    Size size_;
    std::vector<std::uint8_t> bits_;  // 0 or 1 per pixel
};

inline constexpr int kMaxLabel = 24;

/// Body-part label map from a human parser. Label 0 is background; body parts
/// use 1..24.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int width, int height, std::vector<std::uint8_t> labels);
    LabelMap(int width, int height, std::uint8_t fill = 0);

    [[nodiscard]] int width() const { return size_.width; }
    [[nodiscard]] int height() const { return size_.height; }
    [[nodiscard]] Size size() const { return size_; }

    [[nodiscard]] std::uint8_t get(int x, int y) const {
        return labels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
                       static_cast<std::size_t>(x)];
    }
    void set(int x, int y, std::uint8_t label);

    [[nodiscard]] const std::vector<std::uint8_t>& raw() const { return labels_; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    Size size_;
    std::vector<std::uint8_t> labels_;
};

void require_same_size(Size a, Size b, const char* what);

}  // namespace dicti
