#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dicti/image_io.hpp"

namespace dicti {

struct ImageRecord {
    std::string id;  // SHA-256 of the bytes
    Bytes bytes;
    std::string media_type;
};

/// Flat-file content-addressed store: `<root>/<id[0:2]>/<id>`. Writes go
/// through temp-then-rename; storing identical bytes twice yields one object.
class ImageStore {
public:
    explicit ImageStore(std::filesystem::path root);

    std::string put(const Bytes& bytes);
    [[nodiscard]] std::optional<ImageRecord> get(const std::string& id) const;
    [[nodiscard]] bool contains(const std::string& id) const;

private:
    [[nodiscard]] std::optional<std::filesystem::path> path_for(const std::string& id) const;

    std::filesystem::path root_;
};

}  // namespace dicti
