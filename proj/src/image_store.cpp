#include "dicti/image_store.hpp"

#include <algorithm>

#include "dicti/hashing.hpp"

namespace fs = std::filesystem;

namespace dicti {

ImageStore::ImageStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

std::optional<fs::path> ImageStore::path_for(const std::string& id) const {
    // Ids are lowercase hex digests; anything else cannot name a stored object.
    if (id.size() != 64 || !std::all_of(id.begin(), id.end(), [](char c) {
            return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        })) {
        return std::nullopt;
    }
    return root_ / id.substr(0, 2) / id;
}

std::string ImageStore::put(const Bytes& bytes) {
    const std::string id = sha256_hex(bytes);
    const fs::path path = *path_for(id);
    if (!fs::exists(path)) write_file_atomic(path, bytes);
    return id;
}

std::optional<ImageRecord> ImageStore::get(const std::string& id) const {
    const auto path = path_for(id);
    if (!path || !fs::is_regular_file(*path)) return std::nullopt;
    ImageRecord rec;
    rec.id = id;
    rec.bytes = read_file(*path);
    rec.media_type = media_type(sniff_format(rec.bytes));
    return rec;
}

bool ImageStore::contains(const std::string& id) const {
    const auto path = path_for(id);
    return path && fs::is_regular_file(*path);
}

}  // namespace dicti
