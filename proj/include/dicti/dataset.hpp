#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dicti/image.hpp"

namespace dicti {

class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyDatasetError : public IngestionError {
public:
    using IngestionError::IngestionError;
};

struct ManifestEntry {
    std::string image_id;
    std::filesystem::path image;
    std::optional<std::filesystem::path> labels;
    Size size;  // as stored on disk, before any cropping
};

struct DatasetManifest {
    std::string dataset;
    /// Keep only the top square of each image (and its labels) when loading.
    bool square_crop = false;
    std::vector<ManifestEntry> entries;

    [[nodiscard]] std::size_t size() const { return entries.size(); }
};

struct IngestOptions {
    bool square_crop = false;
    std::size_t limit = 0;  // 0 = all entries
};

/// VITON-HD layout: `<root>/image/` or `<root>/test/image/`, with optional
/// label maps at `<split>/labels/<stem>.png`. Entries sorted by file name.
DatasetManifest ingest_viton(const std::filesystem::path& root, const IngestOptions& options = {});

/// Fashionpedia layout: images under `<root>/images/` (or `<root>` itself),
/// searched recursively; ids are relative paths without extension. Optional
/// label maps at `<root>/labels/<id>.png`.
DatasetManifest ingest_fashionpedia(const std::filesystem::path& root,
                                    const IngestOptions& options = {});

/// Dispatches on "viton" / "fashionpedia".
DatasetManifest ingest(const std::string& dataset, const std::filesystem::path& root,
                       const IngestOptions& options = {});

/// Reads the entry's image as stored on disk.
RgbImage load_entry_image(const ManifestEntry& entry);

/// Applies the manifest's square crop (if enabled) to an image and its labels.
void apply_manifest_crop(const DatasetManifest& manifest, RgbImage& image, LabelMap& labels);

/// Tab-separated listing: id, width, height, image path, label path.
std::string format_manifest(const DatasetManifest& manifest);

}  // namespace dicti
