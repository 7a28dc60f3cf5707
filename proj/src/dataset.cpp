#include "dicti/dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dicti/image_io.hpp"
#include "dicti/image_ops.hpp"

namespace fs = std::filesystem;

namespace dicti {

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

Size probe(const fs::path& p) {
    try {
        return probe_size(read_file(p));
    } catch (const std::exception& e) {
        throw IngestionError("cannot read image " + p.string() + ": " + e.what());
    }
}

std::optional<fs::path> label_path(const fs::path& label_dir, const fs::path& relative_stem) {
    if (label_dir.empty()) return std::nullopt;
    fs::path candidate = label_dir / relative_stem;
    candidate += ".png";
    if (fs::is_regular_file(candidate)) return candidate;
    return std::nullopt;
}

void finish(DatasetManifest& m, const fs::path& image_dir, const IngestOptions& options) {
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.image_id < b.image_id; });
    std::set<std::string> seen;
    for (const auto& e : m.entries) {
        if (!seen.insert(e.image_id).second) {
            throw IngestionError("duplicate image id '" + e.image_id + "' under " + image_dir.string());
        }
    }
    if (m.entries.empty()) throw EmptyDatasetError("no images found under " + image_dir.string());
    if (options.limit > 0 && m.entries.size() > options.limit) m.entries.resize(options.limit);
    m.square_crop = options.square_crop;
}

}  // namespace

DatasetManifest ingest_viton(const fs::path& root, const IngestOptions& options) {
    fs::path split;
    if (fs::is_directory(root / "image")) {
        split = root;
    } else if (fs::is_directory(root / "test" / "image")) {
        split = root / "test";
    } else {
        throw IngestionError("VITON-HD image directory not found under " + root.string() +
                             " (expected image/ or test/image/)");
    }
    const fs::path image_dir = split / "image";
    const fs::path label_dir = fs::is_directory(split / "labels") ? split / "labels" : fs::path{};

    DatasetManifest m;
    m.dataset = "viton";
    for (const auto& de : fs::directory_iterator(image_dir)) {
        if (!de.is_regular_file() || !is_image_file(de.path())) continue;
        ManifestEntry e;
        e.image_id = de.path().stem().string();
        e.image = de.path();
        e.labels = label_path(label_dir, de.path().stem());
        e.size = probe(de.path());
        m.entries.push_back(std::move(e));
    }
    finish(m, image_dir, options);
    return m;
}

DatasetManifest ingest_fashionpedia(const fs::path& root, const IngestOptions& options) {
    if (!fs::is_directory(root)) {
        throw IngestionError("Fashionpedia root " + root.string() + " is not a directory");
    }
    const fs::path image_dir = fs::is_directory(root / "images") ? root / "images" : root;
    const fs::path label_dir = fs::is_directory(root / "labels") ? root / "labels" : fs::path{};

    DatasetManifest m;
    m.dataset = "fashionpedia";
    for (const auto& de : fs::recursive_directory_iterator(image_dir)) {
        if (!de.is_regular_file() || !is_image_file(de.path())) continue;
        // Skip the label tree when images live directly under root.
        if (!label_dir.empty() && image_dir == root) {
            const auto rel_to_labels = fs::relative(de.path(), label_dir);
            if (!rel_to_labels.empty() && *rel_to_labels.begin() != "..") continue;
        }
        fs::path rel = fs::relative(de.path(), image_dir);
        rel.replace_extension();
        ManifestEntry e;
        e.image_id = rel.generic_string();
        e.image = de.path();
        e.labels = label_path(label_dir, rel);
        e.size = probe(de.path());
        m.entries.push_back(std::move(e));
    }
    finish(m, image_dir, options);
    return m;
}

DatasetManifest ingest(const std::string& dataset, const fs::path& root, const IngestOptions& options) {
    if (dataset == "viton") return ingest_viton(root, options);
    if (dataset == "fashionpedia") return ingest_fashionpedia(root, options);
    throw IngestionError("unknown dataset '" + dataset + "' (expected viton or fashionpedia)");
}

RgbImage load_entry_image(const ManifestEntry& entry) { return load_rgb(entry.image); }

void apply_manifest_crop(const DatasetManifest& manifest, RgbImage& image, LabelMap& labels) {
    if (!manifest.square_crop) return;
    image = crop_top_square(image);
    labels = crop_top_square(labels);
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::ostringstream out;
    out << "# dataset=" << manifest.dataset << " entries=" << manifest.entries.size()
        << " square_crop=" << (manifest.square_crop ? "true" : "false") << '\n';
    out << "image_id\twidth\theight\timage\tlabels\n";
    for (const auto& e : manifest.entries) {
        out << e.image_id << '\t' << e.size.width << '\t' << e.size.height << '\t'
            << e.image.string() << '\t' << (e.labels ? e.labels->string() : "-") << '\n';
    }
    return out.str();
}

}  // namespace dicti
