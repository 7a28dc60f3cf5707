#include "oracles.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <unistd.h>

namespace oracle {

namespace {

bool in_disk(int dx, int dy, int r) { return dx * dx + dy * dy <= r * r; }

bool read(const BinaryMask& m, int x, int y) {
    if (x < 0 || y < 0 || x >= m.width() || y >= m.height()) return false;
    return m.get(x, y);
}

}  // namespace

BinaryMask dilate(const BinaryMask& m, int r) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            bool v = false;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (in_disk(dx, dy, r) && read(m, x + dx, y + dy)) v = true;
                }
            }
            out.set(x, y, v);
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& m, int r) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            bool v = true;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (in_disk(dx, dy, r) && !read(m, x + dx, y + dy)) v = false;
                }
            }
            out.set(x, y, v);
        }
    }
    return out;
}

BinaryMask select_labels(const LabelMap& labels, const std::set<int>& include) {
    BinaryMask out(labels.width(), labels.height());
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            out.set(x, y, include.count(labels.get(x, y)) > 0);
        }
    }
    return out;
}

BinaryMask subtract(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.width(), a.height());
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) out.set(x, y, a.get(x, y) && !b.get(x, y));
    }
    return out;
}

RgbImage stitch(const RgbImage& generated, const RgbImage& source, const BinaryMask& head) {
    RgbImage out(source.width(), source.height());
    for (int y = 0; y < source.height(); ++y) {
        for (int x = 0; x < source.width(); ++x) {
            const std::uint8_t* p = head.get(x, y) ? source.at(x, y) : generated.at(x, y);
            out.set(x, y, p[0], p[1], p[2]);
        }
    }
    return out;
}

double poly_kernel(const std::vector<double>& x, const std::vector<double>& y) {
    double dot = 0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    const double base = dot / static_cast<double>(x.size()) + 1.0;
    return base * base * base;
}

double mmd2(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y) {
    const std::size_t n = x.size();
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            sum += poly_kernel(x[i], x[j]) + poly_kernel(y[i], y[j]) - poly_kernel(x[i], y[j]) -
                   poly_kernel(x[j], y[i]);
        }
    }
    return sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace oracle

namespace fixture {

BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
    std::bernoulli_distribution bit(density);
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m.set(x, y, bit(rng));
    }
    return m;
}

LabelMap random_labels(std::mt19937_64& rng, int w, int h) {
    // Blobs rather than i.i.d. noise so regions survive erosion sometimes.
    std::uniform_int_distribution<int> label(0, dicti::kMaxLabel);
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1), extent(1, std::max(2, w / 3));
    LabelMap m(w, h, 0);
    for (int blob = 0; blob < 12; ++blob) {
        const int l = label(rng);
        const int x0 = px(rng), y0 = py(rng), bw = extent(rng), bh = extent(rng);
        for (int y = y0; y < std::min(h, y0 + bh); ++y) {
            for (int x = x0; x < std::min(w, x0 + bw); ++x) m.set(x, y, static_cast<std::uint8_t>(l));
        }
    }
    return m;
}

RgbImage random_image(std::mt19937_64& rng, int w, int h) {
    std::uniform_int_distribution<int> byte(0, 255);
    RgbImage img(w, h);
    for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(byte(rng));
    return img;
}

std::vector<std::vector<double>> gaussian_rows(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                                               double shift) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
    for (auto& r : rows) {
        for (auto& v : r) v = g(rng) + shift;
    }
    return rows;
}

namespace {

void fill(LabelMap& m, double x0, double y0, double x1, double y1, int label) {
    const int w = m.width(), h = m.height();
    for (int y = static_cast<int>(y0 * h); y < static_cast<int>(y1 * h); ++y) {
        for (int x = static_cast<int>(x0 * w); x < static_cast<int>(x1 * w); ++x) {
            if (x >= 0 && y >= 0 && x < w && y < h) m.set(x, y, static_cast<std::uint8_t>(label));
        }
    }
}

}  // namespace

Person person(int width, int height) {
    Person p;
    p.labels = LabelMap(width, height, 0);
    auto& m = p.labels;
    fill(m, 0.40, 0.04, 0.60, 0.18, 23);  // face
    fill(m, 0.45, 0.18, 0.55, 0.22, 24);  // neck
    fill(m, 0.30, 0.22, 0.70, 0.38, 1);   // upper torso
    fill(m, 0.32, 0.38, 0.68, 0.55, 2);   // lower torso
    fill(m, 0.18, 0.22, 0.30, 0.40, 15);  // upper arms
    fill(m, 0.70, 0.22, 0.82, 0.40, 16);
    fill(m, 0.16, 0.40, 0.28, 0.56, 19);  // forearms
    fill(m, 0.72, 0.40, 0.84, 0.56, 20);
    fill(m, 0.15, 0.56, 0.27, 0.62, 4);   // hands
    fill(m, 0.73, 0.56, 0.85, 0.62, 3);
    fill(m, 0.34, 0.55, 0.49, 0.75, 7);   // thighs
    fill(m, 0.51, 0.55, 0.66, 0.75, 8);
    fill(m, 0.35, 0.75, 0.48, 0.92, 11);  // calves
    fill(m, 0.52, 0.75, 0.65, 0.92, 12);
    fill(m, 0.34, 0.92, 0.49, 0.97, 5);   // feet
    fill(m, 0.51, 0.92, 0.66, 0.97, 6);

    p.image = RgbImage(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int l = m.get(x, y);
            if (l == 0) {
                p.image.set(x, y, static_cast<std::uint8_t>(200 + (x * 40) / width),
                            static_cast<std::uint8_t>(210 + (y * 30) / height), 220);
            } else {
                p.image.set(x, y, static_cast<std::uint8_t>((l * 37) % 256),
                            static_cast<std::uint8_t>((l * 91 + x) % 256),
                            static_cast<std::uint8_t>((l * 53 + y) % 256));
            }
        }
    }
    return p;
}

namespace {

struct TempRegistry {
    std::mutex mutex;
    std::vector<std::filesystem::path> dirs;
    ~TempRegistry() {
        if (std::getenv("DICTI_KEEP_TEST_DIRS")) return;
        std::error_code ec;
        for (const auto& d : dirs) std::filesystem::remove_all(d, ec);
    }
};

TempRegistry& registry() {
    static TempRegistry r;
    return r;
}

}  // namespace

std::filesystem::path temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("dicti-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.dirs.push_back(dir);
    return dir;
}

}  // namespace fixture
