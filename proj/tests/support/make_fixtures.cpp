// Writes the committed acceptance fixtures: tests/fixtures/person.png and
// tests/fixtures/person_labels.png.
#include <iostream>

#include "dicti/image_io.hpp"
#include "support/oracles.hpp"

int main(int argc, char** argv) {
    const std::filesystem::path dir = argc > 1 ? argv[1] : DICTI_TEST_FIXTURES_DIR;
    const auto p = fixture::person(fixture::kFixtureWidth, fixture::kFixtureHeight);
    dicti::save_png(dir / "person.png", p.image);
    dicti::save_png(dir / "person_labels.png", p.labels);
    std::cout << "wrote " << (dir / "person.png").string() << " and " << (dir / "person_labels.png").string() << '\n';
    return 0;
}
