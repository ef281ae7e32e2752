#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dguard/image.hpp"
#include "dguard/maps.hpp"
#include "dguard/rng.hpp"

using namespace dguard;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "dguard_io_test";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("ppm round trip is byte exact") {
    Rng rng(5);
    Image img(17, 9, 3);
    for (auto& v : img.data) v = static_cast<float>(rng.next_double());

    const fs::path path = temp_dir() / "roundtrip.ppm";
    write_ppm(path.string(), img);
    const Image back = read_ppm(path.string());
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    // Quantization to bytes happens on write; a second round trip is exact.
    CHECK(encode_ppm(back) == encode_ppm(img));
}

TEST_CASE("ppm rejects malformed files") {
    const fs::path path = temp_dir() / "bad.ppm";
    {
        std::ofstream f(path, std::ios::binary);
        f << "P5\n4 4\n255\n";
    }
    CHECK_THROWS(read_ppm(path.string()));
    {
        std::ofstream f(path, std::ios::binary);
        f << "P6\n4 4\n255\nxx";  // truncated pixel data
    }
    CHECK_THROWS(read_ppm(path.string()));
    CHECK_THROWS(read_ppm((temp_dir() / "missing.ppm").string()));
}

TEST_CASE("ppm header skips comments") {
    const fs::path path = temp_dir() / "comment.ppm";
    {
        std::ofstream f(path, std::ios::binary);
        f << "P6\n# a comment\n2 1\n255\n";
        f.put(char(255)); f.put(char(0)); f.put(char(0));
        f.put(char(0)); f.put(char(255)); f.put(char(0));
    }
    const Image img = read_ppm(path.string());
    CHECK(img.width == 2);
    CHECK(img.at(0, 0, 0) == 1.0f);
    CHECK(img.at(1, 0, 1) == 1.0f);
}

TEST_CASE("pgm render of an all-zero map has the documented header and zero bytes") {
    const ObjectnessMap om(5, 3);
    const std::string bytes = encode_pgm(om);
    const std::string header = "P5\n5 3\n255\n";
    REQUIRE(bytes.size() == header.size() + 15);
    CHECK(bytes.substr(0, header.size()) == header);
    for (std::size_t k = header.size(); k < bytes.size(); ++k) CHECK(bytes[k] == 0);
}

TEST_CASE("pgm maps active cells to 255 in row-major pixel order") {
    ObjectnessMap om(3, 2);
    om.at(1, 0) = 1;  // column 1, row 0
    om.at(2, 1) = 1;
    const std::string bytes = encode_pgm(om);
    const std::string body = bytes.substr(std::string("P5\n3 2\n255\n").size());
    REQUIRE(body.size() == 6);
    CHECK(static_cast<unsigned char>(body[1]) == 255);  // row 0: cells (0,0) (1,0) (2,0)
    CHECK(static_cast<unsigned char>(body[5]) == 255);  // row 1: cells (0,1) (1,1) (2,1)
    CHECK(body[0] == 0);
    CHECK(body[2] == 0);
}

TEST_CASE("objectness map dump round trips") {
    Rng rng(9);
    ObjectnessMap om(7, 4);
    for (auto& c : om.cells) c = rng.bernoulli(0.4) ? 1 : 0;
    const ObjectnessMap back = parse_objectness_map(dump_objectness_map(om));
    CHECK(back == om);
    CHECK_THROWS(parse_objectness_map("XX 3 3\n000\n000\n000\n"));
    CHECK_THROWS(parse_objectness_map("OM 3 3\n00\n000\n000\n"));
    CHECK_THROWS(parse_objectness_map("OM 3 3\n002\n000\n000\n"));
}
