#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dguard/geometry.hpp"

namespace dguard {

// X x Y x (N+1) grid of per-location class logits. Class indices 0..N-1 are
// object classes; index N is the background class (always the largest index).
struct LocalLogitsMap {
    int X = 0, Y = 0;
    int classes = 0;  // N + 1, background included
    std::vector<double> values;
    ReceptiveFieldConfig cfg{};

    LocalLogitsMap() = default;
    LocalLogitsMap(int X_, int Y_, int classes_)
        : X(X_), Y(Y_), classes(classes_),
          values(static_cast<std::size_t>(X_) * Y_ * classes_, 0.0) {}

    int num_object_classes() const { return classes - 1; }

    std::size_t index(int i, int j, int c) const {
        return (static_cast<std::size_t>(i) * Y + j) * classes + c;
    }
    const double& at(int i, int j, int c) const { return values[index(i, j, c)]; }
    double& at(int i, int j, int c) { return values[index(i, j, c)]; }

    FeatureBox full_box() const { return FeatureBox{0, 0, X, Y}; }
};

// X x Y binary grid marking where windowed robust classification asserts
// an object is present.
struct ObjectnessMap {
    int X = 0, Y = 0;
    std::vector<std::uint8_t> cells;

    ObjectnessMap() = default;
    ObjectnessMap(int X_, int Y_) : X(X_), Y(Y_), cells(static_cast<std::size_t>(X_) * Y_, 0) {}

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * Y + j; }
    std::uint8_t at(int i, int j) const { return cells[index(i, j)]; }
    std::uint8_t& at(int i, int j) { return cells[index(i, j)]; }

    long long popcount() const {
        long long n = 0;
        for (auto v : cells) n += v;
        return n;
    }

    ObjectnessMap crop(const FeatureBox& fb) const {
        if (fb.empty()) return ObjectnessMap{};
        ObjectnessMap out(fb.width(), fb.height());
        for (int i = fb.i_min; i < fb.i_max; ++i)
            for (int j = fb.j_min; j < fb.j_max; ++j)
                out.at(i - fb.i_min, j - fb.j_min) = at(i, j);
        return out;
    }

    friend bool operator==(const ObjectnessMap&, const ObjectnessMap&) = default;
};

// Text dump format consumed by the render subcommand: header line
// "OM <X> <Y>" followed by Y rows of X '0'/'1' characters (row j per line).
std::string dump_objectness_map(const ObjectnessMap& om);
ObjectnessMap parse_objectness_map(const std::string& text);

inline std::string dump_objectness_map(const ObjectnessMap& om) {
    std::string out = "OM " + std::to_string(om.X) + " " + std::to_string(om.Y) + "\n";
    for (int j = 0; j < om.Y; ++j) {
        for (int i = 0; i < om.X; ++i) out.push_back(om.at(i, j) ? '1' : '0');
        out.push_back('\n');
    }
    return out;
}

inline ObjectnessMap parse_objectness_map(const std::string& text) {
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\n' || text[pos] == '\r' || text[pos] == '\t'))
            ++pos;
        std::size_t start = pos;
        while (pos < text.size() && text[pos] != ' ' && text[pos] != '\n' && text[pos] != '\r' && text[pos] != '\t')
            ++pos;
        return text.substr(start, pos - start);
    };
    if (next_token() != "OM") throw std::runtime_error("objectness map dump: bad magic");
    const int X = std::stoi(next_token());
    const int Y = std::stoi(next_token());
    if (X < 0 || Y < 0) throw std::runtime_error("objectness map dump: bad dimensions");
    ObjectnessMap om(X, Y);
    for (int j = 0; j < Y; ++j) {
        std::string row = next_token();
        if (static_cast<int>(row.size()) != X) throw std::runtime_error("objectness map dump: bad row length");
        for (int i = 0; i < X; ++i) {
            if (row[i] != '0' && row[i] != '1') throw std::runtime_error("objectness map dump: bad cell");
            om.at(i, j) = row[i] == '1';
        }
    }
    return om;
}

} // namespace dguard
