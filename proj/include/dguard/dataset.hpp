#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dguard/geometry.hpp"
#include "dguard/image.hpp"
#include "dguard/local_model.hpp"

namespace dguard {

struct Detection {
    PixelBox box;
    int label = 0;
    double confidence = 1.0;
};

struct DetectionRecord {
    std::string image_id;
    Detection det;
};

// Detections interchange format, one record per line:
//   image_id x_min y_min x_max y_max label confidence
// Space-separated decimals, ordered by (image_id, confidence desc). Ground
// truth annotations use the same format with confidence fixed at 1.
inline std::string encode_detections(std::vector<DetectionRecord> records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const DetectionRecord& a, const DetectionRecord& b) {
                         if (a.image_id != b.image_id) return a.image_id < b.image_id;
                         return a.det.confidence > b.det.confidence;
                     });
    std::string out;
    char buf[64];
    for (const auto& rec : records) {
        std::snprintf(buf, sizeof(buf), "%.17g", rec.det.confidence);
        out += rec.image_id + " " + std::to_string(rec.det.box.x_min) + " " +
               std::to_string(rec.det.box.y_min) + " " + std::to_string(rec.det.box.x_max) + " " +
               std::to_string(rec.det.box.y_max) + " " + std::to_string(rec.det.label) + " " +
               buf + "\n";
    }
    return out;
}

inline void write_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("detections: cannot open for writing: " + path);
    const std::string text = encode_detections(records);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("detections: write failed: " + path);
}

inline std::vector<DetectionRecord> parse_detections(std::istream& in) {
    std::vector<DetectionRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        DetectionRecord rec;
        double x0, y0, x1, y1;
        if (!(ls >> rec.image_id >> x0 >> y0 >> x1 >> y1 >> rec.det.label >> rec.det.confidence))
            throw std::runtime_error("detections: malformed record at line " + std::to_string(lineno));
        rec.det.box = PixelBox{static_cast<int>(std::llround(x0)), static_cast<int>(std::llround(y0)),
                               static_cast<int>(std::llround(x1)), static_cast<int>(std::llround(y1))};
        if (rec.det.box.x_min >= rec.det.box.x_max || rec.det.box.y_min >= rec.det.box.y_max)
            throw std::runtime_error("detections: degenerate box at line " + std::to_string(lineno));
        if (rec.det.confidence < 0.0 || rec.det.confidence > 1.0)
            throw std::runtime_error("detections: confidence out of range at line " + std::to_string(lineno));
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<DetectionRecord> read_detections(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("detections: cannot open: " + path);
    return parse_detections(f);
}

struct AnnotatedImage {
    std::string id;
    Image image;
    std::vector<LabeledBox> objects;
};

struct Dataset {
    std::vector<AnnotatedImage> images;

    const AnnotatedImage* find(const std::string& id) const {
        for (const auto& img : images)
            if (img.id == id) return &img;
        return nullptr;
    }
    long long total_objects() const {
        long long n = 0;
        for (const auto& img : images) n += static_cast<long long>(img.objects.size());
        return n;
    }
};

// Loads a generated dataset directory: images/<id>.ppm plus annotations.txt
// in interchange format. Images without annotations are legal (zero objects).
inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    const fs::path images_dir = root / "images";
    if (!fs::is_directory(images_dir))
        throw std::runtime_error("dataset: missing images directory: " + images_dir.string());

    std::map<std::string, std::vector<LabeledBox>> annotations;
    const fs::path ann_path = root / "annotations.txt";
    if (fs::exists(ann_path)) {
        for (const auto& rec : read_detections(ann_path.string()))
            annotations[rec.image_id].push_back(LabeledBox{rec.det.box, rec.det.label});
    }

    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(images_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ppm")
            ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw std::runtime_error("dataset: no images under " + images_dir.string());

    Dataset ds;
    ds.images.reserve(ids.size());
    for (const auto& id : ids) {
        AnnotatedImage ai;
        ai.id = id;
        ai.image = read_ppm((images_dir / (id + ".ppm")).string());
        if (auto it = annotations.find(id); it != annotations.end()) ai.objects = it->second;
        annotations.erase(id);
        ds.images.push_back(std::move(ai));
    }
    if (!annotations.empty())
        throw std::runtime_error("dataset: annotation references missing image: " +
                                 annotations.begin()->first);
    return ds;
}

} // namespace dguard
