#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dguard/dataset.hpp"
#include "dguard/geometry.hpp"
#include "dguard/image.hpp"
#include "dguard/rng.hpp"

namespace dguard {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string digest_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

namespace detail {

// Seeded lattice value noise in [0, 1), bilinearly interpolated.
inline double value_noise(std::uint64_t seed, double x, double y, double scale) {
    const double fx = x / scale, fy = y / scale;
    const long long x0 = static_cast<long long>(std::floor(fx));
    const long long y0 = static_cast<long long>(std::floor(fy));
    auto corner = [&](long long cx, long long cy) {
        std::uint64_t h = seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(cx + 0x10000)) ^
                          (0xc2b2ae3d27d4eb4full * static_cast<std::uint64_t>(cy + 0x10000));
        return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
    };
    const double tx = fx - static_cast<double>(x0);
    const double ty = fy - static_cast<double>(y0);
    const double a = corner(x0, y0) * (1 - tx) + corner(x0 + 1, y0) * tx;
    const double b = corner(x0, y0 + 1) * (1 - tx) + corner(x0 + 1, y0 + 1) * tx;
    return a * (1 - ty) + b * ty;
}

} // namespace detail

// Shape and texture family of one object class. Filled deterministically
// from the master seed; class colors come from a fixed well-separated
// palette so the window descriptor can tell classes apart.
struct ClassStyle {
    enum Shape { Rectangle = 0, Ellipse = 1 };
    Shape shape = Rectangle;
    float base[3] = {0.5f, 0.5f, 0.5f};
    float noise_amp = 0.22f;
    double noise_scale = 5.0;
};

// Defaults are the desk-scale experiment: wide frames so every object keeps
// a far-patch corridor on at least one side, object sides 0.36..0.55 of the
// short dimension so feature boxes stay clusterable, and half the objects
// forced above 4x the reference patch area.
struct SceneSpec {
    int width = 192, height = 96;
    int classes = 3;
    int count = 200;           // dataset size in images
    int objects_min = 1, objects_max = 1;
    double size_frac_min = 0.36, size_frac_max = 0.55;  // object side as a fraction of min(W, H)
    double large_fraction = 0.50;  // share of objects forced above 4x the reference patch area
    int patch_reference = 24;      // patch side the large bucket refers to
    int placement_margin = 3;      // min pixel separation between objects
    std::uint64_t seed = 42;
    std::vector<ClassStyle> styles;

    void validate() const {
        if (width < 16 || height < 16) throw std::invalid_argument("scene: image too small");
        if (classes < 1 || classes > 8) throw std::invalid_argument("scene: classes must be in 1..8");
        if (count < 0) throw std::invalid_argument("scene: negative dataset size");
        if (objects_min < 0 || objects_max < objects_min)
            throw std::invalid_argument("scene: bad objects-per-image range");
        if (!(size_frac_min > 0) || size_frac_max < size_frac_min || size_frac_max > 1.0)
            throw std::invalid_argument("scene: bad size fraction range");
        if (large_fraction < 0 || large_fraction > 1)
            throw std::invalid_argument("scene: large_fraction out of range");
    }
};

inline std::vector<ClassStyle> derive_class_styles(int classes, std::uint64_t seed) {
    static constexpr float kPalette[8][3] = {
        {0.86f, 0.18f, 0.16f}, {0.16f, 0.78f, 0.26f}, {0.20f, 0.32f, 0.90f},
        {0.88f, 0.80f, 0.14f}, {0.78f, 0.22f, 0.84f}, {0.12f, 0.80f, 0.80f},
        {0.92f, 0.52f, 0.12f}, {0.55f, 0.86f, 0.50f}};
    std::vector<ClassStyle> styles(classes);
    Rng rng(derive_seed(seed, 0xC1A55));
    for (int c = 0; c < classes; ++c) {
        ClassStyle& st = styles[c];
        st.shape = (c % 2 == 0) ? ClassStyle::Rectangle : ClassStyle::Ellipse;
        for (int k = 0; k < 3; ++k) st.base[k] = kPalette[c][k];
        st.noise_amp = static_cast<float>(rng.uniform(0.16, 0.26));
        st.noise_scale = rng.uniform(4.0, 7.0);
    }
    return styles;
}

inline SceneSpec finalize_scene_spec(SceneSpec spec) {
    spec.validate();
    if (spec.styles.empty()) spec.styles = derive_class_styles(spec.classes, spec.seed);
    return spec;
}

inline std::string image_id_for(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img_%05d", index);
    return buf;
}

// Renders one scene: textured objects on a per-image background texture.
// Deterministic given (spec.seed, index). When masks is non-null it receives
// one painted-pixel mask per object, in annotation order.
inline AnnotatedImage render_scene(const SceneSpec& spec, int index,
                                   std::vector<std::vector<std::uint8_t>>* masks = nullptr) {
    const int W = spec.width, H = spec.height;
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
    AnnotatedImage out;
    out.id = image_id_for(index);
    out.image = Image(W, H, 3);

    // Background: low-saturation noise, distinct texture per image.
    const std::uint64_t bg_seed = derive_seed(spec.seed, 0xB000000ull + index);
    const float bg_base = static_cast<float>(0.40 + 0.10 * rng.next_double());
    float tint[3];
    for (auto& t : tint) t = static_cast<float>(rng.uniform(-0.04, 0.04));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double n = detail::value_noise(bg_seed, x, y, 11.0) - 0.5;
            for (int c = 0; c < 3; ++c)
                out.image.at(x, y, c) =
                    std::clamp(bg_base + tint[c] + static_cast<float>(0.10 * n), 0.02f, 0.98f);
        }

    const int n_objects = rng.uniform_int(spec.objects_min, spec.objects_max);
    const int min_dim = std::min(W, H);
    const int min_side = std::max(8, static_cast<int>(std::floor(spec.size_frac_min * min_dim)));
    const int max_side = std::max(min_side, static_cast<int>(std::floor(spec.size_frac_max * min_dim)));
    const int large_side = std::min(max_side, 2 * spec.patch_reference);

    // Layout with whole-image restarts: an unlucky early placement can make
    // the rest infeasible, so the full layout is resampled rather than only
    // the blocked object.
    std::vector<PixelBox> placed;
    std::vector<std::pair<int, bool>> object_kinds;  // (label, large)
    bool laid_out = n_objects == 0;
    for (int restart = 0; restart < 40 && !laid_out; ++restart) {
        placed.clear();
        object_kinds.clear();
        for (int obj = 0; obj < n_objects; ++obj)
            object_kinds.emplace_back(rng.uniform_int(0, spec.classes - 1),
                                      rng.bernoulli(spec.large_fraction));
        laid_out = true;
        for (int obj = 0; obj < n_objects && laid_out; ++obj) {
            bool ok = false;
            for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
                const int lo = object_kinds[obj].second ? std::max(min_side, large_side) : min_side;
                const int w = rng.uniform_int(lo, std::max(lo, max_side));
                const int h = rng.uniform_int(lo, std::max(lo, max_side));
                if (w >= W || h >= H) continue;
                const int x0 = rng.uniform_int(0, W - w);
                const int y0 = rng.uniform_int(0, H - h);
                const PixelBox box{x0, y0, x0 + w, y0 + h};
                ok = true;
                for (const auto& other : placed) {
                    const PixelBox grown{std::max(0, other.x_min - spec.placement_margin),
                                         std::max(0, other.y_min - spec.placement_margin),
                                         std::min(W, other.x_max + spec.placement_margin),
                                         std::min(H, other.y_max + spec.placement_margin)};
                    if (iou(box, grown) > 0.0) { ok = false; break; }
                }
                if (ok) placed.push_back(box);
            }
            laid_out = laid_out && ok;
        }
    }
    if (!laid_out)
        throw std::runtime_error("scene generation: unsatisfiable placement in image " +
                                 std::to_string(index));

    for (int obj = 0; obj < n_objects; ++obj) {
        const int label = object_kinds[obj].first;
        const PixelBox& box = placed[obj];

        const ClassStyle& style = spec.styles.at(label);
        const std::uint64_t tex_seed = derive_seed(spec.seed, (0xA000000ull + index) * 131 + obj);
        const double cx = 0.5 * (box.x_min + box.x_max);
        const double cy = 0.5 * (box.y_min + box.y_max);
        const double ax = 0.5 * (box.x_max - box.x_min);
        const double ay = 0.5 * (box.y_max - box.y_min);

        std::vector<std::uint8_t> mask(static_cast<std::size_t>(W) * H, 0);
        int px_min = W, py_min = H, px_max = 0, py_max = 0;
        for (int y = box.y_min; y < box.y_max; ++y)
            for (int x = box.x_min; x < box.x_max; ++x) {
                bool inside = true;
                if (style.shape == ClassStyle::Ellipse) {
                    const double dx = (x + 0.5 - cx) / ax;
                    const double dy = (y + 0.5 - cy) / ay;
                    inside = dx * dx + dy * dy <= 1.0;
                }
                if (!inside) continue;
                const double n = detail::value_noise(tex_seed, x, y, style.noise_scale) - 0.5;
                for (int c = 0; c < 3; ++c)
                    out.image.at(x, y, c) = std::clamp(
                        style.base[c] + static_cast<float>(style.noise_amp * n), 0.02f, 0.98f);
                mask[static_cast<std::size_t>(y) * W + x] = 1;
                px_min = std::min(px_min, x);
                py_min = std::min(py_min, y);
                px_max = std::max(px_max, x + 1);
                py_max = std::max(py_max, y + 1);
            }
        if (px_min >= px_max)
            throw std::runtime_error("scene generation: degenerate object in image " +
                                     std::to_string(index));
        // Annotate the painted extent, which for ellipses may inset the
        // sampled box by a rounding pixel.
        out.objects.push_back(LabeledBox{PixelBox{px_min, py_min, px_max, py_max}, label});
        if (masks) masks->push_back(std::move(mask));
    }
    return out;
}

inline Dataset generate_dataset(const SceneSpec& raw_spec) {
    const SceneSpec spec = finalize_scene_spec(raw_spec);
    Dataset ds;
    ds.images.reserve(spec.count);
    for (int k = 0; k < spec.count; ++k) ds.images.push_back(render_scene(spec, k));
    return ds;
}

// Renders the whole dataset into (relative path, bytes) pairs:
// images/<id>.ppm, annotations.txt (interchange format, confidence 1) and
// manifest.txt ("path digest" per line, sorted by path). Fully in-memory so
// callers can write all-or-nothing.
inline std::vector<std::pair<std::string, std::string>> encode_dataset_files(const SceneSpec& raw_spec) {
    const SceneSpec spec = finalize_scene_spec(raw_spec);

    std::map<std::string, std::string> digests;
    std::vector<std::pair<std::string, std::string>> files;
    std::vector<DetectionRecord> annotations;
    for (int k = 0; k < spec.count; ++k) {
        const AnnotatedImage ai = render_scene(spec, k);
        const std::string rel = "images/" + ai.id + ".ppm";
        std::string bytes = encode_ppm(ai.image);
        digests[rel] = digest_hex(bytes);
        files.emplace_back(rel, std::move(bytes));
        for (const auto& obj : ai.objects)
            annotations.push_back(DetectionRecord{ai.id, Detection{obj.box, obj.label, 1.0}});
    }

    std::string ann_text = encode_detections(annotations);
    digests["annotations.txt"] = digest_hex(ann_text);
    files.emplace_back("annotations.txt", std::move(ann_text));

    std::string manifest;
    for (const auto& [path, digest] : digests) manifest += path + " " + digest + "\n";
    files.emplace_back("manifest.txt", std::move(manifest));
    return files;
}

inline std::vector<std::string> write_dataset(const SceneSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");
    std::vector<std::string> written;
    for (const auto& [rel, bytes] : encode_dataset_files(spec)) {
        std::ofstream f(fs::path(out_dir) / rel, std::ios::binary);
        if (!f) throw std::runtime_error("dataset: cannot write " + rel);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("dataset: write failed: " + rel);
        written.push_back(rel);
    }
    return written;
}

// --- scene spec file (key = value) --------------------------------------

inline SceneSpec parse_scene_spec_text(const std::string& text) {
    SceneSpec spec;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw std::runtime_error("scene spec: malformed line " + std::to_string(lineno));
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "width") spec.width = std::stoi(value);
            else if (key == "height") spec.height = std::stoi(value);
            else if (key == "classes") spec.classes = std::stoi(value);
            else if (key == "images") spec.count = std::stoi(value);
            else if (key == "objects_min") spec.objects_min = std::stoi(value);
            else if (key == "objects_max") spec.objects_max = std::stoi(value);
            else if (key == "size_frac_min") spec.size_frac_min = std::stod(value);
            else if (key == "size_frac_max") spec.size_frac_max = std::stod(value);
            else if (key == "large_fraction") spec.large_fraction = std::stod(value);
            else if (key == "patch_reference") spec.patch_reference = std::stoi(value);
            else if (key == "placement_margin") spec.placement_margin = std::stoi(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else throw std::runtime_error("scene spec: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("scene spec: bad value for '" + key + "' at line " +
                                     std::to_string(lineno));
        }
    }
    spec.validate();
    return spec;
}

inline SceneSpec load_scene_spec(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("scene spec: cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scene_spec_text(ss.str());
}

} // namespace dguard
