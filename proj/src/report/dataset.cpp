#include "sprayeval/report/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "sprayeval/report/png.hpp"
#include "sprayeval/tensor_io.hpp"

namespace sprayeval {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<fs::path> find_with_extension(const fs::path& dir, const std::string& id,
                                            std::initializer_list<const char*> exts) {
    for (const char* ext : exts) {
        fs::path p = dir / (id + ext);
        if (fs::is_regular_file(p)) return p;
    }
    return std::nullopt;
}

std::string join(const std::vector<std::string>& items, std::size_t limit = 10) {
    std::string out;
    for (std::size_t i = 0; i < items.size() && i < limit; ++i) out += (i ? ", " : "") + items[i];
    if (items.size() > limit) out += ", ... (" + std::to_string(items.size()) + " total)";
    return out;
}

int parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(where + ": expected an integer, got '" + s + "'");
    }
}

}  // namespace

DatasetLayout DatasetLayout::load(const fs::path& root) {
    DatasetLayout layout;
    const fs::path map = root / "dataset.map";
    if (!fs::exists(map)) return layout;
    std::ifstream in(map);
    if (!in) throw IoError("cannot read " + map.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(map.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (value.empty()) throw ConfigError(map.string() + ":" + std::to_string(lineno) + ": empty value");
        if (key == "images") layout.images = value;
        else if (key == "masks") layout.masks = value;
        else if (key == "keypoints") layout.keypoints = value;
        else if (key == "split") layout.split = value;
        else throw ConfigError(map.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return layout;
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

long long DatasetStats::annotations() const {
    long long n = 0;
    for (int c = 1; c < kDatasetClassCount; ++c) n += instances[static_cast<std::size_t>(c)];
    return n;
}

nlohmann::ordered_json DatasetStats::to_json() const {
    const auto& table = ClassTable::dataset();
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (int c = 0; c < kDatasetClassCount; ++c) {
        const auto i = static_cast<std::size_t>(c);
        classes.push_back({{"class_id", c},
                           {"name", table.name(c)},
                           {"pixels", pixels[i]},
                           {"instances", instances[i]},
                           {"keypoints", keypoints[i]}});
    }
    return {{"train_images", train_images},
            {"test_images", test_images},
            {"annotations", annotations()},
            {"classes", classes}};
}

std::vector<DatasetEntry> DatasetIndex::test_entries() const {
    std::vector<DatasetEntry> out;
    for (const auto& e : entries)
        if (e.split == Split::test) out.push_back(e);
    return out;
}

Tensor load_image(const fs::path& path) {
    const auto ext = path.extension().string();
    Tensor t = ext == ".png" ? read_png_image(path) : read_tensor(path);
    if (t.rank() != 3 || t.channels() != 3) throw DataError(path.string() + ": image must be (3, H, W)");
    return t;
}

LabelMask load_mask(const fs::path& path) {
    if (path.extension() == ".png") return read_png_mask(path);
    try {
        return read_mask(path);
    } catch (const DataError& e) {
        const std::string what = e.what();
        if (what.find(path.string()) != std::string::npos) throw;
        throw DataError(path.string() + ": " + what);
    }
}

std::vector<KeypointRecord> read_keypoints_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "image_id,class_id,row,col") {
        throw DataError(path.string() + ": expected header image_id,class_id,row,col");
    }
    std::vector<KeypointRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() != 4) throw DataError(where + ": expected 4 fields");
        KeypointRecord r;
        r.image_id = cells[0];
        r.class_id = parse_int(cells[1], where);
        r.point = {parse_int(cells[2], where), parse_int(cells[3], where)};
        out.push_back(r);
    }
    return out;
}

void write_keypoints_csv(const fs::path& path, const std::vector<KeypointRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "image_id,class_id,row,col\n";
    for (const auto& r : records) out << r.image_id << ',' << r.class_id << ',' << r.point.row << ',' << r.point.col << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<PixelPoint> points_of_class(const std::vector<KeypointRecord>& records, int class_id) {
    std::vector<PixelPoint> out;
    for (const auto& r : records)
        if (r.class_id == class_id) out.push_back(r.point);
    return out;
}

std::array<long long, kDatasetClassCount> count_instances(const LabelMask& mask) {
    std::array<long long, kDatasetClassCount> out{};
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> grid(mask.height(), mask.width());
    for (int c = 1; c < kDatasetClassCount; ++c) {
        grid = mask.labels().array() == static_cast<std::uint8_t>(c);
        if (!grid.any()) continue;
        out[static_cast<std::size_t>(c)] = static_cast<long long>(connected_components(grid, Connectivity::eight).size());
    }
    return out;
}

DatasetIndex ingest(const fs::path& root) {
    if (!fs::is_directory(root)) throw ConfigError("dataset root " + root.string() + " is not a directory");
    DatasetIndex index;
    index.root = root;
    index.layout = DatasetLayout::load(root);
    const fs::path split = root / index.layout.split;
    std::ifstream in(split);
    if (!in) throw DataError("missing split manifest " + split.string());

    std::set<std::string> seen;
    std::vector<std::string> missing_images, missing_masks;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, tag, extra;
        ss >> id >> tag;
        const std::string where = split.string() + ":" + std::to_string(lineno);
        if (id.empty() || tag.empty() || (ss >> extra)) throw DataError(where + ": expected '<id> <train|test>'");
        if (tag != "train" && tag != "test") throw DataError(where + ": unknown split '" + tag + "'");
        if (!seen.insert(id).second) throw DataError(where + ": duplicate image id '" + id + "'");

        DatasetEntry e;
        e.id = id;
        e.split = tag == "train" ? Split::train : Split::test;
        const auto image = find_with_extension(root / index.layout.images, id, {".tnsr", ".png"});
        const auto mask = find_with_extension(root / index.layout.masks, id, {".lmsk", ".png"});
        if (!image) missing_images.push_back(id);
        if (!mask) missing_masks.push_back(id);
        if (image) e.image = *image;
        if (mask) e.mask = *mask;
        e.keypoints = find_with_extension(root / index.layout.keypoints, id, {".csv"});
        index.entries.push_back(std::move(e));
    }
    if (!missing_images.empty()) throw DataError("images missing for: " + join(missing_images));
    if (!missing_masks.empty()) throw DataError("masks missing for: " + join(missing_masks));

    const auto& table = ClassTable::dataset();
    for (const auto& e : index.entries) {
        (e.split == Split::train ? index.stats.train_images : index.stats.test_images)++;
        const LabelMask mask = load_mask(e.mask);
        const Tensor image = load_image(e.image);
        if (image.height() != mask.height() || image.width() != mask.width()) {
            throw DataError(e.mask.string() + ": mask is " + std::to_string(mask.height()) + "x" +
                            std::to_string(mask.width()) + " but the image is " + std::to_string(image.height()) +
                            "x" + std::to_string(image.width()));
        }
        const auto inst = count_instances(mask);
        for (int c = 0; c < kDatasetClassCount; ++c) {
            const auto i = static_cast<std::size_t>(c);
            index.stats.pixels[i] += mask.count(c);
            index.stats.instances[i] += inst[i];
        }
        if (!e.keypoints) continue;
        for (const auto& r : read_keypoints_csv(*e.keypoints)) {
            const std::string where = e.keypoints->string();
            if (r.image_id != e.id) throw DataError(where + ": row for image '" + r.image_id + "'");
            if (r.class_id < 0 || r.class_id >= kDatasetClassCount || !table.is_sprayed(r.class_id)) {
                throw DataError(where + ": keypoint class " + std::to_string(r.class_id) + " is not a sprayed class");
            }
            if (r.point.row < 0 || r.point.col < 0 || r.point.row >= mask.height() || r.point.col >= mask.width()) {
                throw DataError(where + ": keypoint outside the image");
            }
            ++index.stats.keypoints[static_cast<std::size_t>(r.class_id)];
        }
    }
    return index;
}

}  // namespace sprayeval
