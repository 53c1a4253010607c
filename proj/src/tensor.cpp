#include "sprayeval/tensor.hpp"

#include <set>

namespace sprayeval {

LabelMask::LabelMask(Index height, Index width, int num_classes)
    : labels_(Matrix::Zero(height, width)), num_classes_(num_classes) {
    if (height <= 0 || width <= 0) throw ArgumentError("label mask extents must be positive");
    if (num_classes < 1 || num_classes > 256) throw ArgumentError("label mask needs 1..256 classes");
}

LabelMask::LabelMask(Matrix labels, int num_classes) : labels_(std::move(labels)), num_classes_(num_classes) {
    if (labels_.rows() <= 0 || labels_.cols() <= 0) throw ArgumentError("label mask extents must be positive");
    if (num_classes < 1 || num_classes > 256) throw ArgumentError("label mask needs 1..256 classes");
    if (labels_.size() > 0 && static_cast<int>(labels_.maxCoeff()) >= num_classes_) {
        throw DataError("label " + std::to_string(static_cast<int>(labels_.maxCoeff())) +
                        " outside [0, " + std::to_string(num_classes_) + ")");
    }
}

void LabelMask::set(Index y, Index x, int label) {
    if (label < 0 || label >= num_classes_) throw DataError("label " + std::to_string(label) + " out of range");
    labels_(y, x) = static_cast<std::uint8_t>(label);
}

ClassTable::ClassTable(std::vector<std::string> names, std::map<int, int> sprayed_pair)
    : names_(std::move(names)), sprayed_pair_(std::move(sprayed_pair)) {
    std::set<std::string> unique(names_.begin(), names_.end());
    if (unique.size() != names_.size()) throw ArgumentError("class names must be unique");
    std::set<int> targets;
    for (auto [sprayed, base] : sprayed_pair_) {
        if (sprayed <= 0 || sprayed >= size() || base <= 0 || base >= size()) {
            throw ArgumentError("sprayed pair must map foreground ids to foreground ids");
        }
        if (!targets.insert(base).second) throw ArgumentError("sprayed pair must be injective");
    }
}

const ClassTable& ClassTable::dataset() {
    static const ClassTable table({"background", "lettuce", "chickweed", "meadowgrass", "sprayed lettuce",
                                   "sprayed chickweed", "sprayed meadowgrass"},
                                  {{4, 1}, {5, 2}, {6, 3}});
    return table;
}

const std::string& ClassTable::name(int id) const {
    if (id < 0 || id >= size()) throw ArgumentError("unknown class id " + std::to_string(id));
    return names_[static_cast<std::size_t>(id)];
}

int ClassTable::id(const std::string& name) const {
    for (int i = 0; i < size(); ++i) {
        if (names_[static_cast<std::size_t>(i)] == name) return i;
    }
    throw ArgumentError("unknown class name '" + name + "'");
}

int ClassTable::base_of(int sprayed_id) const {
    auto it = sprayed_pair_.find(sprayed_id);
    if (it == sprayed_pair_.end()) throw ArgumentError("class " + std::to_string(sprayed_id) + " is not a sprayed class");
    return it->second;
}

std::vector<int> ClassTable::sprayed_classes() const {
    std::vector<int> out;
    for (auto [sprayed, base] : sprayed_pair_) out.push_back(sprayed);
    return out;
}

}  // namespace sprayeval
