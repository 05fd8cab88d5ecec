#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "feast/mesh.hpp"

namespace feast {

// Point cloud with one part label per point, tagged with a shape category.
struct LabeledPointCloud {
    std::vector<Vec3> points;
    std::vector<int> labels;
    int category = 0;

    int size() const { return static_cast<int>(points.size()); }
};

// Reads whitespace-separated "x y z" lines plus a parallel file of integer
// labels (one per line). Line counts must match.
LabeledPointCloud load_labeled_points(std::istream& points_in, std::istream& labels_in);
LabeledPointCloud load_labeled_points(const std::string& points_path, const std::string& labels_path);

Matrix xyz_features(const LabeledPointCloud& cloud, bool center = true);

} // namespace feast
